"""Writer for the flat-binary sample-archive layout.

An archive directory holds ``sample_<k>.bin`` files, an optional
``mean.bin``, and a ``manifest.json`` written last as the commit
point.  Each array is serialized as a 32-byte header -- magic
``KUQ1``, rank and dims as little-endian uint32, zero padding -- then
the raw little-endian float64 payload in row-major order, and a
sample file concatenates one block per manifest quantity in manifest
order.  The manifest records a sha256 per file and each sample's
parameter draw z, which is what downstream pairing checks compare.

This module is self-contained on purpose: surrogate output meets the
solver stack only through these bytes.
"""

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"KUQ1"
HEADER_BYTES = 32
_MAX_RANK = (HEADER_BYTES - 8) // 4


class ArchiveError(ValueError):
    pass


def pack_array(arr):
    """Serialize one array to header + little-endian float64 bytes."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr[None]
    if arr.ndim > _MAX_RANK:
        raise ArchiveError(f"rank {arr.ndim} exceeds header capacity {_MAX_RANK}")
    header = MAGIC + struct.pack("<I", arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    header += b"\x00" * (HEADER_BYTES - len(header))
    return header + np.ascontiguousarray(arr).astype("<f8").tobytes()


def unpack_array(buf, offset=0):
    """Read one array block; returns (array, next_offset)."""
    head = buf[offset : offset + HEADER_BYTES]
    if len(head) < HEADER_BYTES or head[:4] != MAGIC:
        raise ArchiveError("bad or truncated array header")
    rank = struct.unpack_from("<I", head, 4)[0]
    if not 1 <= rank <= _MAX_RANK:
        raise ArchiveError(f"array header declares rank {rank}")
    dims = struct.unpack_from(f"<{rank}I", head, 8)
    count = int(np.prod(dims))
    start = offset + HEADER_BYTES
    end = start + 8 * count
    if end > len(buf):
        raise ArchiveError("array payload truncated")
    arr = np.frombuffer(buf[start:end], dtype="<f8").reshape(dims)
    return arr.astype(np.float64), end


def _digest(data):
    return hashlib.sha256(data).hexdigest()


class ArchiveWriter:
    """Assembles an archive directory; nothing commits until finalize().

    ``quantities`` fixes the name and order of the array blocks every
    sample file contains; ``meta`` is merged into the manifest at top
    level.
    """

    def __init__(self, root, meta, quantities):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        if (self.root / "manifest.json").exists():
            raise ArchiveError(f"archive already finalized at {self.root}")
        self.meta = dict(meta)
        self.quantities = list(quantities)
        if not self.quantities:
            raise ArchiveError("archive needs at least one quantity")
        self.samples = []
        self.mean = None
        self._shapes = None

    def _encode(self, data):
        missing = [q for q in self.quantities if q not in data]
        if missing:
            raise ArchiveError(f"sample is missing quantities {missing}")
        shapes = tuple(np.shape(data[q]) for q in self.quantities)
        if self._shapes is None:
            self._shapes = shapes
        elif shapes != self._shapes:
            raise ArchiveError("sample shapes differ from earlier samples")
        return b"".join(pack_array(data[q]) for q in self.quantities)

    def add_sample(self, z, data):
        k = len(self.samples)
        blob = self._encode(data)
        (self.root / f"sample_{k}.bin").write_bytes(blob)
        self.samples.append(
            {"index": k, "z": np.asarray(z, dtype=np.float64).tolist(),
             "checksum": _digest(blob)}
        )
        return k

    def write_mean(self, data, n_draws, seed):
        blob = self._encode(data)
        (self.root / "mean.bin").write_bytes(blob)
        self.mean = {"file": "mean.bin", "n_draws": int(n_draws),
                     "seed": int(seed), "checksum": _digest(blob)}

    def finalize(self):
        manifest = dict(self.meta)
        manifest["format"] = MAGIC.decode()
        manifest["quantities"] = self.quantities
        manifest["n_samples"] = len(self.samples)
        manifest["samples"] = self.samples
        if self.mean is not None:
            manifest["mean"] = self.mean
        tmp = self.root / "manifest.json.tmp"
        tmp.write_text(json.dumps(manifest, indent=1, sort_keys=True))
        tmp.rename(self.root / "manifest.json")
        return self.root / "manifest.json"


def read_archive(root):
    """Load a finalized archive back into memory, checksum-verified.

    Returns (manifest, samples, mean) where samples is a list of
    (z, {quantity: array}) and mean is {quantity: array} or None.
    Round-trip checking for the writer above; heavier validation and
    estimation live with the solver stack that consumes these files.
    """
    root = Path(root)
    path = root / "manifest.json"
    if not path.exists():
        raise ArchiveError(f"no manifest at {root}")
    manifest = json.loads(path.read_text())
    if manifest.get("format") != MAGIC.decode():
        raise ArchiveError("unrecognized archive format tag")
    quantities = list(manifest["quantities"])

    def read_blob(name, checksum):
        blob = (root / name).read_bytes()
        if _digest(blob) != checksum:
            raise ArchiveError(f"checksum mismatch in {name}")
        data, offset = {}, 0
        for q in quantities:
            data[q], offset = unpack_array(blob, offset)
        if offset != len(blob):
            raise ArchiveError(f"{name} carries trailing bytes")
        return data

    samples = []
    for rec in manifest["samples"]:
        z = np.asarray(rec["z"], dtype=np.float64)
        samples.append((z, read_blob(f"sample_{rec['index']}.bin",
                                     rec["checksum"])))
    mean = None
    if "mean" in manifest:
        mean = read_blob(manifest["mean"]["file"],
                         manifest["mean"]["checksum"])
    return manifest, samples, mean
