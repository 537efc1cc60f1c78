"""On-disk sample archive: flat binary records plus a JSON manifest.

An archive is a directory of per-sample files ``sample_<k>.bin``, an
optional ``mean.bin``, and a ``manifest.json`` written last as the
commit point.  Every array is stored as a 32-byte header -- magic
``KUQ1``, rank and dims as little-endian uint32, zero padding -- then
the raw little-endian float64 payload in row-major order; a sample
file concatenates one such block per manifest quantity, in manifest
order.  The manifest carries a sha256 of each file's bytes, the full
run metadata, and each sample's parameter draw z, which is what the
estimator's pairing precondition checks against.
"""

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import ValidationError

MAGIC = b"KUQ1"
HEADER_BYTES = 32
_MAX_RANK = (HEADER_BYTES - 8) // 4


def pack_array(arr):
    """Serialize one array to header + little-endian float64 bytes."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr[None]
    if arr.ndim > _MAX_RANK:
        raise ValidationError(f"rank {arr.ndim} exceeds header capacity {_MAX_RANK}")
    header = MAGIC + struct.pack("<I", arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    header += b"\x00" * (HEADER_BYTES - len(header))
    return header + np.ascontiguousarray(arr).astype("<f8").tobytes()


def unpack_array(buf, offset=0):
    """Read one array block; returns (array, next_offset)."""
    head = buf[offset : offset + HEADER_BYTES]
    if len(head) < HEADER_BYTES or head[:4] != MAGIC:
        raise ValidationError("bad or truncated array header")
    rank = struct.unpack_from("<I", head, 4)[0]
    if not 1 <= rank <= _MAX_RANK:
        raise ValidationError(f"array header declares rank {rank}")
    dims = struct.unpack_from(f"<{rank}I", head, 8)
    count = int(np.prod(dims))
    start = offset + HEADER_BYTES
    end = start + 8 * count
    if end > len(buf):
        raise ValidationError("array payload truncated")
    arr = np.frombuffer(buf[start:end], dtype="<f8").reshape(dims)
    return arr.astype(np.float64), end


def _digest(data):
    return hashlib.sha256(data).hexdigest()


def _sample_name(k):
    return f"sample_{k}.bin"


class ArchiveWriter:
    """Assembles an archive; nothing is committed until finalize().

    ``meta`` carries the run description (model, grid, epsilon, mu,
    initial condition, random-space bounds, output times, seed);
    ``quantities`` fixes the name and order of the array blocks every
    sample file must contain.
    """

    def __init__(self, root, meta, quantities):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        if (self.root / "manifest.json").exists():
            raise ValidationError(f"archive already finalized at {self.root}")
        self.meta = dict(meta)
        self.quantities = list(quantities)
        if not self.quantities:
            raise ValidationError("archive needs at least one quantity")
        self.samples = []
        self.mean = None
        self._shapes = None

    def _encode(self, data):
        missing = [q for q in self.quantities if q not in data]
        if missing:
            raise ValidationError(f"sample is missing quantities {missing}")
        shapes = tuple(np.shape(data[q]) for q in self.quantities)
        if self._shapes is None:
            self._shapes = shapes
        elif shapes != self._shapes:
            raise ValidationError("sample shapes differ from earlier samples")
        return b"".join(pack_array(data[q]) for q in self.quantities)

    def add_sample(self, z, data):
        k = len(self.samples)
        blob = self._encode(data)
        (self.root / _sample_name(k)).write_bytes(blob)
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
        return SampleArchive(self.root)


class SampleArchive:
    """A finalized archive, opened through its manifest."""

    def __init__(self, root):
        self.root = Path(root)
        path = self.root / "manifest.json"
        if not path.exists():
            raise ValidationError(f"no manifest at {self.root} (unfinalized archive?)")
        self.manifest = json.loads(path.read_text())
        if self.manifest.get("format") != MAGIC.decode():
            raise ValidationError("unrecognized archive format tag")
        self.quantities = list(self.manifest["quantities"])

    @property
    def n_samples(self):
        return int(self.manifest["n_samples"])

    def z_of(self, k):
        return np.asarray(self.manifest["samples"][k]["z"], dtype=np.float64)

    def z_matrix(self):
        return np.stack([self.z_of(k) for k in range(self.n_samples)]) \
            if self.n_samples else np.empty((0, 0))

    def _read_blob(self, name, checksum):
        path = self.root / name
        if not path.exists():
            raise ValidationError(f"missing payload {name}")
        blob = path.read_bytes()
        if _digest(blob) != checksum:
            raise ValidationError(f"checksum mismatch in {name}")
        data, offset = {}, 0
        for q in self.quantities:
            data[q], offset = unpack_array(blob, offset)
        if offset != len(blob):
            raise ValidationError(f"{name} carries {len(blob) - offset} trailing bytes")
        return data

    def read_sample(self, k):
        """Return (z, {quantity: array}) for sample k, checksum-verified."""
        if not 0 <= k < self.n_samples:
            raise ValidationError(f"sample index {k} out of range")
        rec = self.manifest["samples"][k]
        return self.z_of(k), self._read_blob(_sample_name(k), rec["checksum"])

    def read_mean(self):
        """Return the control-variate mean block {quantity: array}."""
        if "mean" not in self.manifest:
            raise ValidationError("archive has no mean payload")
        mean = self.manifest["mean"]
        return self._read_blob(mean["file"], mean["checksum"])


def write_sample(writer, z, data):
    return writer.add_sample(z, data)


def read_sample(archive, k):
    if not isinstance(archive, SampleArchive):
        archive = SampleArchive(archive)
    return archive.read_sample(k)


def read_mean(archive):
    if not isinstance(archive, SampleArchive):
        archive = SampleArchive(archive)
    return archive.read_mean()


def validate_archive(archive):
    """Checksum and shape-check every payload; returns a summary dict."""
    if not isinstance(archive, SampleArchive):
        archive = SampleArchive(archive)
    shapes = None
    for k in range(archive.n_samples):
        _, data = archive.read_sample(k)
        these = tuple(data[q].shape for q in archive.quantities)
        if shapes is None:
            shapes = these
        elif these != shapes:
            raise ValidationError(f"sample {k} shapes {these} differ from {shapes}")
    has_mean = "mean" in archive.manifest
    if has_mean:
        mean = archive.read_mean()
        these = tuple(mean[q].shape for q in archive.quantities)
        if shapes is not None and these != shapes:
            raise ValidationError(f"mean shapes {these} differ from samples {shapes}")
    return {"n_samples": archive.n_samples, "mean": has_mean,
            "quantities": list(archive.quantities)}


def validate_pairing(archive_a, archive_b):
    """Check two archives hold the same draws in the same order.

    This is the estimator's precondition: the k-th high-fidelity sample
    and the k-th surrogate sample must come from the same z.  Raises
    with the first offending index; symmetric in its arguments.
    """
    if not isinstance(archive_a, SampleArchive):
        archive_a = SampleArchive(archive_a)
    if not isinstance(archive_b, SampleArchive):
        archive_b = SampleArchive(archive_b)
    na, nb = archive_a.n_samples, archive_b.n_samples
    if na != nb:
        raise ValidationError(f"sample counts differ ({na} vs {nb})")
    for k in range(na):
        za, zb = archive_a.z_of(k), archive_b.z_of(k)
        if za.shape != zb.shape or not np.array_equal(za, zb):
            raise ValidationError(f"pairing mismatch at sample {k}")
    return na
