"""A walk through the on-disk sample archive format.

A tiny sweep is written to disk, then taken apart: the manifest, the
array-block headers inside a sample file, checksum verification, and
the draw-pairing check between two archives.  Finally one byte is
flipped to show the validator catching the corruption.
"""

import json
import pathlib
import shutil
import struct

import numpy as np

from kinuq.archive import SampleArchive, unpack_array, validate_archive, validate_pairing
from kinuq.fields import PhaseGrid
from kinuq.harness import sweep
from kinuq.models import InitialCondition, ModelRun

root = pathlib.Path(__file__).parent / "tour_archives"
if root.exists():
    shutil.rmtree(root)

grid = PhaseGrid(v_nodes_per_dim=16)
base = dict(grid=grid, ic=InitialCondition("two_bubble"), epsilon=1.0,
            t_final=0.2, dt=0.02, output_times=(0.1, 0.2))
sweep(ModelRun(model="HOM_LANDAU", **base), samples=3, seed=11,
      out_root=root / "a")
sweep(ModelRun(model="HOM_FP", **base), samples=3, seed=11,
      out_root=root / "b")

# The manifest names the quantities and carries one checksum per blob
manifest = json.loads((root / "a" / "manifest.json").read_text())
print("manifest keys:", sorted(manifest))
print("quantities (block order):", manifest["quantities"])
print("sample 0 entry:", manifest["samples"][0])

# Each sample file is a bare concatenation of array blocks:
# 32-byte header (magic, rank, dims, zero padding) + float64 payload
blob = (root / "a" / "sample_0.bin").read_bytes()
offset = 0
print("\nblocks inside sample_0.bin:")
for name in manifest["quantities"]:
    magic = blob[offset:offset + 4].decode()
    rank = struct.unpack_from("<I", blob, offset + 4)[0]
    dims = struct.unpack_from(f"<{rank}I", blob, offset + 8)
    arr, offset = unpack_array(blob, offset)
    print(f"  {name:10s} magic={magic} rank={rank} dims={dims}"
          f"  -> array {arr.shape}, ends at byte {offset}")
print(f"file size {len(blob)} bytes, blocks cover {offset}")

arc_a = SampleArchive(root / "a")
arc_b = SampleArchive(root / "b")
print("\nvalidation:", validate_archive(arc_a))
print("pairing (same seed, different model):",
      validate_pairing(arc_a, arc_b), "samples pair up")

z0, data0 = arc_a.read_sample(0)
print("sample 0 draw z =", z0, " f block shape", data0["f"].shape)

# Flip one payload byte: the checksum recorded in the manifest catches it
corrupt = bytearray(blob)
corrupt[40] ^= 0xFF
(root / "a" / "sample_0.bin").write_bytes(bytes(corrupt))
try:
    SampleArchive(root / "a").read_sample(0)
except Exception as err:
    print("\ncorrupted byte detected:", err)
