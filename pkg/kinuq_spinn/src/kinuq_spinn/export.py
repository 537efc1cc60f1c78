"""Export trained-surrogate evaluations as a sample archive.

The archive pairs with a solver-produced one sample-for-sample: the
k-th exported record is the surrogate's density at exactly the k-th
parameter draw z of the paired archive, and ``mean.bin`` holds the
surrogate's density averaged over a fresh stream of draws, which is
the control-variate center a variance-reduced estimator needs.  Only
bytes cross the package boundary.
"""

import numpy as np
import torch

from .archive import ArchiveWriter
from .model import FieldBatch
from .nets import DTYPE


def _density(model, z_nodes, out_times, x):
    batch = FieldBatch(model, [z_nodes, out_times, x])
    return batch.conserved()[0]


def export_surrogate_samples(model, root, zs, out_times, x, mean_draws=0,
                             mean_seed=0, meta=None, chunk=256):
    """Write one density record per row of ``zs`` plus a mean record.

    ``out_times`` and ``x`` fix the evaluation grid; densities are
    stored as (n_times, n_x) blocks alongside an ``out_times`` column
    so the files are self-describing.  ``mean_draws`` fresh uniform
    draws from the model's z bounds (seeded with ``mean_seed``) are
    averaged in chunks for the mean record.  Each z is recorded in the
    manifest exactly as given, which is what pairing validation
    compares bit for bit.
    """
    if model.dx_dims != 1:
        raise ValueError("exporting serves spatial models only")
    if model.z_dims != 1:
        raise ValueError("exporting expects one parameter-draw dimension")
    zs = np.asarray(zs, dtype=np.float64)
    if zs.ndim == 1:
        zs = zs[:, None]
    if zs.ndim != 2 or zs.shape[1] != model.z_dims:
        raise ValueError(f"draw matrix must be (n, {model.z_dims})")
    out_times = np.asarray(out_times, dtype=np.float64).reshape(-1)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    t_nodes = torch.as_tensor(out_times, dtype=DTYPE)
    x_nodes = torch.as_tensor(x, dtype=DTYPE)

    writer = ArchiveWriter(root, meta or {}, ["density", "out_times"])
    times_col = out_times[:, None]
    with torch.no_grad():
        z_batch = torch.as_tensor(zs[:, 0], dtype=DTYPE)
        dens = _density(model, z_batch, t_nodes, x_nodes).numpy()
        for k in range(zs.shape[0]):
            writer.add_sample(zs[k],
                              {"density": dens[k], "out_times": times_col})
        if mean_draws:
            lo, hi = model.spatial_bounds[0]
            rng = np.random.default_rng(mean_seed)
            draws = rng.uniform(lo, hi, size=mean_draws)
            total = np.zeros((out_times.size, x.size))
            for start in range(0, mean_draws, chunk):
                part = torch.as_tensor(draws[start:start + chunk], dtype=DTYPE)
                total += _density(model, part, t_nodes, x_nodes).numpy() \
                    .sum(axis=0)
            writer.write_mean(
                {"density": total / mean_draws, "out_times": times_col},
                n_draws=mean_draws, seed=mean_seed)
    return writer.finalize()
