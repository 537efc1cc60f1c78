"""Collision-frequency calibration and trajectory discrepancy.

The drift-diffusion surrogate mu * P(f) is fitted to the quadratic
operator Q(f,f) by a grid scan over the frequency mu: the objective is
the dataset-mean norm of the residual mu P(f) - Q(f,f).  A scan (rather
than a smooth optimizer) keeps the objective assumption-free -- it is
cheap, one-dimensional, and piecewise smooth at worst.  The companion
diagnostic compares two recorded trajectories snapshot by snapshot.
"""

import numpy as np

from .collision import _velocity_only_grid, fp_p, landau_q
from .errors import ValidationError
from .fields import DistField, moments_of


def _as_slices(dataset, grid):
    """Normalize dataset entries to stacked velocity slices (n, Nv, Nv)."""
    slices = []
    for entry in dataset:
        vals = entry.values if isinstance(entry, DistField) else np.asarray(entry, dtype=np.float64)
        if vals.shape == grid.vshape:
            vals = vals[None]
        if vals.ndim != grid.dv_dims + 1 or vals.shape[1:] != grid.vshape:
            raise ValidationError(
                f"dataset entry shape {vals.shape} does not match velocity grid {grid.vshape}")
        slices.append(vals)
    if not slices:
        raise ValidationError("calibration dataset is empty")
    return np.concatenate(slices, axis=0)


def _norm_of(vals, grid, norm):
    if norm == "L1":
        return np.abs(vals).sum(axis=tuple(range(1, vals.ndim))) * grid.dv**grid.dv_dims
    if norm == "Linf":
        return np.abs(vals).max(axis=tuple(range(1, vals.ndim)))
    raise ValidationError(f"unknown norm {norm!r} (expected 'L1' or 'Linf')")


def calibrate_mu(dataset, plan, norm="L1", mu_grid=None, reference=None):
    """Scan mu candidates for the best fit of mu P(f) to Q(f,f).

    dataset is a sequence of velocity slices (arrays or DistFields on
    plan's grid).  For each slice the target Q(f,f) and the unit-
    frequency tendency P(f) are evaluated once; the returned curve is
    the dataset-mean ``norm`` of mu P - Q per candidate, and mu_star
    the candidate minimizing it (ties broken toward the smallest mu).
    ``reference`` overrides the per-slice target, for synthetic
    self-tests where the "Q" data come from elsewhere.
    """
    grid = plan.grid
    if mu_grid is None:
        mu_grid = default_mu_grid()
    mu_grid = np.asarray(mu_grid, dtype=np.float64)
    if mu_grid.size == 0 or np.any(mu_grid <= 0):
        raise ValidationError("mu candidates must be positive and non-empty")
    slices = _as_slices(dataset, grid)
    if slices.shape[0] == 0:
        raise ValidationError("calibration dataset is empty")
    m = moments_of(DistField(_velocity_only_grid(grid, slices.shape[0]), slices))
    if reference is None:
        target = landau_q(slices, plan, m)
    else:
        target = _as_slices(reference, grid)
        if target.shape != slices.shape:
            raise ValidationError("reference tendencies do not pair with the dataset")
    p = fp_p(slices, m, grid)

    curve = np.empty(mu_grid.size)
    for i, mu in enumerate(mu_grid):
        curve[i] = _norm_of(mu * p - target, grid, norm).mean()
    best = np.flatnonzero(curve <= curve.min() * (1.0 + 1e-12))
    mu_star = float(np.min(mu_grid[best]))
    return mu_star, curve


def default_mu_grid():
    """Candidate frequencies bracketing the operator-magnitude ratio.

    Q is quadratic in f while P is linear, so the minimizing frequency
    scales with density and temperature and lands well above or below
    one depending on the regime; a geometric sweep over four decades
    keeps the scan dataset-agnostic.
    """
    return np.geomspace(0.025, 40.0, 65)


def model_discrepancy(traj_a, traj_b, norm="L1"):
    """Per-output-time norm of the difference of two recorded runs.

    Requires matched grids and output times; returns an array aligned
    with the common output times.
    """
    ga, gb = traj_a.grid, traj_b.grid
    if ga.shape != gb.shape or abs(ga.dv - gb.dv) > 1e-12:
        raise ValidationError("trajectories live on different grids")
    ta, tb = np.asarray(traj_a.out_times), np.asarray(traj_b.out_times)
    if ta.shape != tb.shape or not np.allclose(ta, tb, atol=1e-12):
        raise ValidationError("trajectories have different output times")
    if not traj_a.fields or not traj_b.fields:
        raise ValidationError("trajectory carries no field snapshots")
    out = np.empty(ta.size)
    for i, (fa, fb) in enumerate(zip(traj_a.fields, traj_b.fields)):
        diff = fa.values - fb.values
        if norm == "L1":
            w = ga.dv**ga.dv_dims * (ga.dx if ga.dx_dims else 1.0)
            out[i] = np.abs(diff).sum() * w
        elif norm == "Linf":
            out[i] = np.abs(diff).max()
        else:
            raise ValidationError(f"unknown norm {norm!r} (expected 'L1' or 'Linf')")
    return out
