"""Experiment orchestration: sample sweeps, calibration, estimation.

Each piece is a plain function over archives so the command line stays
a flag parser: ``sweep`` runs a model over parameter draws and writes
a SampleArchive (optionally with a large-draw control-variate mean),
``estimate`` applies the control-variate estimator to paired archives
and writes a report directory, ``calibrate_archive`` fits the
collision frequency to snapshots stored in an archive, and ``report``
merges error tables.  Determinism: one integer seed fixes the draw
sequence, so equal configs give byte-identical archives.
"""

import csv
import dataclasses
import json
from pathlib import Path

import numpy as np

from . import __version__
from .archive import ArchiveWriter, SampleArchive, pack_array, validate_pairing
from .calibrate import calibrate_mu
from .collision import SpectralPlan
from .errors import ValidationError
from .fields import PhaseGrid, draw_parameters
from .models import random_space, run_model
from .vrmc import (aggregate_covariances, estimate_covariances, l1_error,
                   optimal_weights, vrmc_estimate)

_MEAN_SEED_OFFSET = 1000003


def _grid_meta(grid):
    return {
        "dv_dims": grid.dv_dims, "v_nodes_per_dim": grid.v_nodes_per_dim,
        "v_bound": grid.v_bound, "dx_dims": grid.dx_dims,
        "x_nodes": grid.x_nodes, "x_bounds": list(grid.x_bounds),
        "x_periodic": grid.x_periodic,
    }


def _run_meta(run, seed):
    space = random_space(run.ic)
    return {
        "model": run.model, "grid": _grid_meta(run.grid),
        "epsilon": run.epsilon, "mu": run.mu, "tableau": run.tableau,
        "t_final": run.t_final, "output_times": list(run.output_times),
        "dt": run.dt, "cfl": run.cfl, "beta": run.beta,
        "field_coupling": run.field_coupling,
        "ic": {"id": run.ic.id, "params": dict(run.ic.params)},
        "random_space": [list(b) for b in space.bounds],
        "producer_version": __version__, "seed": int(seed),
    }


def _quantities_of(traj, model):
    out_times = np.asarray(traj.out_times, dtype=np.float64)[:, None]
    moments = np.stack([m.as_array() for m in traj.moments])
    conserved = np.column_stack([
        np.asarray(traj.times), np.asarray(traj.mass),
        np.asarray(traj.momentum), np.asarray(traj.energy),
        np.asarray(traj.entropy)])
    data = {"out_times": out_times, "moments": moments,
            "conserved": conserved}
    if traj.efields:
        data["efield"] = np.stack([np.atleast_1d(np.asarray(e, dtype=np.float64))
                                   for e in traj.efields])
    if model != "EP":
        data["f"] = np.stack([f.values for f in traj.fields])
    if traj.zeta is not None:
        data["zeta"] = np.column_stack([np.asarray(traj.times),
                                        np.asarray(traj.zeta)])
    return data


def sweep(run, samples, seed, out_root, mean_draws=None, mean_seed=None):
    """Run ``samples`` parameter draws of one model into an archive.

    The k-th draw comes from a fresh generator seeded with ``seed``, so
    two sweeps with equal seeds produce pairable archives regardless of
    model.  With ``mean_draws`` set, a second (independently seeded)
    batch is averaged into the archive's control-variate mean record.
    """
    if samples < 1:
        raise ValidationError("need at least one sample")
    space = random_space(run.ic)
    draws = draw_parameters(dataclasses.replace(space, seed=int(seed)), samples)

    writer = None
    for z in draws:
        traj = run_model(dataclasses.replace(run, z=z))
        data = _quantities_of(traj, run.model)
        if writer is None:
            writer = ArchiveWriter(out_root, _run_meta(run, seed), sorted(data))
        writer.add_sample(z, data)

    if mean_draws:
        if mean_seed is None:
            mean_seed = seed + _MEAN_SEED_OFFSET
        mean_zs = draw_parameters(
            dataclasses.replace(space, seed=int(mean_seed)), int(mean_draws))
        acc = None
        for z in mean_zs:
            traj = run_model(dataclasses.replace(run, z=z))
            data = _quantities_of(traj, run.model)
            if acc is None:
                acc = {q: np.array(v, dtype=np.float64) for q, v in data.items()}
            else:
                for q in acc:
                    acc[q] += data[q]
        for q in acc:
            acc[q] /= float(mean_draws)
        writer.write_mean(acc, mean_draws, mean_seed)
    return writer.finalize()


def _stack_samples(archive, quantity):
    if quantity not in archive.quantities:
        raise ValidationError(
            f"archive at {archive.root} has no quantity {quantity!r}")
    return np.stack([archive.read_sample(k)[1][quantity]
                     for k in range(archive.n_samples)])


def _cell_of(meta):
    g = meta["grid"]
    cell = (2.0 * g["v_bound"] / g["v_nodes_per_dim"]) ** g["dv_dims"]
    if g["dx_dims"]:
        lo, hi = g["x_bounds"]
        cell *= (hi - lo) / g["x_nodes"]
    return cell


def estimate(high_root, low_roots, out_dir, mode=None, reference=None,
             quantity="f"):
    """Control-variate estimation from paired archives; writes a report.

    mode is "pointwise" (a weight field per grid point) or "global"
    (one scalar weight per surrogate, from cell-integrated covariances);
    default follows the sample count: global for K <= 15.  An optional
    ``reference`` archive (dense independent run) adds an L1-error
    table comparing the plain-MC and variance-reduced estimates.
    """
    high = SampleArchive(high_root)
    lows = [SampleArchive(r) for r in low_roots]
    if not lows:
        raise ValidationError("need at least one surrogate archive")
    for low in lows:
        validate_pairing(high, low)

    f_high = _stack_samples(high, quantity)
    f_lows = np.stack([_stack_samples(low, quantity) for low in lows])
    means = np.stack([low.read_mean()[quantity] for low in lows])
    k_samples = f_high.shape[0]
    if mode is None:
        mode = "global" if k_samples <= 15 else "pointwise"
    if mode not in ("pointwise", "global"):
        raise ValidationError(f"unknown estimator mode {mode!r}")

    cell = _cell_of(high.manifest)
    out_times = high.read_sample(0)[1]["out_times"][:, 0]
    n_out = out_times.size

    rows, est_blocks, mc_blocks = [], [], []
    ref_mean = None
    if reference is not None:
        ref = SampleArchive(reference)
        try:
            ref_mean = ref.read_mean()[quantity]
        except ValidationError:
            ref_mean = _stack_samples(ref, quantity).mean(axis=0)

    lam_report = []
    for j in range(n_out):
        b, c = estimate_covariances(f_high[:, j], f_lows[:, :, j])
        if mode == "global":
            b, c = aggregate_covariances(b, c, cell)
        weights = optimal_weights(b, c)
        result = vrmc_estimate(f_high[:, j], f_lows[:, :, j],
                               means[:, j], weights)
        est_blocks.append(result.estimate)
        mc_blocks.append(result.mc_estimate)
        lam = np.asarray(weights.lam, dtype=np.float64)
        lam_mean = lam.reshape(-1, lam.shape[-1]).mean(axis=0)
        lam_report.append(lam_mean.tolist())
        row = {"t": float(out_times[j]),
               "var_mc": float(np.sum(result.var_mc) * cell),
               "var_vrmc": float(np.sum(result.var_vrmc) * cell)}
        if ref_mean is not None:
            row["err_mc"] = l1_error(result.mc_estimate, ref_mean[j], cell)
            row["err_vrmc"] = l1_error(result.estimate, ref_mean[j], cell)
        rows.append(row)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    blob = pack_array(np.stack(est_blocks)) + pack_array(np.stack(mc_blocks))
    (out_dir / "estimate.bin").write_bytes(blob)
    _write_csv(out_dir / "errors.csv", rows)
    report = {
        "quantity": quantity, "mode": mode, "n_high": k_samples,
        "n_low": [low.manifest.get("mean", {}).get("n_draws") for low in lows],
        "surrogates": [str(r) for r in low_roots],
        "out_times": out_times.tolist(), "mean_weights": lam_report,
        "rows": rows, "producer_version": __version__,
    }
    (out_dir / "report.json").write_text(json.dumps(report, indent=1))
    return report


def calibrate_archive(dataset_root, mu_grid=None, norm="L1", out_path=None):
    """Fit the collision frequency to the f-snapshots of an archive.

    Emits the (1/mu, error) scan as a two-column CSV when ``out_path``
    is given; returns (mu_star, curve, mu_grid).
    """
    arc = SampleArchive(dataset_root)
    g = arc.manifest["grid"]
    grid = PhaseGrid(g["dv_dims"], g["v_nodes_per_dim"], g["v_bound"])
    slices = _stack_samples(arc, "f")
    dataset = [slices.reshape((-1,) + tuple(slices.shape[-2:]))]
    plan = SpectralPlan(grid)
    mu_star, curve = calibrate_mu(dataset, plan, norm=norm, mu_grid=mu_grid)
    if mu_grid is None:
        from .calibrate import default_mu_grid
        mu_grid = default_mu_grid()
    mu_grid = np.asarray(mu_grid, dtype=np.float64)
    if out_path is not None:
        rows = [{"inv_mu": 1.0 / m, "error": e}
                for m, e in zip(mu_grid, curve)]
        _write_csv(out_path, rows)
    return mu_star, curve, mu_grid


def merge_reports(inputs, out_path):
    """Merge estimate reports into one long-format error table."""
    rows = []
    for path in inputs:
        rep = json.loads(Path(path, "report.json").read_text()
                         if Path(path).is_dir() else Path(path).read_text())
        label = rep.get("label", Path(path).name)
        for row in rep["rows"]:
            merged = {"source": label}
            merged.update(row)
            rows.append(merged)
    _write_csv(out_path, rows)
    return rows


def _write_csv(path, rows):
    if not rows:
        raise ValidationError("no rows to write")
    keys = list(rows[0])
    for row in rows[1:]:
        for k in row:
            if k not in keys:
                keys.append(k)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=keys)
        writer.writeheader()
        writer.writerows(rows)
