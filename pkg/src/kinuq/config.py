"""Run-configuration files: TOML sections mirroring the run description.

A config has up to four tables -- ``grid``, ``run``, ``ic``, ``poisson``
-- whose keys map one-to-one onto PhaseGrid, ModelRun, InitialCondition
and PoissonConfig fields.  Unknown keys raise with their full path so a
typo never silently falls back to a default; everything is optional
except what the caller's command line must supply (model, ic id).
"""

try:
    import tomllib
except ModuleNotFoundError:  # 3.10: stdlib tomllib arrived in 3.11
    import tomli as tomllib

import numpy as np

from .errors import ValidationError
from .fields import PhaseGrid
from .models import InitialCondition, ModelRun, default_x_bounds
from .transport import PoissonConfig

_GRID_KEYS = {
    "dv_dims": int, "v_nodes_per_dim": int, "v_bound": float,
    "dx_dims": int, "x_nodes": int, "x_bounds": tuple, "x_periodic": bool,
}
_RUN_KEYS = {
    "model": str, "epsilon": float, "mu": float, "tableau": str,
    "t_final": float, "output_times": tuple, "dt": float, "cfl": float,
    "beta": float, "field_coupling": bool, "samples": int, "seed": int,
    "mean_draws": int,
}
_IC_KEYS = None  # free-form: validated by InitialCondition itself
_POISSON_KEYS = {"bc": str, "phi_bounds": tuple}


def _check_keys(table, allowed, path):
    for key in table:
        if key not in allowed:
            raise ValidationError(f"unknown config key {path}.{key}")


def _coerce(value, kind, path):
    try:
        if kind is tuple:
            return tuple(float(v) for v in value)
        if kind is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        return kind(value)
    except (TypeError, ValueError):
        raise ValidationError(f"config key {path} has unusable value {value!r}")


def load_config(path):
    """Parse and key-check a TOML config; returns nested plain dicts."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    for section in raw:
        if section not in ("grid", "run", "ic", "poisson"):
            raise ValidationError(f"unknown config section [{section}]")
    out = {"grid": {}, "run": {}, "ic": dict(raw.get("ic", {})), "poisson": {}}
    grid = raw.get("grid", {})
    _check_keys(grid, _GRID_KEYS, "grid")
    for k, v in grid.items():
        out["grid"][k] = _coerce(v, _GRID_KEYS[k], f"grid.{k}")
    run = raw.get("run", {})
    _check_keys(run, _RUN_KEYS, "run")
    for k, v in run.items():
        out["run"][k] = _coerce(v, _RUN_KEYS[k], f"run.{k}")
    poisson = raw.get("poisson", {})
    _check_keys(poisson, _POISSON_KEYS, "poisson")
    for k, v in poisson.items():
        out["poisson"][k] = _coerce(v, _POISSON_KEYS[k], f"poisson.{k}")
    if "id" in out["ic"] and not isinstance(out["ic"]["id"], str):
        raise ValidationError("ic.id must be a string")
    return out


def build_run(cfg, model=None, ic_id=None, z=(), overrides=None):
    """Assemble a ModelRun from a parsed config plus CLI-level settings.

    ``model`` and ``ic_id`` override the config when given (the CLI
    requires them explicitly); ``overrides`` patches run-table keys.
    """
    run_tab = dict(cfg.get("run", {}))
    run_tab.pop("samples", None)
    run_tab.pop("seed", None)
    run_tab.pop("mean_draws", None)
    if overrides:
        run_tab.update(overrides)
    model = model or run_tab.pop("model", None)
    run_tab.pop("model", None)
    if model is None:
        raise ValidationError("no model given (config run.model or --model)")

    ic_tab = dict(cfg.get("ic", {}))
    ic_id = ic_id or ic_tab.pop("id", None)
    ic_tab.pop("id", None)
    if ic_id is None:
        raise ValidationError("no initial condition given (config ic.id or --ic)")
    ic = InitialCondition(ic_id, ic_tab)

    grid_tab = dict(cfg.get("grid", {}))
    hom = model in ("HOM_LANDAU", "HOM_FP")
    if hom:
        grid_tab.pop("dx_dims", None)
        grid_tab.pop("x_nodes", None)
        grid_tab.pop("x_bounds", None)
        grid_tab.pop("x_periodic", None)
    else:
        grid_tab.setdefault("dx_dims", 1)
        grid_tab.setdefault("x_nodes", 65)
        grid_tab.setdefault("x_bounds", default_x_bounds(ic_id))
    grid = PhaseGrid(**grid_tab)

    poisson = PoissonConfig(**cfg.get("poisson", {}))
    if "output_times" in run_tab:
        run_tab["output_times"] = tuple(np.asarray(run_tab["output_times"], dtype=np.float64))
    return ModelRun(model=model, grid=grid, ic=ic, z=z, poisson=poisson, **run_tab)
