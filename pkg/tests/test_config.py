"""TOML run configs: parsing, key checking, and run assembly."""

import numpy as np
import pytest

from kinuq.config import build_run, load_config
from kinuq.errors import ValidationError

FULL = """
[grid]
v_nodes_per_dim = 48
v_bound = 7.5
x_nodes = 33

[run]
model = "VPFP"
epsilon = 0.01
mu = 2.0
t_final = 0.5
output_times = [0.25, 0.5]
dt = 0.005
samples = 4
seed = 11
mean_draws = 16

[ic]
id = "linear_ld"
alpha = 0.02

[poisson]
bc = "periodic"
"""


def write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadConfig:
    def test_full_round_trip(self, tmp_path):
        cfg = load_config(write(tmp_path, FULL))
        assert cfg["grid"] == {"v_nodes_per_dim": 48, "v_bound": 7.5,
                               "x_nodes": 33}
        assert cfg["run"]["model"] == "VPFP"
        assert cfg["run"]["epsilon"] == 0.01
        assert cfg["run"]["output_times"] == (0.25, 0.5)
        assert cfg["run"]["samples"] == 4
        assert cfg["ic"] == {"id": "linear_ld", "alpha": 0.02}
        assert cfg["poisson"] == {"bc": "periodic"}

    def test_empty_config(self, tmp_path):
        cfg = load_config(write(tmp_path, ""))
        assert cfg == {"grid": {}, "run": {}, "ic": {}, "poisson": {}}

    def test_unknown_section_rejected(self, tmp_path):
        path = write(tmp_path, "[solver]\nx = 1\n")
        with pytest.raises(ValidationError, match="solver"):
            load_config(path)

    def test_unknown_key_reported_with_path(self, tmp_path):
        path = write(tmp_path, "[grid]\nv_nods = 32\n")
        with pytest.raises(ValidationError, match="grid.v_nods"):
            load_config(path)
        path = write(tmp_path, "[run]\ntimestep = 0.1\n")
        with pytest.raises(ValidationError, match="run.timestep"):
            load_config(path)
        path = write(tmp_path, "[poisson]\nmode = \"x\"\n")
        with pytest.raises(ValidationError, match="poisson.mode"):
            load_config(path)

    def test_type_coercion_errors(self, tmp_path):
        path = write(tmp_path, "[run]\nepsilon = \"small\"\n")
        with pytest.raises(ValidationError, match="run.epsilon"):
            load_config(path)
        # booleans must be TOML booleans, not truthy stand-ins
        path = write(tmp_path, "[run]\nfield_coupling = 1\n")
        with pytest.raises(ValidationError, match="field_coupling"):
            load_config(path)

    def test_ic_id_must_be_string(self, tmp_path):
        path = write(tmp_path, "[ic]\nid = 3\n")
        with pytest.raises(ValidationError, match="ic.id"):
            load_config(path)


class TestBuildRun:
    def test_full_assembly(self, tmp_path):
        cfg = load_config(write(tmp_path, FULL))
        run = build_run(cfg)
        assert run.model == "VPFP"
        assert run.ic.id == "linear_ld"
        assert run.ic.params == {"alpha": 0.02}
        assert run.epsilon == 0.01
        assert run.dt == 0.005
        np.testing.assert_allclose(run.output_times, (0.25, 0.5))
        assert run.grid.x_nodes == 33
        assert run.grid.v_nodes_per_dim == 48
        # spatial grid picks up the catalogue bounds for the ic
        np.testing.assert_allclose(run.grid.x_bounds, (0.0, 4 * np.pi))

    def test_cli_settings_override_config(self, tmp_path):
        cfg = load_config(write(tmp_path, FULL))
        run = build_run(cfg, model="VPL", ic_id="nonlinear_ld",
                        overrides={"epsilon": 5.0})
        assert run.model == "VPL"
        assert run.ic.id == "nonlinear_ld"
        assert run.ic.params == {"alpha": 0.02}
        assert run.epsilon == 5.0
        assert run.mu == 2.0  # untouched keys survive

    def test_missing_model_or_ic(self, tmp_path):
        cfg = load_config(write(tmp_path, "[run]\nepsilon = 1.0\n"))
        with pytest.raises(ValidationError, match="model"):
            build_run(cfg, ic_id="two_bubble")
        cfg = load_config(write(tmp_path, "[run]\nmodel = \"HOM_FP\"\n"))
        with pytest.raises(ValidationError, match="initial condition"):
            build_run(cfg)

    def test_homogeneous_models_drop_space_keys(self, tmp_path):
        text = "[grid]\nx_nodes = 65\ndx_dims = 1\n"
        cfg = load_config(write(tmp_path, text))
        run = build_run(cfg, model="HOM_FP", ic_id="two_bubble")
        assert run.grid.dx_dims == 0
        assert run.grid.x_nodes == 1

    def test_spatial_defaults(self, tmp_path):
        cfg = load_config(write(tmp_path, ""))
        run = build_run(cfg, model="VPFP", ic_id="two_stream")
        assert run.grid.dx_dims == 1
        assert run.grid.x_nodes == 65
        np.testing.assert_allclose(run.grid.x_bounds, (0.0, 13 * np.pi))

    def test_sweep_keys_do_not_leak_into_the_run(self, tmp_path):
        text = "[run]\nsamples = 8\nseed = 3\nmean_draws = 100\n"
        cfg = load_config(write(tmp_path, text))
        run = build_run(cfg, model="HOM_FP", ic_id="two_bubble")
        assert not hasattr(run, "samples")
        assert cfg["run"]["samples"] == 8  # still available to the caller
