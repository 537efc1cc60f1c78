"""End-to-end acceptance gate.

One test per headline guarantee, in order: invariant conservation,
entropy monotonicity, equilibrium annihilation, the fluid limit, the
damping rate against an independent dispersion oracle, optimality of
the control-variate weights, weight telescoping on relaxation data,
the full variance-reduction pipeline at production sample counts,
calibration self-consistency, and the archive contract.  Each test
prints its measured numbers so a -v run doubles as the summary table.
"""

import dataclasses
import time

import numpy as np
import pytest
from scipy.special import wofz

from kinuq.archive import (
    ArchiveWriter,
    SampleArchive,
    pack_array,
    unpack_array,
    validate_pairing,
)
from kinuq.calibrate import calibrate_mu, default_mu_grid
from kinuq.collision import SpectralPlan, fp_p, landau_q
from kinuq.errors import ValidationError
from kinuq.fields import (
    MomentSet,
    PhaseGrid,
    draw_parameters,
    maxwellian_eval,
    moments_of,
)
from kinuq.harness import estimate, sweep
from kinuq.models import (
    InitialCondition,
    ModelRun,
    default_x_bounds,
    initial_condition_eval,
    random_space,
    run_model,
)
from kinuq.vrmc import (
    aggregate_covariances,
    estimate_covariances,
    optimal_weights,
)

EPS_RANGE = (1e-4, 1.0, 1e6)
BUBBLE_Z = np.array([0.3, 0.25])


def hom_grid(nv=32):
    return PhaseGrid(v_nodes_per_dim=nv)


def relaxation_run(model, grid, **kw):
    base = dict(model=model, grid=grid, ic=InitialCondition("two_bubble"),
                z=BUBBLE_Z, epsilon=1.0, t_final=2.0, dt=0.01)
    base.update(kw)
    return ModelRun(**base)


@pytest.fixture(scope="module")
def relaxation_calibration():
    """mu scan over two-bubble relaxation snapshots (t = 0, .5, 1, 2)."""
    grid = hom_grid()
    traj = run_model(relaxation_run("HOM_LANDAU", grid, z=np.array([0.0, 0.0]),
                                    dt=0.02, output_times=(0.0, 0.5, 1.0, 2.0)))
    dataset = [f.values for f in traj.fields]
    mu_star, curve = calibrate_mu(dataset, SpectralPlan(grid))
    return mu_star, curve


def test_01_conservation_over_the_relaxation_suite():
    """Both collision models, homogeneous and spatially coupled, hold
    mass/momentum/energy at every step across the stiffness range."""
    t0 = time.monotonic()
    grid = hom_grid()
    worst = {"mass": 0.0, "mom": 0.0, "energy": 0.0}

    def track(traj, label):
        mass = np.max(np.abs(traj.mass - traj.mass[0])) / abs(traj.mass[0])
        mom = np.max(np.abs(traj.momentum - traj.momentum[0]))
        en = np.max(np.abs(traj.energy - traj.energy[0]))
        worst["mass"] = max(worst["mass"], mass)
        worst["mom"] = max(worst["mom"], mom)
        worst["energy"] = max(worst["energy"], en)
        assert mass < 1e-10, (label, mass)
        assert mom < 1e-8, (label, mom)
        assert en < 1e-8, (label, en)

    for model in ("HOM_LANDAU", "HOM_FP"):
        for eps in EPS_RANGE:
            traj = run_model(relaxation_run(model, grid, epsilon=eps))
            track(traj, (model, eps))

    # the same data on the spatial solvers: uniform density keeps the
    # field quiescent while transport and coupling code paths run
    f0 = initial_condition_eval(InitialCondition("two_bubble"), BUBBLE_Z,
                                grid)
    sgrid = PhaseGrid(dx_dims=1, x_nodes=17, x_bounds=(0.0, 4 * np.pi),
                      v_nodes_per_dim=32)
    table = InitialCondition("table", {"values": f0.values[0]})
    for model in ("VPL", "VPFP"):
        for eps in EPS_RANGE:
            run = ModelRun(model=model, grid=sgrid, ic=table, epsilon=eps,
                           t_final=2.0)
            track(run_model(run), (model, eps))

    wall = time.monotonic() - t0
    print(f"\n  worst drifts: mass {worst['mass']:.2e} rel, "
          f"momentum {worst['mom']:.2e}, energy {worst['energy']:.2e}; "
          f"12 runs in {wall:.0f} s")
    assert wall < 600.0


def test_02_entropy_never_decreases_during_relaxation():
    grid = hom_grid()
    slack = 1e-8
    dips = []
    for model in ("HOM_LANDAU", "HOM_FP"):
        traj = run_model(relaxation_run(model, grid))
        ds = np.diff(traj.entropy)
        dips.append(float(np.min(ds)))
        assert np.min(ds) > -slack, model
    print(f"\n  smallest per-step entropy increments: "
          f"{dips[0]:.2e} (quadratic), {dips[1]:.2e} (drift-diffusion)")


def test_03_equilibria_are_annihilated():
    """The quadratic operator kills the Maxwellian of the damping runs;
    the drift-diffusion operator kills the relaxation-endpoint
    Maxwellian at second order in the grid."""
    g32 = hom_grid(32)
    q = landau_q(maxwellian_eval(MomentSet.from_primitive(1.0, (0.0, 0.0),
                                                          1.0), g32),
                 SpectralPlan(g32))
    q_err = np.max(np.abs(q))
    assert q_err < 1e-6

    errs = []
    for nv in (32, 64):
        g = hom_grid(nv)
        m = MomentSet.from_primitive(0.75, (0.0, 0.0), 2.125)
        p = fp_p(maxwellian_eval(m, g), m)
        errs.append(np.max(np.abs(p)))
    ratio = errs[0] / errs[1]
    print(f"\n  |Q(M)| = {q_err:.2e}; |P(M)| = {errs[0]:.2e} -> "
          f"{errs[1]:.2e}, ratio {ratio:.2f}")
    assert errs[0] < 1e-3
    assert 3.0 < ratio < 5.0


def test_04_collisional_runs_approach_the_fluid_limit_monotonically():
    """Moment distance between the collisional kinetic run and the
    fluid solver shrinks as epsilon does.  The distances saturate near
    the velocity-resolution floor of the drift-diffusion equilibrium,
    so only the ordering is asserted, not the magnitudes."""
    grid = PhaseGrid(dx_dims=1, x_nodes=65,
                     x_bounds=default_x_bounds("linear_ld"),
                     v_nodes_per_dim=32)
    z = np.array([0.0])
    ep = run_model(ModelRun(model="EP", grid=grid,
                            ic=InitialCondition("linear_ld"), z=z,
                            t_final=1.0, dt=0.008, output_times=(1.0,)))
    m_ep = ep.moments[-1].as_array()
    dists = []
    for eps in (1e-2, 1e-3, 1e-4):
        traj = run_model(ModelRun(model="VPFP", grid=grid,
                                  ic=InitialCondition("linear_ld"), z=z,
                                  epsilon=eps, t_final=1.0,
                                  output_times=(1.0,)))
        m_k = traj.moments[-1].as_array()
        dists.append(float(np.abs(m_k - m_ep).sum() * grid.dx))
    print(f"\n  moment distance to the fluid solution: "
          + " > ".join(f"{d:.3e}" for d in dists))
    assert dists[0] > dists[1] > dists[2]


@pytest.mark.slow
def test_05_damping_rate_matches_the_dispersion_oracle():
    """The field-energy envelope of a collisionless density wave decays
    at the rate predicted by a root of the kinetic dispersion relation,
    found here by an independent complex Newton iteration."""
    t0 = time.monotonic()
    k = 0.5

    def dispersion_root():
        # D(omega) = 1 + (1 + zeta Z(zeta)) / k^2, zeta = omega/(sqrt2 k)
        omega = 1.4 - 0.15j
        for _ in range(50):
            zeta_ = omega / (np.sqrt(2.0) * k)
            zfun = 1j * np.sqrt(np.pi) * wofz(zeta_)
            d = 1.0 + (1.0 + zeta_ * zfun) / k ** 2
            dz = zfun - 2.0 * zeta_ * (1.0 + zeta_ * zfun)
            step = d / (dz / (np.sqrt(2.0) * k) / k ** 2)
            omega = omega - step
            if abs(step) < 1e-13:
                break
        return omega

    gamma_oracle = dispersion_root().imag
    grid = PhaseGrid(dx_dims=1, x_nodes=65,
                     x_bounds=default_x_bounds("linear_ld"),
                     v_nodes_per_dim=32)
    traj = run_model(ModelRun(model="VPL", grid=grid,
                              ic=InitialCondition("linear_ld"),
                              z=np.array([0.0]), epsilon=1e6, t_final=8.0))
    t, zeta_t = traj.times, traj.zeta
    inside = (t >= 1.0) & (t <= 8.0)
    ti, zi = t[inside], zeta_t[inside]
    peaks = np.flatnonzero((zi[1:-1] > zi[:-2]) & (zi[1:-1] > zi[2:])) + 1
    # the envelope carries one maximum per half oscillation period
    # (~2.2 time units), so the fit window holds three of them
    assert peaks.size >= 3
    slope = np.polyfit(ti[peaks], zi[peaks], 1)[0]
    gamma = slope * np.log(10.0)
    rel = abs(gamma - gamma_oracle) / abs(gamma_oracle)
    wall = time.monotonic() - t0
    print(f"\n  envelope rate {gamma:.5f} vs oracle {gamma_oracle:.5f} "
          f"({100 * rel:.2f}%), {wall:.0f} s")
    assert rel < 0.05
    assert wall < 1800.0


def test_06_weight_formula_is_variance_optimal():
    """On a Gaussian triple with known covariances the solved weights
    beat 20 perturbations of themselves at 4 sigma and land on the
    closed-form minimal variance."""
    var_x = 2.0
    b = np.array([1.1, 0.5])
    c = np.array([[1.5, 0.6], [0.6, 1.0]])
    sigma = np.block([[np.array([[var_x]]), b[None, :]],
                      [b[:, None], c]])
    n = 200000
    rng = np.random.default_rng(2024)
    xyz = rng.standard_normal((n, 3)) @ np.linalg.cholesky(sigma).T
    x, y = xyz[:, 0], xyz[:, 1:]

    lam = optimal_weights(b, c).lam
    v_min = (1.0 - b @ lam / var_x) * var_x
    z_star = x - y @ lam
    var_star = z_star.var(ddof=1)

    sq = (z_star - z_star.mean()) ** 2
    band = 4.0 * sq.std(ddof=1) / np.sqrt(n)
    assert abs(var_star - v_min) < band

    losses = []
    for delta in rng.normal(0.0, 0.3, size=(20, 2)):
        z_pert = x - y @ (lam + delta)
        w = (z_pert - z_pert.mean()) ** 2 - sq
        margin = w.mean() + 4.0 * w.std(ddof=1) / np.sqrt(n)
        losses.append(w.mean())
        assert margin > 0.0, delta
    print(f"\n  var {var_star:.4f} vs closed form {v_min:.4f} "
          f"(band {band:.4f}); perturbations cost "
          f"{min(losses):.2e}..{max(losses):.2e}")


def test_07_relaxation_weights_telescope():
    """With the initial slice and its Maxwellian as surrogates, the
    fitted weights are exactly (1, 0) at t = 0 and favour the
    Maxwellian once the state has relaxed toward it."""
    grid = hom_grid()
    ic = InitialCondition("two_bubble")
    space = dataclasses.replace(random_space(ic), seed=7)
    draws = draw_parameters(space, 16)

    high, sur_init, sur_max = [], [], []
    for z in draws:
        traj = run_model(relaxation_run("HOM_FP", grid, z=z, dt=0.02,
                                        output_times=(0.0, 2.0)))
        high.append(np.stack([f.values for f in traj.fields]))
        f0 = initial_condition_eval(ic, z, grid)
        sur_init.append(f0.values)
        sur_max.append(maxwellian_eval(moments_of(f0), grid).values)
    high = np.stack(high)          # (K, 2, 1, nv, nv)
    lows = np.stack([sur_init, sur_max])

    def fitted(j):
        b, c = estimate_covariances(high[:, j], lows)
        return optimal_weights(*aggregate_covariances(b, c,
                                                      grid.dv ** 2)).lam

    lam0 = fitted(0)
    lam2 = fitted(1)
    print(f"\n  t=0 weights {lam0}; t=2 weights {lam2}")
    np.testing.assert_allclose(lam0, [1.0, 0.0], atol=1e-10)
    assert lam2[1] > lam2[0]


@pytest.mark.slow
def test_08_variance_reduction_beats_plain_sampling(tmp_path,
                                                    relaxation_calibration):
    """Five paired samples plus a 2500-draw surrogate mean: the
    variance-reduced error stays at or below plain Monte Carlo at every
    output time, and the calibrated surrogate at or below the unit-
    frequency one.  The reference is a deterministic quadrature of the
    high-fidelity model over the parameter box."""
    mu_star, _ = relaxation_calibration
    grid = hom_grid()
    out_times = tuple(np.round(np.arange(0.0, 2.01, 0.25), 10))
    base = dict(grid=grid, ic=InitialCondition("two_bubble"), epsilon=1.0,
                t_final=2.0, dt=0.02, output_times=out_times)
    high_run = ModelRun(model="HOM_LANDAU", **base)

    sweep(high_run, samples=5, seed=42, out_root=tmp_path / "high")
    sweep(ModelRun(model="HOM_FP", mu=1.0, **base), samples=5, seed=42,
          out_root=tmp_path / "low1", mean_draws=2500)
    sweep(ModelRun(model="HOM_FP", mu=mu_star, **base), samples=5, seed=42,
          out_root=tmp_path / "lows", mean_draws=2500)

    # Gauss-Legendre x periodic-trapezoid quadrature of E[f]
    nodes0, w0 = np.polynomial.legendre.leggauss(12)
    truth = 0.0
    for z0, w in zip(nodes0, w0 / 2.0):
        for z1 in np.arange(16) / 16.0:
            traj = run_model(dataclasses.replace(high_run,
                                                 z=np.array([z0, z1])))
            truth = truth + (w / 16.0) * np.stack(
                [f.values for f in traj.fields])
    wr = ArchiveWriter(tmp_path / "ref", {"model": "QUADRATURE"}, ["f"])
    wr.write_mean({"f": truth}, n_draws=192, seed=0)
    wr.finalize()

    rep1 = estimate(tmp_path / "high", [tmp_path / "low1"],
                    tmp_path / "rep1", reference=tmp_path / "ref")
    reps = estimate(tmp_path / "high", [tmp_path / "lows"],
                    tmp_path / "reps", reference=tmp_path / "ref")

    print(f"\n  mu* = {mu_star:.3f}")
    print("  t      err_mc     err_vrmc(mu=1)  err_vrmc(mu*)")
    for r1, rs in zip(rep1["rows"], reps["rows"]):
        print(f"  {r1['t']:.2f}   {r1['err_mc']:.3e}   {r1['err_vrmc']:.3e}"
              f"      {rs['err_vrmc']:.3e}")
        assert r1["err_vrmc"] <= r1["err_mc"]
        assert rs["err_vrmc"] <= rs["err_mc"]
        assert rs["err_vrmc"] <= r1["err_vrmc"]


def test_09_calibration_is_self_consistent(relaxation_calibration):
    """Synthetic tendencies pin the frequency to within a scan cell and
    real relaxation snapshots produce a U-shaped error curve."""
    grid = hom_grid()
    mu0 = 1.0 / 13.0
    f0 = initial_condition_eval(InitialCondition("two_bubble"),
                                np.array([0.0, 0.0]), grid)
    m = moments_of(f0)
    ref = mu0 * fp_p(f0.values, m, grid)
    mu_rec, _ = calibrate_mu([f0.values[0]], SpectralPlan(grid),
                             reference=[ref[0]])
    mu_grid = default_mu_grid()
    cell = np.log(mu_grid[1] / mu_grid[0])
    assert abs(np.log(mu_rec / mu0)) <= cell

    mu_star, curve = relaxation_calibration
    k = int(np.argmin(curve))
    assert 0 < k < curve.size - 1
    assert curve[0] > 1.2 * curve[k]
    assert curve[-1] > 1.2 * curve[k]
    print(f"\n  synthetic 1/mu: true {1 / mu0:.2f}, recovered "
          f"{1 / mu_rec:.2f}; relaxation scan minimum at "
          f"1/mu = {1 / mu_star:.3f} (index {k}/{curve.size - 1})")


def test_10_archive_contract(tmp_path):
    """Round trips are bit-exact, corruption is caught by checksums,
    and pairing validation accepts matched draws only."""
    run = relaxation_run("HOM_FP", hom_grid(), dt=0.02, t_final=0.1,
                         output_times=(0.1,))
    a = sweep(run, samples=3, seed=9, out_root=tmp_path / "a")
    b = sweep(dataclasses.replace(run, mu=2.0), samples=3, seed=9,
              out_root=tmp_path / "b")

    # bit-exact round trip through a fresh reader
    fresh = SampleArchive(tmp_path / "a")
    for k in range(3):
        za, da = a.read_sample(k)
        zf, df = fresh.read_sample(k)
        assert za.tobytes() == zf.tobytes()
        for q in a.quantities:
            assert da[q].tobytes() == df[q].tobytes()
    for rank in range(1, 7):
        arr = np.random.default_rng(rank).standard_normal((2,) * rank)
        out, _ = unpack_array(pack_array(arr))
        assert out.tobytes() == arr.tobytes()

    assert validate_pairing(tmp_path / "a", tmp_path / "b") == 3

    blob = bytearray((tmp_path / "a" / "sample_1.bin").read_bytes())
    blob[60] ^= 0xFF
    (tmp_path / "a" / "sample_1.bin").write_bytes(bytes(blob))
    with pytest.raises(ValidationError, match="checksum"):
        fresh.read_sample(1)

    c = sweep(dataclasses.replace(run), samples=3, seed=10,
              out_root=tmp_path / "c")
    with pytest.raises(ValidationError, match="pairing"):
        validate_pairing(tmp_path / "b", tmp_path / "c")
    print("\n  round trip, tamper detection, pairing: all verified")
