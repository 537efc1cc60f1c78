"""Control-variate estimator algebra: covariance fits, the optimal
weight solve, variance prediction, and the estimator itself."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinuq.errors import ValidationError
from kinuq.vrmc import (
    CvWeights,
    aggregate_covariances,
    estimate_covariances,
    l1_error,
    optimal_weights,
    vrmc_estimate,
    zeta,
)

# a joint covariance for (X, Y1, Y2) used by the Gaussian checks:
# Var X = 2, b = (1.1, 0.5), C = [[1.5, .6], [.6, 1.]]
SIGMA = np.array([[2.0, 1.1, 0.5],
                  [1.1, 1.5, 0.6],
                  [0.5, 0.6, 1.0]])


def joint_draw(n, seed):
    rng = np.random.default_rng(seed)
    chol = np.linalg.cholesky(SIGMA)
    xyz = rng.standard_normal((n, 3)) @ chol.T
    return xyz[:, 0], xyz[:, 1:].T.copy()


class TestOptimalWeights:
    def test_known_2x2_solution(self):
        b = np.array([1.1, 0.5])
        c = SIGMA[1:, 1:]
        w = optimal_weights(b, c)
        # closed-form inverse of the 2x2 system, det = 1.14
        lam = np.array([(1.0 * 1.1 - 0.6 * 0.5),
                        (1.5 * 0.5 - 0.6 * 1.1)]) / 1.14
        np.testing.assert_allclose(w.lam, lam, rtol=1e-13)
        assert w.regularization == 0.0
        assert w.n_surrogates == 2

    @settings(deadline=None, max_examples=40)
    @given(seed=st.integers(0, 10 ** 6), nsur=st.integers(1, 5))
    def test_solves_random_spd_systems(self, seed, nsur):
        """C lam = b holds to solver precision for any well-conditioned
        SPD covariance."""
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((nsur, nsur))
        c = a @ a.T + nsur * np.eye(nsur)
        b = rng.standard_normal(nsur)
        w = optimal_weights(b, c)
        np.testing.assert_allclose(c @ w.lam, b,
                                   atol=1e-10 * np.linalg.norm(b))
        assert w.regularization == 0.0

    def test_batched_leading_axes(self):
        rng = np.random.default_rng(7)
        a = rng.standard_normal((5, 3, 3))
        c = a @ np.swapaxes(a, -1, -2) + 3 * np.eye(3)
        b = rng.standard_normal((5, 3))
        w = optimal_weights(b, c)
        assert w.lam.shape == (5, 3)
        for i in range(5):
            np.testing.assert_allclose(w.lam[i],
                                       np.linalg.solve(c[i], b[i]),
                                       rtol=1e-12)

    def test_singular_covariance_gets_ridge(self):
        """Duplicated surrogates make C rank deficient; the solve is
        ridged and splits the weight between the copies."""
        w = optimal_weights(np.array([1.0, 1.0]),
                            np.array([[1.0, 1.0], [1.0, 1.0]]))
        assert w.regularization > 0.0
        np.testing.assert_allclose(w.lam, [0.5, 0.5], rtol=1e-6)

    def test_dead_covariance_falls_back_to_plain_mc(self):
        w = optimal_weights(np.zeros(2), np.zeros((2, 2)))
        np.testing.assert_array_equal(w.lam, 0.0)
        assert w.regularization == 0.0

    def test_shape_and_symmetry_validation(self):
        with pytest.raises(ValidationError):
            optimal_weights(np.ones(3), np.eye(2))
        with pytest.raises(ValidationError):
            optimal_weights(np.ones(2),
                            np.array([[1.0, 0.5], [0.1, 1.0]]))

    def test_predicted_variance(self):
        w = CvWeights(b=[1.1, 0.5], c=SIGMA[1:, 1:],
                      lam=np.linalg.solve(SIGMA[1:, 1:], [1.1, 0.5]))
        vm = w.predicted_variance(2.0)
        np.testing.assert_allclose(vm, 2.0 - 1.1 * w.lam[0]
                                    - 0.5 * w.lam[1], rtol=1e-13)
        # clamps tiny negatives, rejects real ones
        assert w.predicted_variance(2.0 - vm) >= 0.0
        with pytest.raises(ValidationError):
            w.predicted_variance(0.5)


class TestCovarianceEstimates:
    def test_matches_numpy_cov(self):
        rng = np.random.default_rng(3)
        high = rng.standard_normal(40)
        low = rng.standard_normal((2, 40))
        b, c = estimate_covariances(high, low)
        full = np.cov(np.vstack([high[None], low]))
        np.testing.assert_allclose(b, full[0, 1:], rtol=1e-12)
        np.testing.assert_allclose(c, full[1:, 1:], rtol=1e-12)

    def test_recovers_known_covariances(self):
        x, y = joint_draw(200000, seed=11)
        b, c = estimate_covariances(x, y)
        np.testing.assert_allclose(b, SIGMA[0, 1:], atol=0.03)
        np.testing.assert_allclose(c, SIGMA[1:, 1:], atol=0.03)

    def test_single_surrogate_promotion(self):
        rng = np.random.default_rng(5)
        high = rng.standard_normal(12)
        low = 0.5 * high + 0.1 * rng.standard_normal(12)
        b1, c1 = estimate_covariances(high, low)
        b2, c2 = estimate_covariances(high, low[None])
        np.testing.assert_array_equal(b1, b2)
        np.testing.assert_array_equal(c1, c2)

    def test_field_shaped_samples(self):
        rng = np.random.default_rng(9)
        high = rng.standard_normal((8, 4, 6))
        low = rng.standard_normal((2, 8, 4, 6))
        b, c = estimate_covariances(high, low)
        assert b.shape == (4, 6, 2)
        assert c.shape == (4, 6, 2, 2)
        # spot check one cell against the flat formula
        bc, cc = estimate_covariances(high[:, 1, 2], low[:, :, 1, 2])
        np.testing.assert_allclose(b[1, 2], bc, rtol=1e-13)
        np.testing.assert_allclose(c[1, 2], cc, rtol=1e-13)

    def test_aggregation_sums_cells(self):
        rng = np.random.default_rng(13)
        b = rng.standard_normal((4, 6, 2))
        c = rng.standard_normal((4, 6, 2, 2))
        bg, cg = aggregate_covariances(b, c, cell=0.25)
        np.testing.assert_allclose(bg, b.sum(axis=(0, 1)) * 0.25,
                                   rtol=1e-13)
        np.testing.assert_allclose(cg, c.sum(axis=(0, 1)) * 0.25,
                                   rtol=1e-13)

    def test_input_validation(self):
        with pytest.raises(ValidationError):
            estimate_covariances(np.ones(1), np.ones((2, 1)))
        with pytest.raises(ValidationError):
            estimate_covariances(np.ones(4), np.ones((2, 5)))


class TestEstimator:
    def test_zero_weights_reproduce_plain_mc(self):
        rng = np.random.default_rng(21)
        high = rng.standard_normal((6, 5))
        low = rng.standard_normal((2, 6, 5))
        res = vrmc_estimate(high, low, np.zeros((2, 5)),
                            CvWeights([0, 0], np.eye(2), [0.0, 0.0]))
        assert res.estimate.tobytes() == high.mean(axis=0).tobytes()
        assert res.mc_estimate.tobytes() == res.estimate.tobytes()
        np.testing.assert_array_equal(res.var_vrmc, res.var_mc)
        assert res.n_high == 6

    def test_perfect_surrogate_telescopes(self):
        """With the high-fidelity samples as their own surrogate and the
        exact mean supplied, the fitted weight is exactly 1 and the
        estimator returns the supplied mean with zero variance."""
        rng = np.random.default_rng(22)
        high = rng.standard_normal((10, 3))
        b, c = estimate_covariances(high, high[None])
        w = optimal_weights(*aggregate_covariances(b, c))
        np.testing.assert_allclose(w.lam, [1.0], rtol=1e-12)
        exact = np.array([0.3, -0.1, 2.0])
        res = vrmc_estimate(high, high[None], exact[None], w)
        np.testing.assert_allclose(res.estimate, exact, atol=1e-12)
        np.testing.assert_allclose(res.var_vrmc, 0.0, atol=1e-24)

    def test_variance_matches_lemma_prediction(self):
        """On correlated Gaussians the empirical estimator variance
        tracks Var(X) - b.C^-1 b within sampling error."""
        x, y = joint_draw(50000, seed=31)
        b, c = estimate_covariances(x, y)
        w = optimal_weights(b, c)
        res = vrmc_estimate(x, y, np.zeros(2), w)
        v_min = 2.0 - SIGMA[0, 1:] @ np.linalg.solve(SIGMA[1:, 1:],
                                                     SIGMA[0, 1:])
        np.testing.assert_allclose(res.var_vrmc * 50000, v_min, rtol=0.05)
        assert res.var_vrmc < res.var_mc

    def test_raw_weight_arrays_accepted(self):
        rng = np.random.default_rng(41)
        high = rng.standard_normal((6, 4))
        low = rng.standard_normal((1, 6, 4))
        mean = low[0].mean(axis=0)
        res = vrmc_estimate(high, low, mean[None], [0.5])
        manual = (high - 0.5 * (low[0] - mean)).mean(axis=0)
        np.testing.assert_allclose(res.estimate, manual, rtol=1e-13)

    def test_pointwise_weights(self):
        rng = np.random.default_rng(43)
        high = rng.standard_normal((6, 2))
        low = rng.standard_normal((1, 6, 2))
        lam = np.array([[0.2], [0.9]])
        res = vrmc_estimate(high, low, np.zeros((1, 2)), lam)
        manual = (high - lam[:, 0][None] * low[0]).mean(axis=0)
        np.testing.assert_allclose(res.estimate, manual, rtol=1e-13)

    def test_count_mismatches_rejected(self):
        high = np.ones((4, 3))
        low = np.ones((2, 4, 3))
        with pytest.raises(ValidationError):
            vrmc_estimate(high, low, np.zeros((2, 3)), [0.5])
        with pytest.raises(ValidationError):
            vrmc_estimate(high, low, np.zeros((1, 3)), [0.5, 0.5])


class TestDiagnostics:
    class _Dx:
        dx = 0.5

    def test_zeta_of_known_field(self):
        e = np.full(8, 2.0)
        # ||E||_2 = sqrt(4 * 8 * 0.5) = 4
        np.testing.assert_allclose(zeta(e, self._Dx()), np.log10(4.0),
                                   rtol=1e-13)

    def test_zeta_floor_sentinel(self):
        val = zeta(np.zeros(8), self._Dx())
        assert val == -300.0

    def test_l1_error(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        b = np.array([[1.5, 2.0], [2.0, 4.0]])
        np.testing.assert_allclose(l1_error(a, b, cell=0.1), 0.15,
                                   rtol=1e-13)
        with pytest.raises(ValidationError):
            l1_error(a, b[0])
