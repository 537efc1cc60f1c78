"""Variance-reduced Monte Carlo estimation with control variates.

The estimator combines K paired high-/low-fidelity samples with a
surrogate mean obtained from a much larger independent batch:

    E_K[f] = mean_k f^H_k - sum_i lambda_i (mean_k f^Li_k - E[f^Li])

The weight vector solving ``C lambda = b`` (b_i the high/low covariance,
C the low/low covariance matrix) minimises the estimator variance among
all linear control-variate combinations.  Weights can be fitted per
point or from spatially aggregated covariances; the aggregated mode is
the default for small K where pointwise sample covariances are mostly
noise.
"""

import numpy as np

from .errors import ValidationError

# Condition-number threshold beyond which the covariance solve is
# regularized, and the relative ridge added when it is.
COND_LIMIT = 1e12
RIDGE_DELTA = 1e-8

# Electric-field norms below this floor are clamped before taking the
# logarithm, so zeta of an identically zero field is a finite sentinel.
ZETA_FLOOR = 1e-300


class CvWeights:
    """Fitted control-variate weights together with the covariances
    they were derived from and any ridge regularization applied."""

    def __init__(self, b, c, lam, regularization=0.0):
        self.b = np.asarray(b, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.lam = np.asarray(lam, dtype=float)
        self.regularization = float(regularization)

    @property
    def n_surrogates(self):
        return self.b.shape[-1]

    def predicted_variance(self, var_high):
        """Lemma-predicted estimator variance Var(f^H) - b.lam, clamped
        at zero against roundoff."""
        red = np.einsum("...i,...i->...", self.b, self.lam)
        out = np.asarray(var_high - red, dtype=float)
        if np.any(out < -1e-12 * np.maximum(np.abs(var_high), 1.0)):
            raise ValidationError("predicted variance fell below zero")
        return np.maximum(out, 0.0)


class EstimatorResult:
    """Output of one VRMC estimate alongside the plain-MC baseline."""

    def __init__(self, estimate, mc_estimate, weights, var_vrmc, var_mc,
                 n_high, n_low):
        self.estimate = estimate
        self.mc_estimate = mc_estimate
        self.weights = weights
        self.var_vrmc = var_vrmc
        self.var_mc = var_mc
        self.n_high = n_high
        self.n_low = n_low


def _paired_arrays(high, low):
    """Normalize sample stacks to (K, ...) and (I, K, ...) float arrays."""
    high = np.asarray(high, dtype=float)
    low = np.asarray(low, dtype=float)
    if low.ndim == high.ndim:
        low = low[None]
    if low.ndim != high.ndim + 1 or low.shape[1:] != high.shape:
        raise ValidationError("sample pairing mismatch")
    return high, low


def estimate_covariances(high, low):
    """Unbiased sample covariances between paired sample stacks.

    high : (K, ...) high-fidelity samples
    low  : (I, K, ...) surrogate samples, K paired with high (a single
           surrogate may be passed as (K, ...))

    Returns ``(b, c)`` with b[..., i] = Cov(f^H, f^Li) and
    c[..., i, j] = Cov(f^Li, f^Lj), divisor K - 1.
    """
    high, low = _paired_arrays(high, low)
    n = high.shape[0]
    if n < 2:
        raise ValidationError("insufficient samples")
    hc = high - high.mean(axis=0)
    lc = low - low.mean(axis=1, keepdims=True)
    b = np.einsum("k...,ik...->...i", hc, lc) / (n - 1)
    c = np.einsum("ik...,jk...->...ij", lc, lc) / (n - 1)
    c = 0.5 * (c + np.swapaxes(c, -1, -2))
    return b, c


def aggregate_covariances(b, c, cell=1.0):
    """Sum pointwise covariances over all non-surrogate axes.

    Minimising the cell-integrated variance over a single spatially
    constant weight vector leads to (sum c) lambda = (sum b), so the
    aggregated pair feeds straight into optimal_weights.
    """
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    bg = b.reshape(-1, b.shape[-1]).sum(axis=0) * cell
    cg = c.reshape(-1, c.shape[-1], c.shape[-1]).sum(axis=0) * cell
    return bg, cg


def optimal_weights(b, c):
    """Solve C lambda = b for the variance-minimising weights.

    Batched over any leading axes (b: (..., I), c: (..., I, I)).  Near
    singular systems get a ridge delta*trace(C)/I recorded on the
    result; a numerically zero C falls back to lambda = 0, which turns
    the estimator into plain Monte Carlo.
    """
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    if c.shape[-1] != c.shape[-2] or c.shape[-1] != b.shape[-1]:
        raise ValidationError("covariance shapes are inconsistent")
    if np.max(np.abs(c - np.swapaxes(c, -1, -2))) > 1e-12 * max(
            1.0, float(np.max(np.abs(c)))):
        raise ValidationError("covariance matrix is not symmetric")
    nsur = b.shape[-1]
    eye = np.eye(nsur)

    trace = np.trace(c, axis1=-2, axis2=-1)
    scale = np.maximum(np.abs(trace), np.abs(b).sum(axis=-1))
    dead = scale <= ZETA_FLOOR

    with np.errstate(all="ignore"):
        cond = np.linalg.cond(c)
    cond = np.where(np.isfinite(cond), cond, np.inf)
    need_ridge = (cond > COND_LIMIT) & ~dead
    ridge = np.where(need_ridge, RIDGE_DELTA * trace / nsur, 0.0)
    c_solve = c + ridge[..., None, None] * eye

    lam = np.zeros_like(b)
    ok = ~dead
    if np.any(ok):
        try:
            sol = np.linalg.solve(c_solve, b[..., None])[..., 0]
        except np.linalg.LinAlgError:
            extra = RIDGE_DELTA * trace / nsur
            ridge = np.where(ok, ridge + extra, ridge)
            c_solve = c + ridge[..., None, None] * eye
            sol = np.linalg.solve(c_solve, b[..., None])[..., 0]
        lam = np.where(ok[..., None], sol, lam)

    resid = np.einsum("...ij,...j->...i", c, lam) - b
    bias = ridge * np.abs(lam).sum(axis=-1)
    bad = np.linalg.norm(resid, axis=-1) > (
        1e-8 * np.linalg.norm(b, axis=-1) + bias + 1e-300)
    if np.any(bad & ~need_ridge & ok):
        raise ValidationError("weight solve residual exceeds tolerance")
    reg = float(np.max(ridge)) if ridge.size else 0.0
    return CvWeights(b, c, lam, regularization=reg)


def vrmc_estimate(high, low_paired, low_mean, weights):
    """Apply the control-variate estimator to paired sample stacks.

    low_mean : per-surrogate control-variate mean E[f^Li], stacked on
               axis 0 (from the archive's large-L mean record, or exact)
    weights  : CvWeights, or a raw weight array broadcastable as
               (I,) or (..., I) against the sample shape

    Returns an EstimatorResult whose empirical variances are variances
    of the per-sample combined values divided by K (variance of the
    mean).  All-zero weights reproduce plain MC bit for bit.
    """
    high, low = _paired_arrays(high, low_paired)
    n = high.shape[0]
    lam = weights.lam if isinstance(weights, CvWeights) else np.asarray(
        weights, dtype=float)
    if lam.ndim == 0:
        lam = lam[None]
    nsur = lam.shape[-1]
    if nsur != low.shape[0]:
        raise ValidationError("weight count does not match surrogates")
    low_mean = np.asarray(low_mean, dtype=float)
    if low_mean.ndim == high.ndim - 1 and nsur == 1:
        low_mean = low_mean[None]
    if low_mean.shape[0] != nsur:
        raise ValidationError("surrogate mean count mismatch")

    mc_estimate = high.mean(axis=0)
    var_mc = high.var(axis=0, ddof=1) / n if n > 1 else np.zeros_like(
        mc_estimate)

    if not np.any(lam):
        return EstimatorResult(mc_estimate, mc_estimate, weights,
                               var_mc, var_mc, n, 0)

    # lam axes: (..., I) pointwise or (I,) global; move I first and
    # broadcast against the (I, K, ...) sample stack.
    lam_f = np.moveaxis(np.broadcast_to(
        lam, high.shape[1:] + (nsur,)), -1, 0)
    combined = high - np.sum(
        lam_f[:, None] * (low - low_mean[:, None]), axis=0)
    estimate = combined.mean(axis=0)
    var_vrmc = combined.var(axis=0, ddof=1) / n if n > 1 else (
        np.zeros_like(estimate))
    return EstimatorResult(estimate, mc_estimate, weights, var_vrmc,
                           var_mc, n, 0)


def zeta(efield, grid):
    """log10 of the spatial L2 norm of the electric field.

    grid only needs a ``dx`` attribute; the norm is floored at 1e-300
    so a quiescent field maps to a finite sentinel instead of -inf.
    """
    e = np.asarray(efield, dtype=float)
    norm = np.sqrt(np.sum(e * e) * grid.dx)
    return float(np.log10(max(norm, ZETA_FLOOR)))


def l1_error(estimate, reference, cell=1.0):
    """Cell-weighted L1 distance between two fields of matching shape."""
    a = np.asarray(estimate, dtype=float)
    b = np.asarray(reference, dtype=float)
    if a.shape != b.shape:
        raise ValidationError("field shapes do not match")
    return float(np.sum(np.abs(a - b)) * cell)
