"""Upwind WENO transport tendencies and the electrostatic field solve.

The two advection terms of the kinetic equation,

    -v1 * df/dx        (spatial transport)
    -E  * df/dv        (acceleration by the self-consistent field)

are discretized with fifth-order finite-difference WENO reconstruction,
upwinded by the sign of the local advection speed.  The field itself comes
from the normalized Poisson equation  d2(phi)/dx2 = 1 - rho  solved with a
fourth-order compact (Numerov) tridiagonal scheme, either periodic with a
zero-mean gauge or with Dirichlet values at the domain ends.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import ValidationError
from .fields import DistField

# classical smoothness-weight regularization and ideal weights
_WENO_EPS = 1e-6
_IDEAL = (0.1, 0.6, 0.3)


def _weno5_faces(g, axis, positive):
    """Fifth-order WENO face values along ``axis`` of a padded array.

    ``g`` carries three ghost layers on each end of ``axis`` (length n + 6
    for n cells); the result holds reconstructed values at the n + 1 faces
    bounding the interior cells.  ``positive`` selects the left-biased
    stencil (information moving toward +axis); the right-biased variant is
    the mirror image.
    """
    if not positive:
        flipped = _weno5_faces(np.flip(g, axis), axis, True)
        return np.flip(flipped, axis)
    g = np.moveaxis(g, axis, -1)
    n1 = g.shape[-1] - 5
    fm2 = g[..., 0:n1]
    fm1 = g[..., 1:n1 + 1]
    f0 = g[..., 2:n1 + 2]
    fp1 = g[..., 3:n1 + 3]
    fp2 = g[..., 4:n1 + 4]

    q0 = (2.0 * fm2 - 7.0 * fm1 + 11.0 * f0) / 6.0
    q1 = (-fm1 + 5.0 * f0 + 2.0 * fp1) / 6.0
    q2 = (2.0 * f0 + 5.0 * fp1 - fp2) / 6.0

    b0 = 13.0 / 12.0 * (fm2 - 2.0 * fm1 + f0) ** 2 \
        + 0.25 * (fm2 - 4.0 * fm1 + 3.0 * f0) ** 2
    b1 = 13.0 / 12.0 * (fm1 - 2.0 * f0 + fp1) ** 2 \
        + 0.25 * (fm1 - fp1) ** 2
    b2 = 13.0 / 12.0 * (f0 - 2.0 * fp1 + fp2) ** 2 \
        + 0.25 * (3.0 * f0 - 4.0 * fp1 + fp2) ** 2

    a0 = _IDEAL[0] / (_WENO_EPS + b0) ** 2
    a1 = _IDEAL[1] / (_WENO_EPS + b1) ** 2
    a2 = _IDEAL[2] / (_WENO_EPS + b2) ** 2
    h = (a0 * q0 + a1 * q1 + a2 * q2) / (a0 + a1 + a2)
    return np.moveaxis(h, -1, axis)


def _pad_axis(vals, axis, mode):
    """Three ghost layers on one axis: 'wrap', 'edge', or zeros."""
    width = [(0, 0)] * vals.ndim
    width[axis] = (3, 3)
    if mode == "zero":
        return np.pad(vals, width)
    return np.pad(vals, width, mode=mode)


def _upwind_derivative(vals, axis, h, positive_mask):
    """Sign-selected conservative difference of WENO face values.

    ``vals`` is already padded along ``axis``; ``positive_mask`` broadcasts
    against the unpadded shape and selects the left-biased faces where the
    advection speed is positive.
    """
    hp = _weno5_faces(vals, axis, True)
    hm = _weno5_faces(vals, axis, False)
    dp = np.diff(hp, axis=axis)
    dm = np.diff(hm, axis=axis)
    return np.where(positive_mask, dp, dm) / h


def weno_flux_x(f):
    """Transport tendency -v1 * df/dx, fifth-order WENO upwind.

    Upwinding follows the sign of each velocity node; ghost cells are
    periodic or outflow (edge-replicated) per the grid flag.
    """
    grid = f.grid
    if grid.dx_dims == 0:
        raise ValidationError("no spatial dimension")
    vals = f.values
    mode = "wrap" if grid.x_periodic else "edge"
    padded = _pad_axis(vals, 0, mode)
    v1 = grid.v[None, :, None] if grid.dv_dims == 2 else grid.v[None, :]
    dfdx = _upwind_derivative(padded, 0, grid.dx, v1 > 0)
    return -v1 * dfdx


def weno_flux_v(f, efield):
    """Acceleration tendency -E . grad_v f, fifth-order WENO upwind.

    ``efield`` holds one acceleration vector per spatial node: shape
    (x_nodes,) for a field along the first velocity axis, or
    (x_nodes, dv_dims) componentwise.  Velocity ghost values are zero
    (the distribution is negligible at the velocity boundary).
    """
    grid = f.grid
    vals = f.values
    nx = grid.x_nodes if grid.dx_dims else 1
    E = np.asarray(efield, dtype=np.float64)
    if not np.all(np.isfinite(E)):
        raise ValidationError("non-finite field")
    if E.ndim == 0:
        E = E.reshape(1)
    if E.ndim == 1:
        if grid.dx_dims and E.shape[0] == nx:
            E = np.stack([E] + [np.zeros(nx)] * (grid.dv_dims - 1), axis=1)
        elif E.shape[0] == grid.dv_dims:
            E = np.broadcast_to(E, (nx, grid.dv_dims))
        elif E.shape[0] == 1:
            E = np.stack([np.full(nx, E[0])]
                         + [np.zeros(nx)] * (grid.dv_dims - 1), axis=1)
        else:
            raise ValidationError("field length matches neither x nodes "
                                  "nor velocity dimensions")
    if E.shape != (nx, grid.dv_dims):
        raise ValidationError("field shape mismatch")

    out = np.zeros_like(vals)
    for d in range(grid.dv_dims):
        ed = E[:, d]
        if not np.any(ed):
            continue
        axis = vals.ndim - grid.dv_dims + d
        if grid.dx_dims:
            sel = ed.reshape((nx,) + (1,) * grid.dv_dims)
        else:
            sel = ed[0]
        padded = _pad_axis(vals, axis, "zero")
        dfdv = _upwind_derivative(padded, axis, grid.dv, sel > 0)
        out -= sel * dfdv
    return out


# ----------------------------------------------------------------------
# Poisson field solve
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class PoissonConfig:
    """Boundary treatment of the 1D field solve.

    bc is "periodic" (zero-mean gauge, mean-free source enforced by
    subtraction) or "dirichlet" with the potential pinned to phi_bounds
    at the two domain ends.
    """

    bc: str = "periodic"
    phi_bounds: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.bc not in ("periodic", "dirichlet"):
            raise ValidationError(f"unknown Poisson bc {self.bc!r}")
        if len(self.phi_bounds) != 2:
            raise ValidationError("phi_bounds needs two values")


def _numerov_rhs(s, h):
    """Compact fourth-order right-hand side (s[i-1] + 10 s[i] + s[i+1])/12."""
    return h * h / 12.0 * (np.roll(s, 1) + 10.0 * s + np.roll(s, -1))


def efield_from_phi(phi, grid, bc="periodic"):
    """E = -dphi/dx: fourth-order central (periodic) or one-sided ends."""
    h = grid.dx
    if bc == "periodic":
        dphi = (np.roll(phi, 2) - 8.0 * np.roll(phi, 1)
                + 8.0 * np.roll(phi, -1) - np.roll(phi, -2)) / (12.0 * h)
        return -dphi
    dphi = np.empty_like(phi)
    dphi[2:-2] = (phi[:-4] - 8.0 * phi[1:-3]
                  + 8.0 * phi[3:-1] - phi[4:]) / (12.0 * h)
    dphi[1] = (phi[2] - phi[0]) / (2.0 * h)
    dphi[-2] = (phi[-1] - phi[-3]) / (2.0 * h)
    dphi[0] = (-3.0 * phi[0] + 4.0 * phi[1] - phi[2]) / (2.0 * h)
    dphi[-1] = (3.0 * phi[-1] - 4.0 * phi[-2] + phi[-3]) / (2.0 * h)
    return -dphi


def poisson_solve(rho, cfg, grid):
    """Solve d2(phi)/dx2 = 1 - rho; return (phi, E = -dphi/dx).

    Fourth-order Numerov tridiagonal solve.  The periodic branch subtracts
    the source mean (compatibility) and fixes the gauge to zero-mean phi;
    the Dirichlet branch pins phi at the two ends to cfg.phi_bounds.
    """
    if grid.dx_dims != 1:
        raise ValidationError("no spatial dimension")
    rho = np.asarray(rho, dtype=np.float64)
    if rho.shape != (grid.x_nodes,):
        raise ValidationError("density length does not match the grid")
    if not np.all(np.isfinite(rho)):
        raise ValidationError("non-finite field")
    n = grid.x_nodes
    h = grid.dx
    source = 1.0 - rho

    if cfg.bc == "periodic":
        source = source - source.mean()
        rhs = _numerov_rhs(source, h)
        # Pin phi[n-1] = 0: the wrap entries of rows 0..n-2 vanish and the
        # cyclic Laplacian reduces to the standard (n-1)-point tridiagonal;
        # the dropped row is implied by the mean-free source.
        ab = np.zeros((3, n - 1))
        ab[0, 1:] = 1.0
        ab[1, :] = -2.0
        ab[2, :-1] = 1.0
        phi = np.empty(n)
        phi[: n - 1] = solve_banded((1, 1), ab, rhs[: n - 1])
        phi[n - 1] = 0.0
        phi -= phi.mean()
        return phi, efield_from_phi(phi, grid, "periodic")

    # Dirichlet: interior unknowns phi[1..n-2], ends pinned
    lo, hi = (float(b) for b in cfg.phi_bounds)
    rhs_full = _numerov_rhs(source, h)
    rhs = rhs_full[1:-1].copy()
    rhs[0] -= lo
    rhs[-1] -= hi
    ab = np.zeros((3, n - 2))
    ab[0, 1:] = 1.0
    ab[1, :] = -2.0
    ab[2, :-1] = 1.0
    phi = np.empty(n)
    phi[0], phi[-1] = lo, hi
    phi[1:-1] = solve_banded((1, 1), ab, rhs)
    return phi, efield_from_phi(phi, grid, "dirichlet")
