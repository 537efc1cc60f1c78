"""Grids, distribution fields, moments, Maxwellians, and random parameters.

The shared vocabulary of the package: every solver works on a
:class:`DistField` living on a :class:`PhaseGrid`, reduces it to a
:class:`MomentSet`, and compares against Maxwellian equilibria.  Random
inputs for the UQ layer are drawn from a :class:`RandomSpace`.

Conventions
-----------
* Velocity grid per dimension: ``v_i = -L_v + i * dv``, ``i = 0..Nv-1`` with
  ``dv = 2 L_v / Nv``.  This is the equispaced grid the spectral collision
  solver needs; velocity integrals use the midpoint rule on it (spectrally
  accurate for fields that decay before the boundary).
* Field storage is x-major: ``values[ix, iv1, iv2]``, last velocity index
  fastest.
* All arrays are float64.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform tensor grid in (x, v) space.

    ``dx_dims`` is 0 (space-homogeneous) or 1; ``dv_dims`` is 1 or 2.
    The velocity domain is ``[-v_bound, v_bound]^dv_dims``.
    """

    dv_dims: int = 2
    v_nodes_per_dim: int = 32
    v_bound: float = 6.0
    dx_dims: int = 0
    x_nodes: int = 1
    x_bounds: tuple = (0.0, 1.0)
    x_periodic: bool = True

    def __post_init__(self):
        if self.dv_dims not in (1, 2):
            raise ValidationError(f"dv_dims must be 1 or 2, got {self.dv_dims}")
        if self.dx_dims not in (0, 1):
            raise ValidationError(f"dx_dims must be 0 or 1, got {self.dx_dims}")
        if (self.x_nodes == 1) != (self.dx_dims == 0):
            raise ValidationError("x_nodes == 1 iff dx_dims == 0")
        if self.x_nodes < 1:
            raise ValidationError("x_nodes must be >= 1")
        if self.v_nodes_per_dim < 4 or self.v_nodes_per_dim % 2:
            raise ValidationError("v_nodes_per_dim must be even and >= 4")
        if not self.v_bound > 0:
            raise ValidationError("v_bound must be positive")
        if not self.x_bounds[1] > self.x_bounds[0]:
            raise ValidationError("x_bounds must be increasing")

    # -- spacings -------------------------------------------------------

    @property
    def dv(self):
        return 2.0 * self.v_bound / self.v_nodes_per_dim

    @property
    def dx(self):
        if self.dx_dims == 0:
            return 0.0
        lo, hi = self.x_bounds
        n = self.x_nodes if self.x_periodic else self.x_nodes - 1
        return (hi - lo) / n

    # -- axes -----------------------------------------------------------

    @property
    def v(self):
        """1D velocity axis, shared by every velocity dimension."""
        return -self.v_bound + self.dv * np.arange(self.v_nodes_per_dim)

    @property
    def x(self):
        lo, hi = self.x_bounds
        if self.dx_dims == 0:
            return np.array([lo])
        return lo + self.dx * np.arange(self.x_nodes)

    def v_mesh(self):
        """Tuple of dv_dims arrays broadcastable over the velocity block."""
        if self.dv_dims == 1:
            return (self.v,)
        return (self.v[:, None], self.v[None, :])

    @property
    def vshape(self):
        return (self.v_nodes_per_dim,) * self.dv_dims

    @property
    def shape(self):
        return (self.x_nodes,) + self.vshape

    @property
    def v_axes(self):
        """Axis indices of the velocity dimensions in a full field array."""
        return tuple(range(1, 1 + self.dv_dims))

    def vsq(self):
        """|v|^2 on the velocity block."""
        mesh = self.v_mesh()
        out = np.zeros(self.vshape)
        for w in mesh:
            out = out + w**2
        return out


@dataclass(frozen=True)
class DistField:
    """Distribution function f sampled on a :class:`PhaseGrid`."""

    grid: PhaseGrid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != self.grid.shape:
            raise ValidationError(
                f"field shape {vals.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValidationError("non-finite field")
        object.__setattr__(self, "values", vals)

    def with_values(self, values, time=None):
        return DistField(self.grid, values, self.time if time is None else time)


@dataclass(frozen=True)
class MomentSet:
    """Conservative moments (rho, rho*u, E) per x-node, plus derived u, T.

    ``energy`` is the total energy density E = 1/2 rho (|u|^2 + dv T),
    so the derived temperature is T = (2E/rho - |u|^2) / dv.
    """

    rho: np.ndarray
    mom: np.ndarray
    energy: np.ndarray
    dv_dims: int = 2

    def __post_init__(self):
        rho = np.atleast_1d(np.asarray(self.rho, dtype=np.float64))
        mom = np.asarray(self.mom, dtype=np.float64)
        if mom.ndim == 1:
            mom = mom.reshape(rho.shape[0], -1)
        energy = np.atleast_1d(np.asarray(self.energy, dtype=np.float64))
        if mom.shape != (rho.shape[0], self.dv_dims):
            raise ValidationError(
                f"momentum shape {mom.shape} inconsistent with "
                f"{rho.shape[0]} nodes x {self.dv_dims} velocity dims"
            )
        if energy.shape != rho.shape:
            raise ValidationError("energy/density shape mismatch")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "mom", mom)
        object.__setattr__(self, "energy", energy)

    @property
    def u(self):
        return self.mom / self.rho[:, None]

    @property
    def T(self):
        usq = np.sum(self.u**2, axis=1)
        return (2.0 * self.energy / self.rho - usq) / self.dv_dims

    @property
    def n_nodes(self):
        return self.rho.shape[0]

    def require_physical(self):
        if not (np.all(self.rho > 0) and np.all(self.T > 0)):
            raise ValidationError("non-physical temperature")
        return self

    def as_array(self):
        """Stack to shape (n_nodes, 2 + dv_dims): columns rho, mom..., energy."""
        return np.column_stack([self.rho, self.mom, self.energy])

    @classmethod
    def from_array(cls, arr, dv_dims=2):
        arr = np.atleast_2d(np.asarray(arr, dtype=np.float64))
        return cls(arr[:, 0], arr[:, 1 : 1 + dv_dims], arr[:, 1 + dv_dims], dv_dims)

    @classmethod
    def from_primitive(cls, rho, u, T, dv_dims=2):
        """Build from (rho, u, T); energy assembled by the closure."""
        rho = np.atleast_1d(np.asarray(rho, dtype=np.float64))
        u = np.asarray(u, dtype=np.float64)
        if u.ndim == 1:
            u = np.broadcast_to(u, (rho.shape[0], dv_dims)).copy()
        T = np.broadcast_to(np.asarray(T, dtype=np.float64), rho.shape).copy()
        usq = np.sum(u**2, axis=1)
        energy = 0.5 * rho * (usq + dv_dims * T)
        return cls(rho, rho[:, None] * u, energy, dv_dims)


def moments_of(f: DistField) -> MomentSet:
    """Velocity moments (rho, rho*u, E) of f by midpoint quadrature."""
    grid = f.grid
    vals = f.values
    if not np.all(np.isfinite(vals)):
        raise ValidationError("non-finite field")
    w = grid.dv**grid.dv_dims
    axes = grid.v_axes
    rho = w * vals.sum(axis=axes)
    mesh = grid.v_mesh()
    mom = np.stack(
        [w * (vals * mesh[d]).sum(axis=axes) for d in range(grid.dv_dims)], axis=1
    )
    energy = 0.5 * w * (vals * grid.vsq()).sum(axis=axes)
    return MomentSet(rho, mom, energy, grid.dv_dims)


def maxwellian_eval(m, grid: PhaseGrid, aniso_T=None) -> DistField:
    """Maxwellian distribution with the moments of ``m`` on ``grid``.

    ``m`` is a :class:`MomentSet` (isotropic case).  For the anisotropic
    case with diagonal temperature pass ``aniso_T`` of shape
    (n_nodes, dv_dims) (per-direction temperatures; replaces m.T).
    """
    m.require_physical()
    if m.n_nodes != grid.x_nodes:
        raise ValidationError("moment set / grid node-count mismatch")
    mesh = grid.v_mesh()
    u = m.u
    if aniso_T is None:
        T = np.repeat(m.T[:, None], grid.dv_dims, axis=1)
    else:
        T = np.atleast_2d(np.asarray(aniso_T, dtype=np.float64))
        if T.shape != (m.n_nodes, grid.dv_dims):
            raise ValidationError("anisotropic temperature shape mismatch")
    if not np.all(T > 0):
        raise ValidationError("non-physical temperature")

    # exponent assembled per velocity dimension to keep the loop tiny
    xsl = (slice(None),) + (None,) * grid.dv_dims
    expo = np.zeros(grid.shape)
    norm = np.ones(grid.x_nodes)
    for d in range(grid.dv_dims):
        vd = mesh[d][None, ...]
        expo = expo + (vd - u[:, d][xsl]) ** 2 / (2.0 * T[:, d][xsl])
        norm = norm * np.sqrt(2.0 * np.pi * T[:, d])
    vals = (m.rho / norm)[xsl] * np.exp(-expo)
    return DistField(grid, vals)


@dataclass(frozen=True)
class RandomSpace:
    """Uniform product distribution over a box, with a fixed seed."""

    bounds: tuple  # ((lo, hi), ...) per dimension
    seed: int = 0

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        for lo, hi in bounds:
            if not hi > lo:
                raise ValidationError(f"random-space bounds [{lo}, {hi}] not increasing")
        object.__setattr__(self, "bounds", bounds)

    @property
    def dims(self):
        return len(self.bounds)


def draw_parameters(space: RandomSpace, n: int) -> np.ndarray:
    """n i.i.d. uniform draws, shape (n, dims); bit-reproducible from the seed."""
    if n < 1:
        raise ValidationError("need at least one draw")
    rng = np.random.default_rng(space.seed)
    unit = rng.random((n, space.dims))
    lo = np.array([b[0] for b in space.bounds])
    hi = np.array([b[1] for b in space.bounds])
    return lo + (hi - lo) * unit


def entropy_of(f: DistField) -> float:
    """Discrete entropy functional -sum f ln f dv dx (x-summed).

    Nodes with f <= 0 contribute zero (the integrand's limit), so the
    diagnostic stays finite for penalized states that transiently
    undershoot.
    """
    grid = f.grid
    w = grid.dv**grid.dv_dims * (grid.dx if grid.dx_dims else 1.0)
    vals = f.values
    pos = vals > 0.0
    s = np.zeros_like(vals)
    s[pos] = vals[pos] * np.log(vals[pos])
    return -w * float(s.sum())
