"""Kinetic surrogate: Gaussian background plus damped separable
perturbation, with moments assembled from quadrature tables.

The distribution ansatz is f = M~ + alpha * g * exp(-|v|^2/2): M~ is
a diagonal Gaussian whose density, mean velocity and directional
temperatures come from a channel-headed separable net over the slow
coordinates (parameter draw z, time, space), and g is a separable net
over all coordinates.  Conserved moments are the background's closed
forms plus quadrature-table corrections from g, and every coordinate
derivative the residuals need comes from factor swaps plus
hand-propagated chain rules through the pointwise algebra -- there is
no autograd pass over coordinates anywhere.

Three background choices are supported: "aniso" keeps the two
directional temperatures, "iso" replaces them by their mean, and
"moment" re-centers the Gaussian on the full moments U = U~ + dU of
the ansatz itself (a moving target as g trains, kept for comparison).
"""

import numpy as np
import torch
from torch import nn

from .nets import DTYPE, TensorNet
from .quadrature import eta_tables, flux_heads, moment_heads

SOFTPLUS_SHIFT = float(np.log(np.e - 1.0))  # softplus(0 + shift) = 1
BACKGROUNDS = ("aniso", "iso", "moment")


def _sp(x):
    return torch.nn.functional.softplus(x)


def _bx(field, n_vel):
    """Append singleton axes so a slow-coordinate field broadcasts
    against velocity axes."""
    return field.reshape(field.shape + (1,) * n_vel)


def _primitives(c):
    """Positive primitives (rho, u1, u2, T1, T2) from raw channels,
    keeping the softplus slopes the tangent rules need."""
    srho = torch.sigmoid(c[0] + SOFTPLUS_SHIFT)
    st1 = torch.sigmoid(c[3] + SOFTPLUS_SHIFT)
    st2 = torch.sigmoid(c[4] + SOFTPLUS_SHIFT)
    return {
        "rho": _sp(c[0] + SOFTPLUS_SHIFT), "u1": c[1], "u2": c[2],
        "t1": _sp(c[3] + SOFTPLUS_SHIFT), "t2": _sp(c[4] + SOFTPLUS_SHIFT),
        "srho": srho, "st1": st1, "st2": st2,
    }


def _prim_tangent(p, dc):
    """Directional derivative of the primitives along channel tangent dc."""
    return {"rho": p["srho"] * dc[0], "u1": dc[1], "u2": dc[2],
            "t1": p["st1"] * dc[3], "t2": p["st2"] * dc[4]}


def _conserved(p):
    """(rho, rho u, E) of the background, E = rho(|u|^2 + T1 + T2)/2."""
    q = p["u1"] ** 2 + p["u2"] ** 2 + p["t1"] + p["t2"]
    return torch.stack([p["rho"], p["rho"] * p["u1"], p["rho"] * p["u2"],
                        0.5 * p["rho"] * q])


def _conserved_tangent(p, d):
    q = p["u1"] ** 2 + p["u2"] ** 2 + p["t1"] + p["t2"]
    dq = 2.0 * p["u1"] * d["u1"] + 2.0 * p["u2"] * d["u2"] + d["t1"] + d["t2"]
    return torch.stack([
        d["rho"],
        d["rho"] * p["u1"] + p["rho"] * d["u1"],
        d["rho"] * p["u2"] + p["rho"] * d["u2"],
        0.5 * (d["rho"] * q + p["rho"] * dq),
    ])


def _flux(p):
    """x-direction flux of the background moments: the pressure tensor
    of the diagonal Gaussian is rho diag(T), so the shear entry is
    rho u1 u2 and the energy flux (E + rho T1) u1."""
    energy = 0.5 * p["rho"] * (p["u1"] ** 2 + p["u2"] ** 2 + p["t1"] + p["t2"])
    return torch.stack([
        p["rho"] * p["u1"],
        p["rho"] * (p["u1"] ** 2 + p["t1"]),
        p["rho"] * p["u1"] * p["u2"],
        (energy + p["rho"] * p["t1"]) * p["u1"],
    ])


def _flux_tangent(p, d):
    q = p["u1"] ** 2 + p["u2"] ** 2 + p["t1"] + p["t2"]
    dq = 2.0 * p["u1"] * d["u1"] + 2.0 * p["u2"] * d["u2"] + d["t1"] + d["t2"]
    energy = 0.5 * p["rho"] * q
    denergy = 0.5 * (d["rho"] * q + p["rho"] * dq)
    return torch.stack([
        d["rho"] * p["u1"] + p["rho"] * d["u1"],
        d["rho"] * (p["u1"] ** 2 + p["t1"])
        + p["rho"] * (2.0 * p["u1"] * d["u1"] + d["t1"]),
        d["rho"] * p["u1"] * p["u2"]
        + p["rho"] * (d["u1"] * p["u2"] + p["u1"] * d["u2"]),
        (denergy + d["rho"] * p["t1"] + p["rho"] * d["t1"]) * p["u1"]
        + (energy + p["rho"] * p["t1"]) * d["u1"],
    ])


def _prims_of_U(U):
    """Primitive (rho, u1, u2, T) of a conserved vector, T scalar."""
    rho = U[0]
    u1, u2 = U[1] / rho, U[2] / rho
    temp = U[3] / rho - 0.5 * (u1 ** 2 + u2 ** 2)
    return rho, u1, u2, temp


def _prims_of_U_tangent(U, dU):
    rho, u1, u2, _ = _prims_of_U(U)
    drho = dU[0]
    du1 = (dU[1] - u1 * drho) / rho
    du2 = (dU[2] - u2 * drho) / rho
    dtemp = dU[3] / rho - U[3] * drho / rho ** 2 - u1 * du1 - u2 * du2
    return drho, du1, du2, dtemp


class SpinnModel(nn.Module):
    """Separable surrogate for a kinetic distribution over (z, t, x, v).

    dx_dims 0 or 1 space dimensions and exactly two velocity
    dimensions; z_dims parameter-draw axes (may be 0).  ``background``
    picks the Gaussian the perturbation rides on (see module
    docstring).  The perturbation net's first slow-coordinate subnet
    has its output layer zeroed, so the ansatz starts exactly on the
    background and the conserved moments start exactly on its closed
    forms.
    """

    def __init__(self, dx_dims=1, dv_dims=2, rank=32, x_bounds=None,
                 v_bound=6.0, z_dims=1, z_bounds=None, t_bound=10.0,
                 background="aniso", alpha=1.0, width=128, w0=10.0,
                 n_quad=128, seed=0):
        super().__init__()
        if dv_dims != 2:
            raise ValueError("the ansatz is built for two velocity dimensions")
        if dx_dims not in (0, 1):
            raise ValueError("zero or one space dimensions")
        if background not in BACKGROUNDS:
            raise ValueError(f"unknown background {background!r}")
        if dx_dims and x_bounds is None:
            raise ValueError("a spatial model needs x_bounds")
        self.dx_dims, self.dv_dims = int(dx_dims), int(dv_dims)
        self.z_dims = int(z_dims)
        self.background = background
        self.alpha = float(alpha)
        self.v_bound = float(v_bound)
        self.n_quad = int(n_quad)
        if z_bounds is None:
            z_bounds = [(0.0, 1.0)] * self.z_dims
        if len(z_bounds) != self.z_dims:
            raise ValueError("one bounds pair per z dimension")
        spatial = [tuple(map(float, b)) for b in z_bounds]
        spatial.append((0.0, float(t_bound)))
        if dx_dims:
            spatial.append(tuple(map(float, x_bounds)))
        self.spatial_bounds = spatial
        self.t_axis = self.z_dims
        self.x_axis = self.z_dims + 1 if dx_dims else None
        velocity = [(-self.v_bound, self.v_bound)] * self.dv_dims
        n_channels = 1 + 2 * self.dv_dims
        self.wnet = TensorNet(spatial, rank, channels=n_channels,
                              width=width, w0=w0, seed=seed)
        self.gnet = TensorNet(spatial + velocity, rank,
                              width=width, w0=w0, seed=seed + 1)
        self.gnet.subnets[0].zero_output()
        self.phinet = None
        if dx_dims:
            self.phinet = TensorNet(spatial, rank, width=width, w0=w0,
                                    seed=seed + 2)


class FieldBatch:
    """All contracted fields and residuals on one tensor-product grid.

    ``spatial`` holds one node array per slow coordinate (z..., t, x);
    ``velocity`` holds the two velocity node arrays, or None when only
    moment-level fields are needed.  Factors are evaluated once here;
    the field and residual methods then combine value/derivative
    factor swaps with the hand-propagated chain rules above, caching
    shared pieces.
    """

    def __init__(self, model, spatial, velocity=None):
        self.model = model
        self.spatial = [torch.as_tensor(a, dtype=DTYPE).reshape(-1)
                        for a in spatial]
        n_slow = len(model.spatial_bounds)
        if len(self.spatial) != n_slow:
            raise ValueError(
                f"model has {n_slow} slow coordinates, got {len(self.spatial)}")
        self.wfac = model.wnet.factors(self.spatial)
        self.gfac = [model.gnet.subnets[i](a)
                     for i, a in enumerate(self.spatial)]
        self.phifac = (model.phinet.factors(self.spatial)
                       if model.phinet is not None else None)
        eta = eta_tables(model.gnet,
                         [n_slow + l for l in range(model.dv_dims)],
                         model.v_bound, kmax=3, n_quad=model.n_quad)
        self.mheads = moment_heads([e[:3] for e in eta])
        self.fheads = flux_heads(eta)
        self.velocity = None
        if velocity is not None:
            self.velocity = [torch.as_tensor(v, dtype=DTYPE).reshape(-1)
                             for v in velocity]
            self.gvfac = [model.gnet.subnets[n_slow + l](v)
                          for l, v in enumerate(self.velocity)]
        self._cache = {}

    # -- contractions --------------------------------------------------

    def channels(self, axis=None):
        key = ("channels", axis)
        if key not in self._cache:
            derivs = {} if axis is None else {axis: 1}
            self._cache[key] = self.model.wnet.contract(self.wfac,
                                                        derivs=derivs)
        return self._cache[key]

    def g_moments(self, axis=None, flux=False):
        key = ("gmom", axis, flux)
        if key not in self._cache:
            derivs = {} if axis is None else {axis: 1}
            head = self.fheads if flux else self.mheads
            self._cache[key] = self.model.gnet.contract(self.gfac,
                                                        derivs=derivs,
                                                        head=head)
        return self._cache[key]

    def g_field(self, derivs=None):
        if self.velocity is None:
            raise ValueError("batch was built without velocity nodes")
        key = ("g",) + tuple(sorted((derivs or {}).items()))
        if key not in self._cache:
            self._cache[key] = self.model.gnet.contract(
                self.gfac + self.gvfac, derivs=derivs)
        return self._cache[key]

    def phi(self, order=0):
        if self.phifac is None:
            raise ValueError("model carries no potential net")
        key = ("phi", order)
        if key not in self._cache:
            derivs = {self.model.x_axis: order} if order else {}
            self._cache[key] = self.model.phinet.contract(self.phifac,
                                                          derivs=derivs)
        return self._cache[key]

    # -- moment-level fields ---------------------------------------------

    def _prims(self, axis=None):
        key = ("prims", axis)
        if key not in self._cache:
            if axis is None:
                self._cache[key] = _primitives(self.channels())
            else:
                self._cache[key] = _prim_tangent(self._prims(),
                                                 self.channels(axis))
        return self._cache[key]

    def conserved(self, axis=None):
        """U = U~ + alpha dU (4, *slow_shape), or its axis derivative."""
        key = ("U", axis)
        if key not in self._cache:
            p = self._prims()
            base = (_conserved(p) if axis is None
                    else _conserved_tangent(p, self._prims(axis)))
            self._cache[key] = base + self.model.alpha * self.g_moments(axis)
        return self._cache[key]

    def flux(self, axis=None):
        """x-direction moment flux F = F~ + alpha dF, or its derivative."""
        p = self._prims()
        base = (_flux(p) if axis is None
                else _flux_tangent(p, self._prims(axis)))
        return base + self.model.alpha * self.g_moments(axis, flux=True)

    def efield(self):
        return -self.phi(1)

    # -- residuals --------------------------------------------------------

    def poisson_residual(self):
        """Laplacian law for the potential: d2phi/dx2 - (1 - rho)."""
        return self.phi(2) - (1.0 - self.conserved()[0])

    def moment_residual(self):
        """Conservation-law residual dU/dt + dF/dx - S, with the field
        source S = (0, rho E, 0, rho u1 E); pure dU/dt when the model
        has no space dimension."""
        m = self.model
        res = self.conserved(axis=m.t_axis)
        if m.dx_dims:
            efield = self.efield()
            U = self.conserved()
            zero = torch.zeros_like(efield)
            src = torch.stack([zero, U[0] * efield, zero, U[1] * efield])
            res = res + self.flux(axis=m.x_axis) - src
        return res

    # -- kinetic-level fields ----------------------------------------------

    def _vgrids(self):
        if self.velocity is None:
            raise ValueError("batch was built without velocity nodes")
        return (self.velocity[0].reshape(-1, 1),
                self.velocity[1].reshape(1, -1))

    def _damping(self):
        key = ("damping",)
        if key not in self._cache:
            v1, v2 = self._vgrids()
            self._cache[key] = torch.exp(-0.5 * (v1 ** 2 + v2 ** 2))
        return self._cache[key]

    def _background(self, axis=None):
        """Background Gaussian primitives (rho, a1, a2, b1, b2), or
        their derivative along a slow axis."""
        mode = self.model.background
        if mode in ("aniso", "iso"):
            src = self._prims(axis)
            t1, t2 = src["t1"], src["t2"]
            if mode == "iso":
                t1 = t2 = 0.5 * (src["t1"] + src["t2"])
            return (src["rho"], src["u1"], src["u2"], t1, t2)
        if axis is None:
            rho, u1, u2, temp = _prims_of_U(self.conserved())
        else:
            rho, u1, u2, temp = _prims_of_U_tangent(self.conserved(),
                                                    self.conserved(axis))
        return (rho, u1, u2, temp, temp)

    def _gauss(self, prims):
        nv = self.model.dv_dims
        rho, a1, a2, b1, b2 = [_bx(q, nv) for q in prims]
        v1, v2 = self._vgrids()
        quad = (v1 - a1) ** 2 / b1 + (v2 - a2) ** 2 / b2
        return rho / (2.0 * np.pi * torch.sqrt(b1 * b2)) * torch.exp(-0.5 * quad)

    def _gauss_dir(self, gauss, prims, dprims):
        """Directional derivative of the Gaussian along primitive
        tangents (chain rule in rho, means and temperatures)."""
        nv = self.model.dv_dims
        rho, a1, a2, b1, b2 = [_bx(q, nv) for q in prims]
        dr, da1, da2, db1, db2 = [_bx(q, nv) for q in dprims]
        v1, v2 = self._vgrids()
        return gauss * (
            dr / rho
            + (v1 - a1) / b1 * da1 + (v2 - a2) / b2 * da2
            + (0.5 * (v1 - a1) ** 2 / b1 ** 2 - 0.5 / b1) * db1
            + (0.5 * (v2 - a2) ** 2 / b2 ** 2 - 0.5 / b2) * db2)

    def _gauss_v(self, gauss, prims, which):
        """Velocity derivative of the Gaussian along v1 or v2."""
        nv = self.model.dv_dims
        _, a1, a2, b1, b2 = [_bx(q, nv) for q in prims]
        v1, v2 = self._vgrids()
        if which == 0:
            return -gauss * (v1 - a1) / b1
        return -gauss * (v2 - a2) / b2

    def _gauss_lap(self, gauss, prims):
        nv = self.model.dv_dims
        _, a1, a2, b1, b2 = [_bx(q, nv) for q in prims]
        v1, v2 = self._vgrids()
        return gauss * (((v1 - a1) ** 2 - b1) / b1 ** 2
                        + ((v2 - a2) ** 2 - b2) / b2 ** 2)

    def equilibrium(self):
        """Isotropic Maxwellian at the full moments U (the collision
        operator's fixed point)."""
        rho, u1, u2, temp = _prims_of_U(self.conserved())
        return self._gauss((rho, u1, u2, temp, temp))

    def distribution(self):
        """f = M~ + alpha g exp(-|v|^2/2) on the batch grid."""
        gauss = self._gauss(self._background())
        return gauss + self.model.alpha * self.g_field() * self._damping()

    def kinetic_residual(self, epsilon, mu=1.0):
        """Scaled kinetic residual eps/(1+eps) (df/dt + v1 df/dx
        - dphi/dx df/dv1) - mu/(1+eps) FP(f), with the relaxation
        operator FP(f) = div_v(M grad_v(f/M)) expanded around the
        isotropic Maxwellian at the full moments."""
        m = self.model
        nv = m.dv_dims
        n_slow = len(m.spatial_bounds)
        v1, v2 = self._vgrids()
        damping = self._damping()
        al = m.alpha

        bg = self._background()
        gauss = self._gauss(bg)
        g = self.g_field()
        f = gauss + al * g * damping

        g_t = self.g_field(derivs={m.t_axis: 1})
        f_t = self._gauss_dir(gauss, bg, self._background(m.t_axis)) \
            + al * g_t * damping
        transport = f_t
        if m.dx_dims:
            g_x = self.g_field(derivs={m.x_axis: 1})
            f_x = self._gauss_dir(gauss, bg, self._background(m.x_axis)) \
                + al * g_x * damping
            transport = transport + v1 * f_x \
                + _bx(self.efield(), nv) * self._f_v(gauss, bg, g, 0)

        f_v1 = self._f_v(gauss, bg, g, 0)
        f_v2 = self._f_v(gauss, bg, g, 1)
        g_11 = self.g_field(derivs={n_slow: 2})
        g_22 = self.g_field(derivs={n_slow + 1: 2})
        g_1 = self.g_field(derivs={n_slow: 1})
        g_2 = self.g_field(derivs={n_slow + 1: 1})
        lap_g = (g_11 - 2.0 * v1 * g_1 + (v1 ** 2 - 1.0) * g
                 + g_22 - 2.0 * v2 * g_2 + (v2 ** 2 - 1.0) * g)
        lap_f = self._gauss_lap(gauss, bg) + al * lap_g * damping

        rho, u1, u2, temp = _prims_of_U(self.conserved())
        u1b, u2b, tb = _bx(u1, nv), _bx(u2, nv), _bx(temp, nv)
        relax = (lap_f + f_v1 * (v1 - u1b) / tb + f_v2 * (v2 - u2b) / tb
                 + 2.0 * f / tb)
        return (epsilon * transport - mu * relax) / (1.0 + epsilon)

    def _f_v(self, gauss, bg, g, which):
        key = ("f_v", which)
        if key not in self._cache:
            m = self.model
            n_slow = len(m.spatial_bounds)
            v = self._vgrids()[which]
            g_v = self.g_field(derivs={n_slow + which: 1})
            self._cache[key] = self._gauss_v(gauss, bg, which) \
                + m.alpha * (g_v - v * g) * self._damping()
        return self._cache[key]


def spinn_forward(model, spatial, velocity=None):
    """One-shot evaluation on a tensor grid: conserved moments U,
    their x-direction flux, and -- when velocity nodes are given --
    the distribution f and the collision equilibrium M(U)."""
    batch = FieldBatch(model, spatial, velocity)
    out = {"U": batch.conserved(), "flux": batch.flux()}
    if velocity is not None:
        out["f"] = batch.distribution()
        out["M"] = batch.equilibrium()
    return out
