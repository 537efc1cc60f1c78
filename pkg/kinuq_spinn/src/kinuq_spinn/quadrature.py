"""Gauss-Legendre velocity quadrature for separable moments.

Because every field is a sum of per-axis factor products, a velocity
moment against a separable weight collapses to one 1-D quadrature per
axis: eta^{l,k}_j = int xi^{v_l}_j(v) v^k w(v) dv with w the Gaussian
damping the perturbation ansatz carries.  Moments of the full field
are then elementwise product combinations of the eta tables, which is
what keeps 4- and 5-D moment assembly as cheap as 1-D integrals.
"""

import numpy as np
import torch

from .nets import DTYPE


def gauss_legendre(n, lo, hi):
    """Nodes and weights of the n-point rule mapped onto [lo, hi]."""
    nodes, weights = np.polynomial.legendre.leggauss(int(n))
    half = 0.5 * (hi - lo)
    return half * nodes + 0.5 * (hi + lo), half * weights


def eta_tables(net, v_axes, v_bound, kmax=3, n_quad=128, damped=True):
    """Per-axis velocity moment tables of a separable field.

    For each axis index in ``v_axes`` the rows k = 0..kmax of the
    returned (kmax+1, p) tensor hold eta^{l,k}_j = int xi_j v^k w dv on
    [-v_bound, v_bound]; ``damped`` folds the exp(-v^2/2) of the
    perturbation ansatz into the weight.  The tables stay attached to
    the parameter graph, so losses built from them train the subnets.
    """
    x, w = gauss_legendre(n_quad, -v_bound, v_bound)
    xt = torch.as_tensor(x, dtype=DTYPE)
    wt = torch.as_tensor(w, dtype=DTYPE)
    if damped:
        wt = wt * torch.exp(-0.5 * xt ** 2)
    tables = []
    powers = torch.stack([wt * xt ** k for k in range(kmax + 1)])
    for axis in v_axes:
        vals = net.subnets[axis](xt)[0]
        tables.append(powers @ vals)
    return tables


def moment_heads(tables):
    """Mixing heads for the conserved moments of a 2-V separable field.

    Rows: density, both momentum components, energy -- in eta^{l,k}
    notation (e10*e20, e11*e20, e10*e21, (e12*e20 + e10*e22)/2).
    Returns a (4, p) tensor ready for TensorNet.contract.
    """
    e1, e2 = tables
    return torch.stack([
        e1[0] * e2[0],
        e1[1] * e2[0],
        e1[0] * e2[1],
        0.5 * (e1[2] * e2[0] + e1[0] * e2[2]),
    ])


def flux_heads(tables):
    """Mixing heads for the x-direction flux moments of a 2-V field.

    Rows: mass, x-momentum, y-momentum and energy flux --
    (e11*e20, e12*e20, e11*e21, (e13*e20 + e11*e22)/2).
    """
    e1, e2 = tables
    return torch.stack([
        e1[1] * e2[0],
        e1[2] * e2[0],
        e1[1] * e2[1],
        0.5 * (e1[3] * e2[0] + e1[1] * e2[2]),
    ])


def separable_moments(net, spatial_axes, v_bound, n_quad=128, damped=True):
    """Conserved moments of a separable 2-V field over its slow axes.

    The net's last two axes are taken as velocity; ``spatial_axes``
    supplies node arrays for the leading axes (may be empty for a
    velocity-only net).  Returns a (4, *spatial_shape) tensor ordered
    density, x-momentum, y-momentum, energy.
    """
    n_spatial = net.n_axes - 2
    if len(spatial_axes) != n_spatial:
        raise ValueError(
            f"net has {n_spatial} slow axes, got {len(spatial_axes)} arrays")
    tables = eta_tables(net, [n_spatial, n_spatial + 1], v_bound,
                        kmax=2, n_quad=n_quad, damped=damped)
    heads = moment_heads(tables)
    if n_spatial == 0:
        return heads.sum(dim=1)
    factors = [net.subnets[i](x) for i, x in enumerate(spatial_axes)]
    return net.contract(factors, head=heads)
