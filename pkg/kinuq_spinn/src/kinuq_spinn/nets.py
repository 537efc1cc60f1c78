"""Separable coordinate networks: per-axis sine subnets and their
rank-p tensor contraction.

A TensorNet represents a field on an r-dimensional box as
T(x_1..x_r) = sum_j prod_i xi^i_j(x_i), with one small sinusoidal
subnet per coordinate emitting the p factor features.  Everything
downstream -- residual assembly on tensor-product collocation grids,
velocity moments, coordinate derivatives -- reduces to swapping one
axis factor for its analytically propagated derivative, so no autograd
sweep over coordinates is ever needed and a full 5-D evaluation costs
r subnet passes plus one einsum.
"""

import numpy as np
import torch
from torch import nn

DTYPE = torch.float64
_LETTERS = "abcdef"


def _uniform(gen, shape, bound):
    return (2.0 * torch.rand(shape, generator=gen, dtype=DTYPE) - 1.0) * bound


class SirenSubnet(nn.Module):
    """One coordinate's factor stack: scalar in, rank features out.

    Three weight layers (1 -> width -> width -> rank); the first two
    are sine layers, with the frequency scale w0 applied to the input
    layer, and the output layer is linear.  The coordinate is mapped
    affinely from [lo, hi] onto [-1, 1] before the first layer, and
    forward() propagates the value together with first and second
    derivatives with respect to the raw coordinate through the chain.
    """

    def __init__(self, lo, hi, rank, width=128, w0=10.0, gen=None):
        super().__init__()
        self.lo, self.hi = float(lo), float(hi)
        if not self.hi > self.lo:
            raise ValueError(f"empty coordinate range [{lo}, {hi}]")
        self.w0 = float(w0)
        self.scale = 2.0 / (self.hi - self.lo)
        mid = np.sqrt(6.0 / width)
        self.w_in = nn.Parameter(_uniform(gen, (width, 1), 1.0))
        self.b_in = nn.Parameter(_uniform(gen, (width,), 1.0))
        self.w_mid = nn.Parameter(_uniform(gen, (width, width), mid))
        self.b_mid = nn.Parameter(_uniform(gen, (width,), mid))
        self.w_out = nn.Parameter(_uniform(gen, (rank, width), mid))
        self.b_out = nn.Parameter(torch.zeros(rank, dtype=DTYPE))

    def forward(self, x):
        """Return (value, d/dx, d2/dx2) on the nodes, each (n, rank)."""
        x = torch.as_tensor(x, dtype=DTYPE).reshape(-1, 1)
        s = self.scale * (x - self.lo) - 1.0
        z1 = self.w0 * (s @ self.w_in.T + self.b_in)
        sin1, cos1 = torch.sin(z1), torch.cos(z1)
        k1 = self.w0 * self.scale * self.w_in[:, 0]
        da1 = k1 * cos1
        d2a1 = -(k1 ** 2) * sin1
        z2 = sin1 @ self.w_mid.T + self.b_mid
        sin2, cos2 = torch.sin(z2), torch.cos(z2)
        slope = da1 @ self.w_mid.T
        curve = d2a1 @ self.w_mid.T
        da2 = cos2 * slope
        d2a2 = cos2 * curve - sin2 * slope ** 2
        return (sin2 @ self.w_out.T + self.b_out,
                da2 @ self.w_out.T,
                d2a2 @ self.w_out.T)

    def zero_output(self):
        """Zero the linear output layer (kills the whole product term
        this subnet participates in while keeping it trainable)."""
        with torch.no_grad():
            self.w_out.zero_()
            self.b_out.zero_()
        return self


class TensorNet(nn.Module):
    """Rank-p separable field over an r-dimensional box.

    ``bounds`` is one (lo, hi) pair per coordinate.  ``channels`` adds
    a trainable (channels x p) mixing head so one net emits several
    fields sharing the same factors; without it the contraction sums
    the rank components to a scalar field.
    """

    def __init__(self, bounds, rank, channels=None, width=128, w0=10.0,
                 head_scale=0.1, seed=0):
        super().__init__()
        gen = torch.Generator().manual_seed(int(seed))
        self.rank = int(rank)
        self.bounds = [tuple(map(float, b)) for b in bounds]
        self.subnets = nn.ModuleList(
            [SirenSubnet(lo, hi, self.rank, width=width, w0=w0, gen=gen)
             for lo, hi in self.bounds])
        self.head = None
        if channels is not None:
            self.head = nn.Parameter(
                _uniform(gen, (int(channels), self.rank), head_scale))

    @property
    def n_axes(self):
        return len(self.subnets)

    def factors(self, axes):
        """Evaluate every subnet on its own node array; returns the
        per-axis (value, d1, d2) triples."""
        if len(axes) != self.n_axes:
            raise ValueError(
                f"need {self.n_axes} coordinate arrays, got {len(axes)}")
        return [net(x) for net, x in zip(self.subnets, axes)]

    def contract(self, factors, derivs=None, head=None):
        """Tensor contraction sum_j head_cj prod_i xi^i_j over a grid.

        ``factors`` are (value, d1, d2) triples as from factors() --
        any leading subset of axes is allowed, which is how moments
        contract the slow coordinates only.  ``derivs`` maps axis index
        to derivative order (0, 1 or 2).  ``head`` overrides the
        trained mixing head; pass e.g. quadrature moment combinations.
        """
        derivs = derivs or {}
        mats = [trip[derivs.get(i, 0)] for i, trip in enumerate(factors)]
        letters = _LETTERS[: len(mats)]
        spec = ",".join(f"{c}z" for c in letters)
        if head is None and self.head is not None:
            head = self.head
        if head is None:
            return torch.einsum(f"{spec}->{letters}", *mats)
        return torch.einsum(f"yz,{spec}->y{letters}", head, *mats)

    def field(self, axes, derivs=None, head=None):
        """Contract the net on a tensor-product grid of node arrays."""
        return self.contract(self.factors(axes), derivs=derivs, head=head)
