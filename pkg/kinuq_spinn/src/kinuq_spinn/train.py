"""Window-by-window training of the kinetic surrogate.

Time is split into consecutive windows.  Each window trains on
freshly drawn collocation grids restricted to its own time slab (plus
whatever data nodes fall inside it), so early dynamics are fit before
late ones and the optimizer never chases the whole horizon at once.
The optimizer is a sign-of-momentum rule: cheap state, and the
uniform step size tolerates the badly scaled gradients the residual
terms produce.
"""

import math
from dataclasses import dataclass

import numpy as np
import torch

from .loss import ap_loss
from .model import FieldBatch
from .nets import DTYPE


class Lion(torch.optim.Optimizer):
    """Sign-momentum optimizer: step along sign(b1 m + (1-b1) g),
    then update the momentum as an EMA with decay b2."""

    def __init__(self, params, lr=1e-4, betas=(0.9, 0.99), weight_decay=0.0):
        defaults = dict(lr=lr, betas=betas, weight_decay=weight_decay)
        super().__init__(params, defaults)

    @torch.no_grad()
    def step(self):
        for group in self.param_groups:
            lr = group["lr"]
            b1, b2 = group["betas"]
            wd = group["weight_decay"]
            for p in group["params"]:
                if p.grad is None:
                    continue
                state = self.state[p]
                if "momentum" not in state:
                    state["momentum"] = torch.zeros_like(p)
                m = state["momentum"]
                update = (b1 * m + (1.0 - b1) * p.grad).sign()
                if wd:
                    p.mul_(1.0 - lr * wd)
                p.add_(update, alpha=-lr)
                m.mul_(b2).add_(p.grad, alpha=1.0 - b2)


@dataclass
class TrainWindow:
    """One time slab of the training schedule."""
    t_lo: float
    t_hi: float
    epochs: int = 500
    n_col: int = 16
    n_col_v: int = None
    lr: float = 1e-5
    seed: int = 0


def _draw_batch(model, window, gen):
    """Fresh uniform collocation nodes: one array per slow coordinate
    (t restricted to the window) and one per velocity coordinate."""
    def uniform(n, lo, hi):
        return lo + (hi - lo) * torch.rand(n, generator=gen, dtype=DTYPE)

    n_col = window.n_col
    n_col_v = window.n_col_v if window.n_col_v is not None else n_col
    slow = []
    for axis, (lo, hi) in enumerate(model.spatial_bounds):
        if axis == model.t_axis:
            slow.append(uniform(n_col, window.t_lo, window.t_hi))
        else:
            slow.append(uniform(n_col, lo, hi))
    vb = model.v_bound
    velocity = [uniform(n_col_v, -vb, vb) for _ in range(model.dv_dims)]
    return FieldBatch(model, slow, velocity)


def _window_data(data, t_lo, t_hi, tol=1e-12):
    """Restrict a data dictionary to the nodes whose time falls inside
    the window; None when none do."""
    if data is None:
        return None
    t = np.asarray(data["t"], dtype=float).reshape(-1)
    mask = (t >= t_lo - tol) & (t <= t_hi + tol)
    if not mask.any():
        return None
    if mask.all():
        return data
    t_axis = 1 if "z" in data else 0
    out = dict(data)
    out["t"] = t[mask]
    if "U" in data:
        out["U"] = np.compress(mask, np.asarray(data["U"]), axis=1 + t_axis)
    if "f" in data:
        out["f"] = np.compress(mask, np.asarray(data["f"]), axis=t_axis)
    return out


def train_windowed(model, windows, epsilon, mu=1.0, data=None,
                   data_weight=10.0, verbose=False):
    """Train through the windows in order; returns one per-epoch list
    of loss-component dicts per window.

    Collocation draws come from a generator seeded per window, so a
    rerun with the same model seed and schedule reproduces the same
    parameters bit for bit.  A non-finite total loss aborts with the
    window that produced it.
    """
    history = []
    for idx, window in enumerate(windows):
        gen = torch.Generator().manual_seed(window.seed + 7919 * idx)
        wdata = _window_data(data, window.t_lo, window.t_hi)
        opt = Lion(model.parameters(), lr=window.lr)
        records = []
        for epoch in range(window.epochs):
            for group in opt.param_groups:
                group["lr"] = 0.5 * window.lr * (
                    1.0 + math.cos(math.pi * epoch / window.epochs))
            batch = _draw_batch(model, window, gen)
            comps = ap_loss(model, batch, epsilon, mu=mu, data=wdata,
                            data_weight=data_weight)
            total = comps["total"]
            if not torch.isfinite(total):
                raise RuntimeError(
                    f"training diverged in window {idx} "
                    f"(t in [{window.t_lo}, {window.t_hi}]) at epoch {epoch}")
            opt.zero_grad()
            total.backward()
            opt.step()
            records.append({k: float(v.detach()) for k, v in comps.items()})
            if verbose and (epoch % 100 == 0 or epoch == window.epochs - 1):
                print(f"window {idx} epoch {epoch:5d} "
                      f"total {records[-1]['total']:.3e}")
        history.append(records)
    return history
