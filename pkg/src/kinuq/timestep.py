"""IMEX Runge-Kutta stepping with a stiff collision relaxation.

One step advances

    df/dt = T(f) + EC(f)/eps + (s/eps) P(f)

where T is the explicit transport tendency, EC a non-stiff collision part
(zero or a penalized difference), and (s/eps) P the stiff part treated
implicitly through a resolvent solve.  The double tableau carries the
explicit coefficients (a_exp, b_exp) for T and EC and the implicit ones
(a_imp, b_imp) for P.  The stage loop:

    1. fields and tendencies of the previous stage state,
    2. explicit transport accumulation   ft = f^n + dt sum a_exp T_i,
    3. stage moments from ft (collision parts carry no moments),
    4. collision accumulation and the implicit stage solve
         (I - a_kk dt (s/eps) P) f_k = ft + dt sum (a_exp EC_i + a_imp s P_i)/eps,
    5. combination with the b weights (equal to the last stage state for a
       pair whose b rows equal the last tableau rows).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import SolverAbort, ValidationError

_TOL_ROW = 1e-14
_TOL_ORDER = 1e-12


@dataclass(frozen=True)
class ImexTableau:
    """Double Butcher tableau for an IMEX pair.

    a_exp is strictly lower triangular (explicit), a_imp lower triangular;
    a zero first implicit stage (classical ARS layout) is allowed — such a
    stage performs no solve.  ``gsa`` declares that both b rows equal the
    last rows of their tableaux, making the update the last stage state.
    """

    name: str
    order: int
    a_exp: tuple
    a_imp: tuple
    b_exp: tuple
    b_imp: tuple
    c_exp: tuple
    c_imp: tuple
    gsa: bool = False

    @property
    def s(self):
        return len(self.b_exp)

    def arrays(self):
        return (np.asarray(self.a_exp, dtype=np.float64),
                np.asarray(self.a_imp, dtype=np.float64),
                np.asarray(self.b_exp, dtype=np.float64),
                np.asarray(self.b_imp, dtype=np.float64))

    def validate(self):
        """Check shape, triangularity, row sums, stiff accuracy, order."""
        ae, ai, be, bi = self.arrays()
        s = self.s
        ce = np.asarray(self.c_exp, dtype=np.float64)
        ci = np.asarray(self.c_imp, dtype=np.float64)
        if ae.shape != (s, s) or ai.shape != (s, s):
            raise ValidationError(f"tableau {self.name}: matrix shape")
        if ce.shape != (s,) or ci.shape != (s,) or bi.shape != (s,):
            raise ValidationError(f"tableau {self.name}: vector shape")
        if np.any(ae[np.triu_indices(s)] != 0.0):
            raise ValidationError(
                f"tableau {self.name}: explicit matrix not strictly lower")
        if np.any(ai[np.triu_indices(s, 1)] != 0.0):
            raise ValidationError(
                f"tableau {self.name}: implicit matrix not lower")
        # implicit diagonal: every working stage needs a positive pivot;
        # an all-zero first row (ARS layout) is an inert stage
        start = 1 if not np.any(ai[0]) else 0
        if np.any(np.diag(ai)[start:] <= 0.0):
            raise ValidationError(
                f"tableau {self.name}: nonpositive implicit diagonal")
        if np.max(np.abs(ce - np.sum(ae, axis=1))) > _TOL_ROW:
            raise ValidationError(
                f"tableau {self.name}: explicit c row sums")
        if np.max(np.abs(ci - np.sum(ai, axis=1))) > _TOL_ROW:
            raise ValidationError(
                f"tableau {self.name}: implicit c row sums")
        if np.max(np.abs(bi - ai[-1])) > _TOL_ROW:
            raise ValidationError(
                f"tableau {self.name}: implicit part not stiffly accurate")
        if self.gsa and np.max(np.abs(be - ae[-1])) > _TOL_ROW:
            raise ValidationError(
                f"tableau {self.name}: gsa declared but explicit b row "
                "differs from the last stage")
        # order conditions
        if abs(np.sum(be) - 1.0) > _TOL_ORDER or abs(np.sum(bi) - 1.0) > _TOL_ORDER:
            raise ValidationError(f"tableau {self.name}: first-order sums")
        if self.order >= 2:
            for bb, cc, tag in ((be, ce, "exp/exp"), (bi, ci, "imp/imp"),
                                (be, ci, "exp/imp"), (bi, ce, "imp/exp")):
                if abs(bb @ cc - 0.5) > _TOL_ORDER:
                    raise ValidationError(
                        f"tableau {self.name}: order-2 condition {tag}")
        return self

    @property
    def reduces_to_last(self):
        """True when the b-weighted update equals the last stage state."""
        ae, ai, be, bi = self.arrays()
        return (np.max(np.abs(be - ae[-1])) <= _TOL_ROW
                and np.max(np.abs(bi - ai[-1])) <= _TOL_ROW)


_GAMMA = 1.0 - 1.0 / np.sqrt(2.0)
_DELTA = 1.0 - 1.0 / (2.0 * _GAMMA)

_BUILTINS = (
    ImexTableau(
        name="imex_euler",
        order=1,
        a_exp=((0.0,),),
        a_imp=((1.0,),),
        b_exp=(1.0,),
        b_imp=(1.0,),
        c_exp=(0.0,),
        c_imp=(1.0,),
        gsa=False,
    ),
    ImexTableau(
        name="ars222",
        order=2,
        a_exp=((0.0, 0.0, 0.0),
               (_GAMMA, 0.0, 0.0),
               (_DELTA, 1.0 - _DELTA, 0.0)),
        a_imp=((0.0, 0.0, 0.0),
               (0.0, _GAMMA, 0.0),
               (0.0, 1.0 - _GAMMA, _GAMMA)),
        b_exp=(_DELTA, 1.0 - _DELTA, 0.0),
        b_imp=(0.0, 1.0 - _GAMMA, _GAMMA),
        c_exp=(0.0, _GAMMA, 1.0),
        c_imp=(0.0, _GAMMA, 1.0),
        gsa=True,
    ),
)


def builtin_tableaux():
    """The shipped IMEX pairs, each validated."""
    return [tab.validate() for tab in _BUILTINS]


def get_tableau(name):
    for tab in _BUILTINS:
        if tab.name == name:
            return tab.validate()
    known = ", ".join(t.name for t in _BUILTINS)
    raise ValidationError(f"unknown tableau {name!r} (known: {known})")


@dataclass(frozen=True)
class StepConfig:
    """Time step, stiffness parameter, and CFL policy of a run."""

    dt: float
    epsilon: float
    cfl_target: float = 0.5

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError("dt must be positive")
        if not self.epsilon > 0:
            raise ValidationError("epsilon must be positive")


def cfl_dt(grid, e_max, cfl=0.5):
    """Transport-only time step: cfl / max(|v|max/dx, |E|max/dv).

    No collision (dv^2-type) restriction enters -- the stiff part is
    implicit.  Returns inf when both rates vanish (homogeneous, zero field).
    """
    rate = 0.0
    if grid.dx_dims:
        rate = np.max(np.abs(grid.v)) / grid.dx
    rate = max(rate, float(e_max) / grid.dv)
    return cfl / rate if rate > 0 else np.inf


class StageOps:
    """Model callbacks consumed by :func:`imex_step`.

    moments(vals) -> opaque stage moments handed to the other callbacks
    field(vals, m) -> per-x field or None
    transport(vals, efield) -> explicit tendency (x- plus v-advection)
    collision(vals, m) -> non-stiff collision part (enters with 1/eps)
    stiff_apply(vals, m) -> P(vals), unscaled
    stiff_solve(rhs, m, coeff) -> solution of (I - coeff P) f = rhs
    stiff_scale -> s multiplying P (penalization beta, or a collision
    frequency mu); coeff = a_kk dt s / eps is formed here.
    """

    def __init__(self, moments=None, field=None, transport=None,
                 collision=None, stiff_apply=None, stiff_solve=None,
                 stiff_scale=0.0):
        self.moments = moments
        self.field = field
        self.transport = transport
        self.collision = collision
        self.stiff_apply = stiff_apply
        self.stiff_solve = stiff_solve
        self.stiff_scale = stiff_scale


def imex_step(f, tab, cfg, ops, stage_hook=None):
    """Advance one IMEX step; returns the updated DistField.

    ``stage_hook(k, tag, vals, m)`` is called per stage with tag "pre"
    (the transport-accumulated state and its moments) and "post" (after
    the implicit solve) for diagnostics.
    """
    dt = cfg.dt
    eps = cfg.epsilon
    ae, ai, be, bi = tab.arrays()
    s = tab.s
    scale = ops.stiff_scale
    fn = f.values

    tends = [None] * s   # transport tendencies per stage
    colls = [None] * s   # non-stiff collision parts
    stiffs = [None] * s  # P(f_k), unscaled
    reduces = tab.reduces_to_last
    fk = fn

    for k in range(s):
        ft = fn
        for i in range(k):
            if ae[k, i] != 0.0 and tends[i] is not None:
                ft = ft + (dt * ae[k, i]) * tends[i]
        m = ops.moments(ft) if ops.moments else None
        if stage_hook is not None:
            stage_hook(k, "pre", ft, m)

        fb = ft
        for i in range(k):
            if ae[k, i] != 0.0 and colls[i] is not None:
                fb = fb + (dt * ae[k, i] / eps) * colls[i]
            if ai[k, i] != 0.0 and stiffs[i] is not None:
                fb = fb + (dt * ai[k, i] * scale / eps) * stiffs[i]
        coeff = ai[k, k] * dt * scale / eps
        if coeff != 0.0 and ops.stiff_solve is not None:
            fk = ops.stiff_solve(fb, m, coeff)
        else:
            fk = fb
        if stage_hook is not None:
            stage_hook(k, "post", fk, m)

        if reduces and k == s - 1:
            break  # the update is the last stage state; skip its tendencies
        efield = ops.field(fk, m) if ops.field else None
        if ops.transport is not None:
            tends[k] = ops.transport(fk, efield)
        if ops.collision is not None:
            colls[k] = ops.collision(fk, m)
        if ops.stiff_apply is not None:
            stiffs[k] = ops.stiff_apply(fk, m)

    if reduces:
        fnew = fk
    else:
        fnew = fn
        for k in range(s):
            if be[k] != 0.0 and tends[k] is not None:
                fnew = fnew + (dt * be[k]) * tends[k]
            if be[k] != 0.0 and colls[k] is not None:
                fnew = fnew + (dt * be[k] / eps) * colls[k]
            if bi[k] != 0.0 and stiffs[k] is not None:
                fnew = fnew + (dt * bi[k] * scale / eps) * stiffs[k]

    if not np.all(np.isfinite(fnew)):
        raise SolverAbort("non-finite state after IMEX update",
                          time=f.time + dt)
    return f.with_values(fnew, time=f.time + dt)
