"""Relaxation of a two-bubble velocity distribution.

Both homogeneous collision models are run from the same randomized
two-bubble state: the quadratic operator and its calibrated-frequency
drift-diffusion surrogate drive the distribution toward the shared
Maxwellian while mass, momentum and energy stay put and the entropy
climbs monotonically.
"""

import pathlib

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from kinuq.fields import PhaseGrid, maxwellian_eval, moments_of
from kinuq.models import InitialCondition, ModelRun, run_model

# Parameters
nv = 32                      # velocity nodes per dimension
z = np.array([0.3, 0.25])    # bubble separation / imbalance draw
t_final = 4.0
dt = 0.01
out_times = (0.0, 0.2, 1.0, 4.0)

grid = PhaseGrid(v_nodes_per_dim=nv)
ic = InitialCondition("two_bubble")

trajs = {}
for model in ("HOM_LANDAU", "HOM_FP"):
    run = ModelRun(model=model, grid=grid, ic=ic, z=z, epsilon=1.0,
                   t_final=t_final, dt=dt, output_times=out_times)
    trajs[model] = run_model(run)
    tr = trajs[model]
    print(f"{model}:")
    print(f"  mass drift     {abs(tr.mass[-1] - tr.mass[0]):.2e}")
    print(f"  momentum drift {np.abs(tr.momentum[-1] - tr.momentum[0]).max():.2e}")
    print(f"  energy drift   {abs(tr.energy[-1] - tr.energy[0]):.2e}")
    print(f"  min entropy increment {np.diff(tr.entropy).min():.2e}")

# The shared endpoint: the Maxwellian with the initial moments
m0 = moments_of(trajs["HOM_LANDAU"].fields[0])
maxw = maxwellian_eval(m0, grid).values[0]
for model, tr in trajs.items():
    res = np.abs(tr.fields[-1].values[0] - maxw).sum() * grid.dv**2
    print(f"{model}: |f(T) - M| in L1 = {res:.3e}")

# Figure: snapshots of the quadratic-model run plus entropy histories
fig, axes = plt.subplots(2, 3, figsize=(12, 7))
v = grid.v
for ax, t_out, fld in zip(axes.flat, out_times,
                          trajs["HOM_LANDAU"].fields):
    cs = ax.contourf(v, v, fld.values[0].T, levels=24, cmap="magma")
    ax.set_title(f"quadratic model, t = {t_out:g}")
    ax.set_xlabel("vx")
    ax.set_ylabel("vy")
    fig.colorbar(cs, ax=ax)

ax = axes.flat[4]
for model, tr in trajs.items():
    ax.plot(tr.times, tr.entropy - tr.entropy[0], label=model)
ax.set_xlabel("t")
ax.set_ylabel("entropy gain")
ax.legend()
ax.set_title("entropy never decreases")

ax = axes.flat[5]
mid = nv // 2
ax.plot(v, trajs["HOM_LANDAU"].fields[0].values[0][:, mid],
        "k--", label="initial")
for model, tr in trajs.items():
    ax.plot(v, tr.fields[-1].values[0][:, mid], label=model)
ax.plot(v, maxw[:, mid], ":", label="Maxwellian")
ax.set_xlabel("vx")
ax.set_ylabel("f(vx, 0)")
ax.legend()
ax.set_title("shared equilibrium")

fig.tight_layout()
out = pathlib.Path(__file__).with_suffix(".png")
fig.savefig(out, dpi=110)
print(f"wrote {out}")
