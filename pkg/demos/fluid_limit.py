"""Strong collisions push the kinetic solver onto the fluid solution.

The collisional kinetic model is run at a sequence of shrinking
Knudsen numbers and compared, moment by moment, with the fluid
solver started from the same perturbed wave.  The distance decreases
with epsilon until it saturates at the velocity-resolution floor.
"""

import pathlib

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from kinuq.fields import PhaseGrid
from kinuq.models import InitialCondition, ModelRun, default_x_bounds, run_model

# Parameters
nx = 33
nv = 32
t_final = 1.0
eps_sweep = (1e-1, 1e-2, 1e-3)
z = np.array([0.0])

grid = PhaseGrid(dx_dims=1, x_nodes=nx, x_bounds=default_x_bounds("linear_ld"),
                 v_nodes_per_dim=nv)
ic = InitialCondition("linear_ld")

ep = run_model(ModelRun(model="EP", grid=grid, ic=ic, z=z,
                        t_final=t_final, dt=0.008, output_times=(t_final,)))
m_ep = ep.moments[-1]

dists = []
kinetic = {}
for eps in eps_sweep:
    traj = run_model(ModelRun(model="VPFP", grid=grid, ic=ic, z=z,
                              epsilon=eps, t_final=t_final,
                              output_times=(t_final,)))
    kinetic[eps] = traj.moments[-1]
    d = np.abs(traj.moments[-1].as_array() - m_ep.as_array()).sum() * grid.dx
    dists.append(d)
    print(f"epsilon = {eps:.0e}: moment distance to the fluid run = {d:.3e}")

fig, axes = plt.subplots(1, 2, figsize=(11, 4.5))
x = grid.x
axes[0].plot(x, m_ep.rho, "k-", lw=2, label="fluid solver")
for eps in eps_sweep:
    axes[0].plot(x, kinetic[eps].rho, "--", label=f"kinetic, eps = {eps:.0e}")
axes[0].set_xlabel("x")
axes[0].set_ylabel("density at t = 1")
axes[0].legend()
axes[0].set_title("density profiles converge")

axes[1].loglog(eps_sweep, dists, "o-")
axes[1].set_xlabel("epsilon")
axes[1].set_ylabel("L1 moment distance")
axes[1].set_title("distance shrinks with collisionality")
fig.tight_layout()
out = pathlib.Path(__file__).with_suffix(".png")
fig.savefig(out, dpi=110)
print(f"wrote {out}")
