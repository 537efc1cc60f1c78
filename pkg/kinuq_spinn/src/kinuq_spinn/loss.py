"""Physics-and-data training objective for the kinetic surrogate.

Each residual is squared and averaged over the batch's tensor-product
collocation grid; a supervised misfit on a second grid of data nodes
is added with its own weight.  Data dictionaries carry node arrays
("z", "t", "x", "v") plus targets "U" (4, [n_z,] n_t[, n_x]) and/or
"f" ([n_z,] n_t[, n_x], n_v1, n_v2), with axes matching the model's
coordinate list.
"""

import torch

from .model import FieldBatch


def _msq(field):
    return (field ** 2).mean()


def _data_nodes(model, data):
    slow = []
    if model.z_dims:
        if model.z_dims != 1 or "z" not in data:
            raise ValueError("data grids carry exactly one z axis")
        slow.append(data["z"])
    slow.append(data["t"])
    if model.dx_dims:
        slow.append(data["x"])
    velocity = None
    if "f" in data:
        velocity = [data["v"], data["v"]]
    return slow, velocity


def _data_misfit(model, data):
    slow, velocity = _data_nodes(model, data)
    batch = FieldBatch(model, slow, velocity)
    misfit = 0.0
    if "U" in data:
        target = torch.as_tensor(data["U"], dtype=batch.conserved().dtype)
        misfit = misfit + _msq(batch.conserved() - target)
    if "f" in data:
        target = torch.as_tensor(data["f"], dtype=batch.distribution().dtype)
        misfit = misfit + _msq(batch.distribution() - target)
    return misfit


def ap_loss(model, batch, epsilon, mu=1.0, data=None, data_weight=10.0):
    """Loss components on one collocation batch.

    Returns a dict with the mean-square "kinetic", "moment" and (for
    spatial models) "poisson" residuals, the weighted supervised
    "data" misfit when data nodes are given, and their sum "total".
    The kinetic residual carries the eps/(1+eps), mu/(1+eps)
    prefactors, so the objective stays bounded across the full
    collisionality range.
    """
    comps = {}
    comps["kinetic"] = _msq(batch.kinetic_residual(epsilon, mu))
    comps["moment"] = _msq(batch.moment_residual())
    total = comps["kinetic"] + comps["moment"]
    if model.dx_dims:
        comps["poisson"] = _msq(batch.poisson_residual())
        total = total + comps["poisson"]
    if data is not None:
        comps["data"] = _data_misfit(model, data)
        total = total + data_weight * comps["data"]
    comps["total"] = total
    return comps
