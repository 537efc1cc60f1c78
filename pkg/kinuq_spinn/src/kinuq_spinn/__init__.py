"""Separable physics-informed surrogate for collisional kinetic runs.

Low-rank tensor networks over (parameter draw, time, space, velocity)
trained on scaled kinetic/moment/field residuals plus sparse solver
data, then exported as sample archives a variance-reduced estimator
can pair with high-fidelity runs.
"""

from .archive import ArchiveWriter, pack_array, read_archive, unpack_array
from .export import export_surrogate_samples
from .loss import ap_loss
from .model import FieldBatch, SpinnModel, spinn_forward
from .nets import SirenSubnet, TensorNet
from .quadrature import eta_tables, gauss_legendre, separable_moments
from .train import Lion, TrainWindow, train_windowed

__all__ = [
    "ArchiveWriter", "pack_array", "read_archive", "unpack_array",
    "export_surrogate_samples", "ap_loss", "FieldBatch", "SpinnModel",
    "spinn_forward", "SirenSubnet", "TensorNet", "eta_tables",
    "gauss_legendre", "separable_moments", "Lion", "TrainWindow",
    "train_windowed",
]
