"""Physics-only iterative baseline."""

from .lsqr import LsqrOptions, LsqrReconstruction, LsqrResult, lsqr, lsqr_reconstruct

__all__ = [
    "LsqrOptions",
    "LsqrReconstruction",
    "LsqrResult",
    "lsqr",
    "lsqr_reconstruct",
]
