"""Integral quantities along a flow: virial, smoothing, Hardy and Strichartz."""

from .hardy import HardyReport, hardy_check
from .smoothing import SmoothingReport, dual_dyadic_norm, smoothing_norm
from .strichartz import StrichartzReport, strichartz_norm
from .virial import (VirialReport, theta, virial_first_identity_residual, virial_report,
                     virial_second_identity_residual)

__all__ = [
    "HardyReport", "SmoothingReport", "StrichartzReport", "VirialReport", "dual_dyadic_norm", "hardy_check",
    "smoothing_norm", "strichartz_norm", "theta", "virial_first_identity_residual", "virial_report",
    "virial_second_identity_residual",
]
