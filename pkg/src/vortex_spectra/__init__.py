"""Quantum spectra and profiles of vortex rings and closed vortex filaments."""

from .constants import PRESETS, PhysicalConstants, preset
from .errors import (FlexPointError, GeometryError, NumericalError, SubQuantumRadiusError,
                     ValidationError, VortexSpectraError)
from .geometry import ClosedCurve

__all__ = [
    "PRESETS", "PhysicalConstants", "preset", "ClosedCurve",
    "VortexSpectraError", "ValidationError", "GeometryError", "NumericalError",
    "SubQuantumRadiusError", "FlexPointError",
]
__version__ = "0.1.0"
