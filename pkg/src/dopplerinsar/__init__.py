"""Wideband and Doppler (ultra-narrowband) SAR interferometry on point scenes.

The package simulates data for point scatterers, forms backprojection
images on a flat reference surface, builds interferograms and recovers
scatterer heights by intersecting measurement surfaces.
"""
__version__ = "0.1.0"

from .exceptions import (AliasingWarning, AmbiguityError, ConfigError, GeometryError,
                         NotFoundError, StageDependencyError)
from .geometry import PhysicalConstants, Scatterer, Scene, Trajectory
from .forward import (UNBConfig, UNBDataSet, WidebandConfig, WidebandDataSet,
                      simulate_unb, simulate_wideband)
from .imaging import ComplexImage, ImageGrid, backproject_unb, backproject_wideband, find_peak
from .heightsolver import SearchGrid, solve_unb, solve_wb
from .estimators import AntennaPair, DopplerInSAR, WidebandInSAR

__all__ = [
    "AliasingWarning", "AmbiguityError", "AntennaPair", "ComplexImage", "ConfigError",
    "DopplerInSAR", "GeometryError", "ImageGrid", "NotFoundError", "PhysicalConstants",
    "Scatterer", "Scene", "SearchGrid", "StageDependencyError", "Trajectory", "UNBConfig",
    "UNBDataSet", "WidebandConfig", "WidebandDataSet", "WidebandInSAR", "backproject_unb",
    "backproject_wideband", "find_peak", "simulate_unb", "simulate_wideband", "solve_unb",
    "solve_wb",
]
