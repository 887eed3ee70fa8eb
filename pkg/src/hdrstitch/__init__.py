"""Panoramic stitching of three differently exposed, overlapping views.

Pipeline stages: histogram-based intensity mapping estimation between
adjacent views, panorama assembly at each exposure level, multi-scale
exposure fusion, and gradient-domain detail recovery.
"""

from .core import (
    InputError,
    PanoLayout,
    ViewSet,
    load_viewset,
    quantize,
    synthesize_test_scene,
    to_float,
)
from .detail import ConvergenceError, SolverConfig
from .pipeline import StitchConfig, StitchResult, stitch

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "InputError",
    "PanoLayout",
    "SolverConfig",
    "StitchConfig",
    "StitchResult",
    "ViewSet",
    "load_viewset",
    "quantize",
    "stitch",
    "synthesize_test_scene",
    "to_float",
    "__version__",
]
