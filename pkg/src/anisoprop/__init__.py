"""Exact propagator, spectrum and wave-packet dynamics of a charged particle in a
2D anisotropic harmonic trap with a perpendicular magnetic field."""

from .classical import Endpoints, ModeCoefficients, PhasePoint, solve_modes, trajectory
from .errors import (
    CalibrationError,
    CausticError,
    ConvergenceError,
    DecoupledRegimeError,
    GridError,
)
from .model import DerivedFrequencies, OscillatorConfig, derive
from .propagator import Gauge, KernelValue, kernel

__version__ = "0.1.0"

__all__ = [
    "CalibrationError",
    "CausticError",
    "ConvergenceError",
    "DecoupledRegimeError",
    "DerivedFrequencies",
    "Endpoints",
    "Gauge",
    "GridError",
    "KernelValue",
    "ModeCoefficients",
    "OscillatorConfig",
    "PhasePoint",
    "derive",
    "kernel",
    "solve_modes",
    "trajectory",
]
