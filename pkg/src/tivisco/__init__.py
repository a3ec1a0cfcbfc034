"""Transversely isotropic multi-mode Eyring viscoplasticity for UD thermoplastic composites."""

from .driver import CurveRecord, LoadProgram, PointSimulator, simulate
from .fixtures import load_material
from .material import (MaterialParams, MaterialState, PlasticParams, RelaxationSpectrum,
                       SolverSettings, integrate, update)

__all__ = ["CurveRecord", "LoadProgram", "PointSimulator", "simulate", "load_material",
           "MaterialParams", "MaterialState", "PlasticParams", "RelaxationSpectrum",
           "SolverSettings", "integrate", "update"]
__version__ = "0.1.0"
