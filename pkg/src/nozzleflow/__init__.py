"""Steady subsonic Euler flow through unbounded two-dimensional nozzles.

The flow is computed through its stream function, which solves a quasilinear
elliptic equation whose coefficients depend on the Bernoulli and entropy
functions transported from the inlet.
"""
from . import (asymptotics, closure, continuation, discontinuity, fields, geometry,
               incompressible, inlet, solver)
from .errors import (BranchError, ConvergenceError, DomainError, ExtractionError,
                     NozzleFlowError, ParameterError, TransformError, ValidationError)

__version__ = "0.1.0"

__all__ = [
    "asymptotics", "closure", "continuation", "discontinuity", "fields", "geometry",
    "incompressible", "inlet", "solver",
    "BranchError", "ConvergenceError", "DomainError", "ExtractionError", "NozzleFlowError",
    "ParameterError", "TransformError", "ValidationError",
]
