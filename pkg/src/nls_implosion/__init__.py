"""Numerics workbench for smooth self-similar imploding profiles of the
defocusing nonlinear Schrodinger equation at (d, p) = (8, 3)."""

from .errors import (
    WorkbenchError,
    DomainError,
    ConsistencyError,
    SonicCrossingError,
    BlowupError,
    InsufficientRangeError,
    WindowError,
    VacuumError,
    RangeError,
    CFLError,
    PositivityError,
    ResolutionError,
)
from .phase_portrait import R_STAR, PhasePoint, ProfileParams
from .report import CheckResult, VerificationReport

__version__ = "0.1.0"
