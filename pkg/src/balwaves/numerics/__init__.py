"""Numerical kernels shared by the model, wave and spectrum layers."""

from .linalg import Eig2, eig2
from .ode import (
    IntegrationError,
    NoEventBeforeZMax,
    NonFiniteState,
    StepSizeUnderflow,
    Trajectory,
    integrate_to_event,
    solve_ivp,
)
from .quad import InvalidInterval, QuadResult, ToleranceNotReached, gk15, quad_adaptive
from .roots import NoSignChange, find_root_bracketed, scan_brackets

__all__ = [
    "Eig2",
    "eig2",
    "IntegrationError",
    "NoEventBeforeZMax",
    "NonFiniteState",
    "StepSizeUnderflow",
    "Trajectory",
    "integrate_to_event",
    "solve_ivp",
    "InvalidInterval",
    "QuadResult",
    "ToleranceNotReached",
    "gk15",
    "quad_adaptive",
    "NoSignChange",
    "find_root_bracketed",
    "scan_brackets",
]
