"""Maxwell-type kinetic models with random restitution.

Granular gases in 3D and wealth exchange in 1D share the same analytic
machinery: moment kernels, Pareto indices, Fourier-distance contraction
rates, a stochastic particle solver and a self-similar profile solver.
"""
from . import _backend
from .errors import ConvergenceError, InvariantError, ValidationError
from .kinematics import CollisionRule3D, TradeForm, TradeRule1D, trade_rule
from .restitution import RestitutionLaw

__version__ = "0.1.0"
BACKEND = _backend.NAME

__all__ = [
    "BACKEND",
    "CollisionRule3D",
    "ConvergenceError",
    "InvariantError",
    "RestitutionLaw",
    "TradeForm",
    "TradeRule1D",
    "ValidationError",
    "trade_rule",
]
