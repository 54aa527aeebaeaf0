"""Simulation and analysis of interactive coding over AWGN channels with noisy feedback."""

from ._backend import backend_name
from .errors import ConfigError, InfeasibleParametersError, NoisyFbError, OutOfRegimeError
from .numerics import capacity, capacity_gap, gamma0, qfunc, qinv
from .schemes import SchemeParams, SystemParams

__all__ = [
    "ConfigError", "InfeasibleParametersError", "NoisyFbError", "OutOfRegimeError",
    "SchemeParams", "SystemParams", "backend_name", "capacity", "capacity_gap", "gamma0",
    "qfunc", "qinv",
]
__version__ = "0.1.0"
