"""Simulation and verification toolkit for extremes of multiple-stable renewal processes."""

from .errors import RegimeError, ResourceLimitError
from .intersection import (Regime, p_prime, parse_beta, regime, shape_constant, terminating_prob,
                           tail_pattern_law)
from .limits import limit_constant, normalization, regime_report
from .model import ModelParams, evaluate_path, sample_environment, simulate_path
from .renewal import default_law, renewal_mass, renewal_tables
from .streams import STREAM_ALGORITHM, seed_stream

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "RegimeError",
    "ResourceLimitError",
    "Regime",
    "ModelParams",
    "STREAM_ALGORITHM",
    "default_law",
    "evaluate_path",
    "limit_constant",
    "normalization",
    "p_prime",
    "parse_beta",
    "regime",
    "regime_report",
    "renewal_mass",
    "renewal_tables",
    "sample_environment",
    "seed_stream",
    "shape_constant",
    "simulate_path",
    "tail_pattern_law",
    "terminating_prob",
]
