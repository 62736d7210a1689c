"""Coding schemes and rate bounds for rewritable storage channels with hidden state."""

from .awgn import prop1_bound, simulate_superposition
from .bounds import c1_curve_point, c2_curve_point, corollary_gap, fact1_capacity, kappa0
from .channel import AwgnChannelParams, UniformChannelParams, rewrite_until, write_once
from .errors import (
    BelowThreshold,
    ConfigError,
    Infeasible,
    InvalidParams,
    MaxWritesExceeded,
    NoRootBracket,
    OutOfSupport,
    RewritableError,
)
from .harness import ExperimentConfig, run_experiment
from .uniform_c1 import build_c1_layout, c1_rate
from .uniform_c2 import build_c2_layout, c2_cost, c2_rate, optimize_c2, solve_delta

__version__ = "0.1.0"
