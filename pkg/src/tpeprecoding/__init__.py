"""Truncated polynomial expansion (TPE) precoding for massive MIMO downlinks.

Submodules
----------
config       system parameters and power allocations
channel      correlated Rayleigh channels and imperfect CSI
precoders    RZF, TPE and MRT precoders
asymptotics  large-system deterministic equivalents
optimizer    optimal TPE coefficients
evaluation   empirical SINR and Monte Carlo sweeps
complexity   operation counts per coherence period
cli          command-line entry point
"""

__version__ = "0.1.0"

from .errors import ConfigError, ConvergenceError, NumericalError  # noqa: E402
from .config import (  # noqa: E402
    CovarianceSpec,
    PowerAllocation,
    SystemConfig,
    class_power,
    uniform_power,
    validate_config,
)
from .precoders import TpeWeights  # noqa: E402

__all__ = [
    "__version__",
    "ConfigError",
    "ConvergenceError",
    "NumericalError",
    "CovarianceSpec",
    "PowerAllocation",
    "SystemConfig",
    "class_power",
    "uniform_power",
    "validate_config",
    "TpeWeights",
]
