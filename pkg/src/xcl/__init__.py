"""Uncertainty-aware knowledge distillation lab.

A small trainable dense-network core, the distillation losses (categorical
KD, Gaussian NLL/KL), extended transfer-set samplers (mixing, block mixing,
noise, generator conditioning), and an experiment harness that runs the
studies end to end on synthetic data.
"""

from .rng import Rng
from .errors import (
    ArtifactError,
    ConfigError,
    DataError,
    NumericError,
    ParseError,
    ShapeError,
    XCLError,
)

__version__ = "0.1.0"

__all__ = [
    "Rng",
    "XCLError",
    "ConfigError",
    "ShapeError",
    "DataError",
    "ParseError",
    "ArtifactError",
    "NumericError",
    "__version__",
]
