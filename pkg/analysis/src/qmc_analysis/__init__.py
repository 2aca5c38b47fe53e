"""Post-processing for lindqmc run directories.

Reads the CSV/JSON outputs of the simulator CLI (never its internals),
fits the two empirical scaling models, and renders the three standard
figure styles.
"""

from .fits import FitError, FitResult, fit_dim_scaling, fit_hermiticity
from .io import SchemaError

__all__ = [
    "FitError",
    "FitResult",
    "SchemaError",
    "fit_dim_scaling",
    "fit_hermiticity",
]

__version__ = "0.1.0"
