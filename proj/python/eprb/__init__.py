"""Count-model fitting and event simulation for two-observer photon-pair experiments."""

from ._core import (
    Error,
    compound_variance,
    degrees_of_freedom,
    fit,
    quantum_probs,
    report,
    simulate,
    singlet_state,
    tabulate,
    trace_distance,
    werner_state,
    z_score,
)

__all__ = [
    "Error",
    "compound_variance",
    "degrees_of_freedom",
    "fit",
    "quantum_probs",
    "report",
    "simulate",
    "singlet_state",
    "tabulate",
    "trace_distance",
    "werner_state",
    "z_score",
]
__version__ = "0.1.0"
