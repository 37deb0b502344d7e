"""Pseudo-spectral simulation and diagnostics for 2.5-D compressible,
viscous, heat-conducting, non-resistive MHD on the periodic unit square."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    GoodUnknowns,
    ParameterError,
    Params,
    PerturbationState,
    PositivityError,
    PrimitiveState,
    Tendency,
)
from .spectral import Grid, get_grid  # noqa: E402
from .timestepper import IntegratorConfig, RunOutcome, Status, integrate, step  # noqa: E402

__all__ = [
    "Grid",
    "get_grid",
    "Params",
    "ParameterError",
    "PositivityError",
    "PrimitiveState",
    "PerturbationState",
    "GoodUnknowns",
    "Tendency",
    "IntegratorConfig",
    "RunOutcome",
    "Status",
    "integrate",
    "step",
]
