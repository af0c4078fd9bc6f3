"""Graph quantum walks solved edge by edge through coupled two-site subsystems."""

from __future__ import annotations

from .decomposition import Decomposition, assemble, solve_flows, subsystem_amplitudes
from .efficiency import efficiency, sweep, trimer_efficiency, trimer_modes
from .errors import (ConsistencyError, ContourError, DegenerateSpectrumError, DimerflowError,
                     GraphError, NumericalError, ResonanceError, SingularSystemError)
from .flowcharts import chart
from .graph import (Edge, GraphSpec, Site, TrimerParams, ValidatedGraph, builtin, load_graph,
                    parse_graph, serialize_graph, validate)
from .modes import build_modes, find_poles, reconstruct
from .spectral import eigendecompose, modal_coefficients, oracle_efficiency, propagate

__version__ = "0.1.0"

__all__ = [
    "ConsistencyError", "ContourError", "Decomposition", "DegenerateSpectrumError",
    "DimerflowError", "Edge", "GraphError", "GraphSpec", "NumericalError", "ResonanceError",
    "SingularSystemError", "Site", "TrimerParams", "ValidatedGraph", "assemble", "build_modes",
    "builtin", "chart", "efficiency", "eigendecompose", "find_poles", "load_graph",
    "modal_coefficients", "oracle_efficiency", "parse_graph", "propagate", "reconstruct",
    "serialize_graph", "solve_flows", "subsystem_amplitudes", "sweep", "trimer_efficiency",
    "trimer_modes", "validate",
]
