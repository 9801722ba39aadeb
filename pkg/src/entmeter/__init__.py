"""Entanglement monotones as expectation values of local-unitary-invariant observables on copies of a state."""

from ._backend import BACKEND
from .invariants import ObservableSpec, expectation, twirl_invariance_check
from .mixedbounds import BoundConfig, BoundReport, concurrence_lower_bound, inequality_audit, v_operator
from .monotones import MONOTONES, concurrence_pure, g_concurrence_3x3, g_concurrence_4x4, tangle_pure
from .tensorkit import DensityOperator, LegLayout, StateVector

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BoundConfig",
    "BoundReport",
    "DensityOperator",
    "LegLayout",
    "MONOTONES",
    "ObservableSpec",
    "StateVector",
    "concurrence_lower_bound",
    "concurrence_pure",
    "expectation",
    "g_concurrence_3x3",
    "g_concurrence_4x4",
    "inequality_audit",
    "tangle_pure",
    "twirl_invariance_check",
    "v_operator",
]
