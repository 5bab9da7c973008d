"""Lumping of quantum circuits: exact reduced models on invariant subspaces."""

from __future__ import annotations

from .amplitude import DEFAULT_TOLERANCE, DenseState, TolerancePolicy
from .circuit import Circuit, Gate, apply_circuit, family_circuit
from .errors import (
    CapacityError,
    ConfigError,
    DegenerateOutcomeError,
    DimensionError,
    DomainError,
    NumericalError,
    ParseError,
    QlumpError,
    RunTimeoutError,
    UnsupportedGateError,
)
from .lumping import LumpingBasis, ReducedSystem, SubspaceSpec, check_bcb, check_fcb, lump_krylov, lump_residual
from .simulate import recover_full, run_regime, simulate_reduced

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_TOLERANCE",
    "CapacityError",
    "Circuit",
    "ConfigError",
    "DegenerateOutcomeError",
    "DenseState",
    "DimensionError",
    "DomainError",
    "Gate",
    "LumpingBasis",
    "NumericalError",
    "ParseError",
    "QlumpError",
    "ReducedSystem",
    "RunTimeoutError",
    "SubspaceSpec",
    "TolerancePolicy",
    "UnsupportedGateError",
    "apply_circuit",
    "check_bcb",
    "check_fcb",
    "family_circuit",
    "lump_krylov",
    "lump_residual",
    "recover_full",
    "run_regime",
    "simulate_reduced",
]
