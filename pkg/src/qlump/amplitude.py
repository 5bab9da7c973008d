"""Complex scalars, tolerances and the small dense linear algebra used everywhere.

Amplitudes are plain Python/numpy ``complex`` values.  Basis index ``d`` of a
dense state is the integer whose bit ``q`` is the value of qubit ``q`` (qubit 0
is the least significant bit).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DimensionError, DomainError

#: Largest qubit count for which a full ``2^n x 2^n`` unitary may be built.
N_DENSE_CAP = 14
#: Largest qubit count for a dense state vector.
N_STATE_CAP = 26


@dataclass(frozen=True)
class TolerancePolicy:
    """Numerical tolerances.

    eps_amp
        Scalar equality; also the grid used to key decision-diagram nodes.
    eps_norm
        Normalization checks and projector/measurement certificates.
    eps_rank
        Linear-dependence cutoff when orthogonalizing Krylov vectors.
    eps_unitary
        Bound on ``max |M^H M - I|`` for reduced maps.
    """

    eps_amp: float = 1e-12
    eps_norm: float = 1e-9
    eps_rank: float = 1e-9
    eps_unitary: float = 1e-9

    def __post_init__(self):
        for name in ("eps_amp", "eps_norm", "eps_rank", "eps_unitary"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise DomainError(f"{name} must be a positive finite number, got {value!r}")
        if self.eps_rank < self.eps_amp:
            raise DomainError("eps_rank must be >= eps_amp")


DEFAULT_TOLERANCE = TolerancePolicy()


def amplitudes_close(a: complex, b: complex, tol: TolerancePolicy = DEFAULT_TOLERANCE) -> bool:
    return abs(complex(a) - complex(b)) <= tol.eps_amp


class DenseState:
    """A vector of ``2^n`` complex amplitudes.

    The stored array is marked read-only; operations always return new states.
    """

    __slots__ = ("n", "amplitudes")

    def __init__(self, n: int, amplitudes, *, copy: bool = True):
        if n < 0:
            raise DomainError("qubit count must be nonnegative")
        if n > N_STATE_CAP:
            raise CapacityError(f"dense states are capped at {N_STATE_CAP} qubits, got {n}")
        arr = np.array(amplitudes, dtype=np.complex128, copy=copy).reshape(-1)
        if arr.shape[0] != 1 << n:
            raise DimensionError(f"expected {1 << n} amplitudes for n={n}, got {arr.shape[0]}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("amplitudes must be finite")
        arr.setflags(write=False)
        self.n = n
        self.amplitudes = arr

    @classmethod
    def basis(cls, n: int, index: int) -> "DenseState":
        if not 0 <= index < (1 << n):
            raise IndexError(f"basis index {index} out of range for n={n}")
        if n > N_STATE_CAP:
            raise CapacityError(f"dense states are capped at {N_STATE_CAP} qubits, got {n}")
        arr = np.zeros(1 << n, dtype=np.complex128)
        arr[index] = 1.0
        return cls(n, arr, copy=False)

    @classmethod
    def uniform(cls, n: int) -> "DenseState":
        if n > N_STATE_CAP:
            raise CapacityError(f"dense states are capped at {N_STATE_CAP} qubits, got {n}")
        return cls(n, np.full(1 << n, 1.0 / math.sqrt(1 << n), dtype=np.complex128), copy=False)

    @classmethod
    def zero(cls, n: int) -> "DenseState":
        if n > N_STATE_CAP:
            raise CapacityError(f"dense states are capped at {N_STATE_CAP} qubits, got {n}")
        return cls(n, np.zeros(1 << n, dtype=np.complex128), copy=False)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def is_normalized(self, tol: TolerancePolicy = DEFAULT_TOLERANCE) -> bool:
        return abs(self.norm() - 1.0) <= tol.eps_norm

    def to_dense(self) -> "DenseState":
        return self

    def __len__(self):
        return self.amplitudes.shape[0]

    def __repr__(self):
        return f"DenseState(n={self.n}, norm={self.norm():.6g})"


def _check_same_n(a: DenseState, b: DenseState):
    if a.n != b.n:
        raise DimensionError(f"state dimensions differ: n={a.n} vs n={b.n}")


def inner_product(a: DenseState, b: DenseState) -> complex:
    """``<a|b>``, conjugate-linear in ``a``."""
    _check_same_n(a, b)
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def axpy(alpha: complex, x: DenseState, y: DenseState) -> DenseState:
    """Return ``y + alpha * x``."""
    _check_same_n(x, y)
    return DenseState(x.n, y.amplitudes + complex(alpha) * x.amplitudes, copy=False)


def scale(alpha: complex, x: DenseState) -> DenseState:
    return DenseState(x.n, complex(alpha) * x.amplitudes, copy=False)


def mat_vec(matrix, vector) -> np.ndarray:
    m = np.asarray(matrix, dtype=np.complex128)
    v = np.asarray(vector, dtype=np.complex128).reshape(-1)
    if m.ndim != 2 or m.shape[1] != v.shape[0]:
        raise DimensionError(f"cannot multiply {m.shape} matrix with vector of length {v.shape[0]}")
    return m @ v


def unitarity_residual(matrix) -> float:
    """``max |M^H M - I|`` over all entries."""
    m = np.asarray(matrix, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"unitarity residual needs a square matrix, got shape {m.shape}")
    if m.shape[0] == 0:
        return 0.0
    return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))))
