"""A uniform vector interface over dense arrays and decision diagrams."""

from __future__ import annotations

import numpy as np

from . import amplitude as amp
from . import dd
from .amplitude import DEFAULT_TOLERANCE, DenseState, TolerancePolicy
from .circuit import Circuit, apply_circuit
from .errors import DomainError

BACKENDS = ("dense", "dd")


class DenseBackend:
    name = "dense"

    def __init__(self, tol: TolerancePolicy = DEFAULT_TOLERANCE):
        self.tol = tol

    def basis_state(self, n: int, index: int) -> DenseState:
        return DenseState.basis(n, index)

    def uniform(self, n: int) -> DenseState:
        return DenseState.uniform(n)

    def zero(self, n: int) -> DenseState:
        return DenseState.zero(n)

    def from_dense(self, vector) -> DenseState:
        arr = np.asarray(getattr(vector, "amplitudes", vector), dtype=np.complex128).reshape(-1)
        return DenseState(arr.shape[0].bit_length() - 1, arr)

    def apply(self, c: Circuit, s):
        return apply_circuit(c, s)

    def inner(self, a, b) -> complex:
        return amp.inner_product(a, b)

    def axpy(self, alpha: complex, x, y):
        return amp.axpy(alpha, x, y)

    def scale(self, alpha: complex, x):
        return amp.scale(alpha, x)

    def norm(self, x) -> float:
        return x.norm()

    def to_dense(self, x) -> DenseState:
        return x.to_dense()

    def project_out(self, u, vectors):
        """Modified Gram-Schmidt sweep of ``u`` against orthonormal ``vectors``.

        Returns the residual and the projection coefficients.
        """
        w = u
        coeffs = np.empty(len(vectors), dtype=np.complex128)
        for i, v in enumerate(vectors):
            coeffs[i] = amp.inner_product(v, w)
            w = amp.axpy(-coeffs[i], v, w)
        return w, coeffs

    def size(self, x) -> int:
        return len(x)

    def maybe_collect(self, live) -> None:
        pass


class DDBackend:
    name = "dd"
    GC_MIN = 200_000

    def __init__(self, tol: TolerancePolicy = DEFAULT_TOLERANCE, manager: dd.DDManager | None = None):
        self.tol = tol
        self.manager = manager if manager is not None else dd.DDManager(tol)
        self._gc_threshold = self.GC_MIN

    def basis_state(self, n: int, index: int) -> dd.DDState:
        return self.manager.basis_state(n, index)

    def uniform(self, n: int) -> dd.DDState:
        return self.manager.uniform(n)

    def zero(self, n: int) -> dd.DDState:
        return self.manager.zero(n)

    def from_dense(self, vector) -> dd.DDState:
        return self.manager.from_dense(vector)

    def apply(self, c: Circuit, s):
        return apply_circuit(c, s)

    def inner(self, a, b) -> complex:
        return dd.dd_inner_product(a, b)

    def axpy(self, alpha: complex, x, y):
        return dd.dd_axpy(alpha, x, y)

    def scale(self, alpha: complex, x):
        return dd.dd_scale(alpha, x)

    def norm(self, x) -> float:
        return x.norm()

    def to_dense(self, x) -> DenseState:
        return dd.dd_decode(x)

    def project_out(self, u, vectors):
        """Classical Gram-Schmidt pass: all coefficients first, then one combined traversal.

        Sequential MGS would rebuild a full diagram per basis vector.
        """
        coeffs = np.array([dd.dd_inner_product(v, u) for v in vectors], dtype=np.complex128)
        if not vectors:
            return u, coeffs
        w = dd.dd_lincomb([1.0] + (-coeffs).tolist(), [u] + list(vectors))
        return w, coeffs

    def size(self, x) -> int:
        """Node count, the DD analogue of a vector's storage size."""
        return dd.dd_node_count(x)

    def maybe_collect(self, live) -> None:
        """Garbage-collect the unique table once it has grown well past the live set."""
        mgr = self.manager
        if len(mgr) > self._gc_threshold:
            kept = mgr.collect(live)
            self._gc_threshold = max(self.GC_MIN, 4 * kept)


def make_backend(backend, tol: TolerancePolicy = DEFAULT_TOLERANCE):
    """Accept a backend instance or one of the names in :data:`BACKENDS`."""
    if isinstance(backend, (DenseBackend, DDBackend)):
        return backend
    if backend == "dense":
        return DenseBackend(tol)
    if backend == "dd":
        return DDBackend(tol)
    raise DomainError(f"unknown backend {backend!r}; choose from {', '.join(BACKENDS)}")
