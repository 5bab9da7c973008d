"""Minimal constrained bisimulations of a circuit.

A lumping basis is an orthonormal list ``v_0..v_{d-1}``.  Read as the rows of
``L`` (``v_i^dagger``) it is a forward bisimulation; read as the columns of
``L^dagger`` it is a backward one.  Both procedures below return the smallest
``U``-invariant subspace containing the seeds, together with the reduced map
``U_hat[i, j] = <v_i | U v_j>``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .amplitude import DEFAULT_TOLERANCE, N_DENSE_CAP, DenseState, TolerancePolicy, unitarity_residual
from .backend import DDBackend, DenseBackend, make_backend
from .circuit import Circuit, apply_circuit
from .dd import dd_export, dd_import, dd_lincomb
from .errors import CapacityError, DimensionError, DomainError, NumericalError, ParseError, RunTimeoutError

D_MAX_DEFAULT = 4096
#: Largest qubit count accepted by the brute-force minimality oracle.
ORACLE_CAP = 10
PRESETS = ("ket0", "psi", "ket1")


@dataclass(frozen=True)
class SubspaceSpec:
    """Seeds spanning the constraint subspace.

    Exactly one of ``preset``, ``indices`` (one basis-state seed per index) or
    ``vectors`` (explicit dense amplitudes) is used.
    """

    preset: str | None = None
    indices: tuple[int, ...] = ()
    vectors: tuple[np.ndarray, ...] = ()
    label: str | None = None

    def __post_init__(self):
        given = sum([self.preset is not None, bool(self.indices), bool(self.vectors)])
        if given != 1:
            raise DomainError("give exactly one of preset, indices or vectors")
        if self.preset is not None and self.preset not in PRESETS:
            raise DomainError(f"unknown seed preset {self.preset!r}; choose from {', '.join(PRESETS)}")
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        vecs = tuple(np.asarray(v, dtype=np.complex128).reshape(-1) for v in self.vectors)
        for v in vecs:
            if not np.any(v):
                raise DomainError("seed vectors must be nonzero")
        object.__setattr__(self, "vectors", vecs)

    @classmethod
    def ket0(cls) -> "SubspaceSpec":
        return cls(preset="ket0")

    @classmethod
    def psi(cls) -> "SubspaceSpec":
        return cls(preset="psi")

    @classmethod
    def ket1(cls) -> "SubspaceSpec":
        return cls(preset="ket1")

    @classmethod
    def from_indices(cls, indices) -> "SubspaceSpec":
        return cls(indices=tuple(indices))

    @classmethod
    def from_vectors(cls, vectors, label: str | None = None) -> "SubspaceSpec":
        return cls(vectors=tuple(vectors), label=label)

    @classmethod
    def parse(cls, text: str) -> "SubspaceSpec":
        """``ket0 | psi | ket1 | indices:i,j,... | file:path``.

        A seed file is either ``.npy`` (1-D, or 2-D with one seed per row) or
        text with one seed per line written as ``re,im`` tokens.
        """
        text = text.strip()
        if text in PRESETS:
            return cls(preset=text)
        kind, _, rest = text.partition(":")
        if kind == "indices" and rest:
            try:
                return cls(indices=tuple(int(t) for t in rest.split(",") if t.strip()))
            except ValueError as exc:
                raise DomainError(f"bad index list {rest!r}") from exc
        if kind == "file" and rest:
            return cls(vectors=tuple(load_seed_file(rest)), label=text)
        raise DomainError(f"unrecognized seed spec {text!r}")

    def describe(self) -> str:
        if self.preset is not None:
            return self.preset
        if self.indices:
            return "indices:" + ",".join(str(i) for i in self.indices)
        return self.label or f"vectors:{len(self.vectors)}"

    def count(self) -> int:
        if self.preset is not None:
            return 1
        return len(self.indices) or len(self.vectors)

    def dense_vectors(self, n: int) -> list[np.ndarray]:
        return [self.backend_states(n, DenseBackend())[i].amplitudes for i in range(self.count())]

    def backend_states(self, n: int, bk) -> list:
        size = 1 << n
        if self.preset == "ket0":
            return [bk.basis_state(n, 0)]
        if self.preset == "psi":
            return [bk.uniform(n)]
        if self.preset == "ket1":
            if n < 1:
                raise DomainError("ket1 needs at least one qubit")
            return [bk.basis_state(n, 1)]
        if self.indices:
            for i in self.indices:
                if not 0 <= i < size:
                    raise DomainError(f"seed index {i} out of range for n={n}")
            return [bk.basis_state(n, i) for i in self.indices]
        for v in self.vectors:
            if v.shape[0] != size:
                raise DimensionError(f"seed vector has {v.shape[0]} amplitudes, expected {size}")
        return [bk.from_dense(v) for v in self.vectors]


def load_seed_file(path: str | Path) -> list[np.ndarray]:
    path = Path(path)
    if path.suffix == ".npy":
        arr = np.load(path)
        return [np.asarray(arr)] if arr.ndim == 1 else [np.asarray(row) for row in arr]
    vectors = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            vals = []
            for tok in line.split():
                re_s, _, im_s = tok.partition(",")
                vals.append(complex(float(re_s), float(im_s or 0.0)))
        except ValueError as exc:
            raise ParseError(lineno, f"bad amplitude in seed file: {exc}") from exc
        vectors.append(np.array(vals, dtype=np.complex128))
    if not vectors:
        raise ParseError(0, f"seed file {path} holds no vectors")
    return vectors


@dataclass
class LumpingBasis:
    n: int
    vectors: list
    backend: DenseBackend | DDBackend

    @property
    def d(self) -> int:
        return len(self.vectors)

    def column_matrix(self) -> np.ndarray:
        """``L^dagger`` as a dense ``N x d`` array."""
        if not self.vectors:
            return np.zeros((1 << self.n, 0), dtype=np.complex128)
        return np.stack([self.backend.to_dense(v).amplitudes for v in self.vectors], axis=1)

    def row_matrix(self) -> np.ndarray:
        """``L`` as a dense ``d x N`` array."""
        return self.column_matrix().conj().T

    def coefficients(self, state) -> np.ndarray:
        """``L |state>``."""
        return np.array([self.backend.inner(v, state) for v in self.vectors], dtype=np.complex128)

    def residual(self, state):
        """``(I - P_L) |state>``."""
        return self.backend.project_out(state, self.vectors)[0]

    def combine(self, coeffs):
        """``L^dagger coeffs = sum_i coeffs[i] v_i`` on the basis' backend."""
        return _linear_combination(self.backend, self.n, coeffs, self.vectors)

    def orthonormality_error(self) -> float:
        d = self.d
        gram = np.array([[self.backend.inner(a, b) for b in self.vectors] for a in self.vectors])
        return float(np.max(np.abs(gram - np.eye(d)))) if d else 0.0


def _linear_combination(bk, n: int, coeffs, states):
    coeffs = np.asarray(coeffs, dtype=np.complex128).reshape(-1)
    if isinstance(bk, DDBackend):
        return dd_lincomb(coeffs.tolist(), states) if states else bk.zero(n)
    total = np.zeros(1 << n, dtype=np.complex128)
    for c, v in zip(coeffs, states):
        total += c * v.amplitudes
    return DenseState(n, total, copy=False)


class ImplicitBasis(LumpingBasis):
    """Orthonormal basis stored as ``V = K C``.

    ``K`` holds the raw Krylov vectors (often far more compact as decision
    diagrams than their orthonormalized combinations) and ``C`` is upper
    triangular.  Explicit vectors are only built when something asks for them.
    """

    def __init__(self, n: int, raws: list, coeffs: np.ndarray, backend, gram: np.ndarray):
        self.n = n
        self.backend = backend
        self.raws = raws
        self.coeffs = coeffs
        self.gram = gram
        self._vectors = None

    def __repr__(self) -> str:
        return f"ImplicitBasis(n={self.n}, d={self.d}, backend={self.backend.name!r})"

    __eq__ = object.__eq__
    __hash__ = object.__hash__

    @property
    def d(self) -> int:
        return self.coeffs.shape[1]

    @property
    def vectors(self) -> list:
        if self._vectors is None:
            self._vectors = [
                _linear_combination(self.backend, self.n, self.coeffs[: k + 1, k], self.raws[: k + 1])
                for k in range(self.d)
            ]
        return self._vectors

    def column_matrix(self) -> np.ndarray:
        if not self.raws:
            return np.zeros((1 << self.n, 0), dtype=np.complex128)
        k = np.stack([self.backend.to_dense(r).amplitudes for r in self.raws], axis=1)
        return k @ self.coeffs

    def coefficients(self, state) -> np.ndarray:
        g = np.array([self.backend.inner(r, state) for r in self.raws], dtype=np.complex128)
        return self.coeffs.conj().T @ g

    def combine(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=np.complex128).reshape(-1)
        return _linear_combination(self.backend, self.n, self.coeffs @ coeffs, self.raws)

    def residual(self, state):
        c = self.coefficients(state)
        weights = np.concatenate([[1.0], -(self.coeffs @ c)])
        return _linear_combination(self.backend, self.n, weights, [state] + list(self.raws))

    def orthonormality_error(self) -> float:
        """Measured through the Gram matrix of the raw vectors."""
        d = self.d
        g = self.coeffs.conj().T @ self.gram @ self.coeffs
        return float(np.max(np.abs(g - np.eye(d)))) if d else 0.0


@dataclass
class ReducedSystem:
    basis: LumpingBasis
    U_hat: np.ndarray
    seeds: tuple[str, ...]
    circuit_name: str
    method: str = "krylov"
    tol: TolerancePolicy = DEFAULT_TOLERANCE
    stats: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def d(self) -> int:
        return self.basis.d

    @property
    def reduction_ratio(self) -> float:
        """``d / 2^n`` as a fraction."""
        return self.d / float(1 << self.n)

    def unitarity_residual(self) -> float:
        return unitarity_residual(self.U_hat)


def _check_deadline(deadline: float | None, d: int, what: str):
    if deadline is not None and time.monotonic() > deadline:
        raise RunTimeoutError(f"{what} timed out at d={d}", partial={"d": d})


#: Rounding error injected into each new candidate, relative to its norm.
UNIT_NOISE = float(np.finfo(np.float64).eps)
#: A residual within this factor of the propagated rounding error counts as dependent.
NOISE_FACTOR = 16.0


def _independent(r: float, unorm: float, noise: float, tol: TolerancePolicy) -> bool:
    """Dependency test: ``r`` must clear both ``eps_rank`` and the candidate's noise floor.

    Rounding error in ``v_k`` that lies outside the invariant subspace is not
    removed by orthogonalization, and normalizing by a small residual ``r``
    amplifies it by ``1/r``.  ``noise`` carries that amplified estimate, so deep
    chains with several small residuals do not mistake it for a new direction.
    """
    return r >= max(tol.eps_rank * max(1.0, unorm), NOISE_FACTOR * noise * unorm)


def _orthogonalize(bk, u, vectors):
    """One projection pass, repeated once when the residual lost more than 1/sqrt(2).

    Returns ``(residual, residual_norm, input_norm, coefficients)``.
    """
    unorm = bk.norm(u)
    w, coeffs = bk.project_out(u, vectors)
    r = bk.norm(w)
    if vectors and r < unorm / math.sqrt(2.0):
        w, more = bk.project_out(w, vectors)
        coeffs = coeffs + more
        r = bk.norm(w)
    return w, r, unorm, coeffs


def _prepare(c: Circuit, spec: SubspaceSpec, tol: TolerancePolicy, backend, d_max: int):
    if d_max < 1:
        raise DomainError("d_max must be at least 1")
    bk = make_backend(backend, tol)
    seeds = spec.backend_states(c.n, bk)
    for s in seeds:
        if bk.norm(s) <= tol.eps_norm:
            raise DomainError("seed state is (numerically) zero")
    return bk, seeds


def _reduced_matrix(bk, vectors, images) -> np.ndarray:
    d = len(vectors)
    u_hat = np.empty((d, d), dtype=np.complex128)
    for j, img in enumerate(images):
        for i, v in enumerate(vectors):
            u_hat[i, j] = bk.inner(v, img)
    return u_hat


class _IllConditioned(Exception):
    """The raw Krylov vectors are too close to dependent for Gram arithmetic."""


#: Accept a raw candidate through the Gram matrix only above this relative residual.
GRAM_ACCEPT = 1e-3
#: Below this relative residual the candidate is checked explicitly for dependence.
GRAM_DEPENDENT = 1e-6
#: Largest Gram condition number for which the implicit basis stays orthonormal to ~1e-11.
GRAM_COND_MAX = 1e5


def _gram_condition(gram: np.ndarray) -> float:
    return float(np.linalg.cond(gram)) if gram.size else 1.0


def _krylov_gram(c: Circuit, bk, seeds, tol: TolerancePolicy, d_max: int, deadline):
    """Krylov iteration on the raw powers ``U^k z``, orthonormalized in coefficient space.

    Only the raw vectors are held as backend states, together with their Gram
    matrix ``G`` and an upper-triangular ``C`` with ``V = K C`` orthonormal.
    Raises :class:`_IllConditioned` once ``G`` cannot be trusted.
    """
    raws: list = []
    images: list = []
    gram = np.zeros((0, 0), dtype=np.complex128)
    coeffs = np.zeros((0, 0), dtype=np.complex128)
    # terminal image of each seed chain: (index of its source, inner products with raws known then)
    terminal: dict[int, np.ndarray] = {}
    for z in seeds:
        u = bk.scale(1.0 / bk.norm(z), z)
        source = None
        while True:
            k = len(raws)
            g = np.array([bk.inner(r, u) for r in raws], dtype=np.complex128)
            uu = bk.inner(u, u).real
            a = coeffs @ (coeffs.conj().T @ g)
            a = a + coeffs @ (coeffs.conj().T @ (g - gram @ a))
            res2 = uu - 2.0 * np.vdot(a, g).real + np.vdot(a, gram @ a).real
            rho = math.sqrt(max(res2, 0.0))
            unorm = math.sqrt(uu)
            ratio = rho / unorm
            if ratio < GRAM_DEPENDENT:
                w = _linear_combination(bk, c.n, np.concatenate([[1.0], -a]), [u] + raws)
                if bk.norm(w) >= tol.eps_rank * max(1.0, unorm):
                    raise _IllConditioned("nearly dependent Krylov vector")
                if source is not None:
                    terminal[source] = g
                break
            if ratio < GRAM_ACCEPT:
                raise _IllConditioned(f"relative residual {ratio:.2e} too small for Gram arithmetic")
            if k >= d_max:
                raise CapacityError(f"reduced dimension exceeds d_max={d_max}", partial_d=k)
            raws.append(u)
            grown = np.zeros((k + 1, k + 1), dtype=np.complex128)
            grown[:k, :k] = gram
            grown[:k, k] = g
            grown[k, :k] = g.conj()
            grown[k, k] = uu
            gram = grown
            col = np.zeros(k + 1, dtype=np.complex128)
            col[:k] = -a
            col[k] = 1.0
            grown = np.zeros((k + 1, k + 1), dtype=np.complex128)
            grown[:k, :k] = coeffs
            grown[:, k] = col / rho
            coeffs = grown
            if (k + 1) & k == 0 and _gram_condition(gram) > GRAM_COND_MAX:
                raise _IllConditioned("Gram matrix of the raw Krylov vectors is ill-conditioned")
            u = bk.apply(c, u)
            images.append(u)
            source = k
            bk.maybe_collect(raws + images)
            _check_deadline(deadline, len(raws), "lumping")
    cond = _gram_condition(gram)
    if cond > GRAM_COND_MAX:
        raise _IllConditioned("Gram matrix of the raw Krylov vectors is ill-conditioned")
    d = len(raws)
    # M[i, j] = <k_i | U k_j>
    m = np.empty((d, d), dtype=np.complex128)
    for j in range(d):
        if j in terminal:
            known = terminal[j]
            m[: known.shape[0], j] = known
            for i in range(known.shape[0], d):
                m[i, j] = bk.inner(raws[i], images[j])
        else:
            m[:, j] = gram[:, j + 1]
    u_hat = coeffs.conj().T @ m @ coeffs
    basis = ImplicitBasis(c.n, raws, coeffs, bk, gram)
    return basis, u_hat, {"applications": len(images), "orthogonalization": "gram", "gram_condition": cond}


def lump_krylov(
    c: Circuit,
    spec: SubspaceSpec,
    tol: TolerancePolicy = DEFAULT_TOLERANCE,
    d_max: int = D_MAX_DEFAULT,
    *,
    backend="dense",
    deadline: float | None = None,
) -> ReducedSystem:
    """Krylov iteration with Gram-Schmidt orthogonalization, seeds processed in order.

    The next candidate is ``U v_i`` for the newest accepted ``v_i``, which spans
    the same space as the raw powers ``U^i z`` but stays well conditioned.  A
    candidate is dependent when its residual falls below
    ``eps_rank * max(1, |u|)`` or below its propagated rounding noise
    (:func:`_independent`).  ``U_hat`` is read off the projection
    coefficients of each ``U v_j``, so the circuit is applied exactly ``d`` times.

    On the DD backend the raw powers are tried first (see :func:`_krylov_gram`),
    because orthonormalized diagrams can be much larger than the powers
    themselves.  If their Gram matrix is too ill-conditioned the run restarts
    with Gram-Schmidt; ``stats["gram_fallback"]`` then says why.
    """
    bk, seeds = _prepare(c, spec, tol, backend, d_max)
    started = time.perf_counter()
    if isinstance(bk, DDBackend):
        try:
            basis, u_hat, stats = _krylov_gram(c, bk, seeds, tol, d_max, deadline)
        except _IllConditioned as exc:
            fallback = str(exc)
        else:
            stats["seconds"] = time.perf_counter() - started
            return ReducedSystem(basis, u_hat, (spec.describe(),), c.name, "krylov", tol, stats)
    else:
        fallback = None
    vectors: list = []
    images: list = []
    # per image j: projection coefficients, subdiagonal norm, end of its seed chain
    coeffs: list = []
    subdiag: dict[int, float] = {}
    chain_end: list[int] = []
    noise: list[float] = []
    for z in seeds:
        u = bk.scale(1.0 / bk.norm(z), z)
        source = None
        first_image = len(images)
        while True:
            w, r, unorm, h = _orthogonalize(bk, u, vectors)
            if source is not None:
                coeffs.append(h)
            cand_noise = UNIT_NOISE + (noise[-1] if source is not None else 0.0)
            if not _independent(r, unorm, cand_noise, tol):
                break
            if len(vectors) >= d_max:
                raise CapacityError(f"reduced dimension exceeds d_max={d_max}", partial_d=len(vectors))
            vectors.append(bk.scale(1.0 / r, w))
            noise.append(cand_noise * unorm / r)
            if source is not None:
                subdiag[source] = r
            u = bk.apply(c, vectors[-1])
            images.append(u)
            source = len(images) - 1
            bk.maybe_collect(vectors + images)
            _check_deadline(deadline, len(vectors), "lumping")
        chain_end.extend([len(vectors)] * (len(images) - first_image))
    d = len(vectors)
    u_hat = np.zeros((d, d), dtype=np.complex128)
    for j in range(d):
        h = coeffs[j]
        k = h.shape[0]
        u_hat[:k, j] = h
        if j in subdiag:
            u_hat[k, j] = subdiag[j]
        # rows inside the same chain beyond the subdiagonal vanish; later seeds need explicit products
        for i in range(chain_end[j], d):
            u_hat[i, j] = bk.inner(vectors[i], images[j])
    basis = LumpingBasis(c.n, vectors, bk)
    stats = {"applications": len(images), "orthogonalization": "gram-schmidt", "seconds": time.perf_counter() - started}
    if fallback is not None:
        stats["gram_fallback"] = fallback
    return ReducedSystem(basis, u_hat, (spec.describe(),), c.name, "krylov", tol, stats)


def lump_residual(
    c: Circuit,
    spec: SubspaceSpec,
    tol: TolerancePolicy = DEFAULT_TOLERANCE,
    d_max: int = D_MAX_DEFAULT,
    *,
    backend="dense",
    deadline: float | None = None,
) -> ReducedSystem:
    """Residual-projection fixpoint.

    Start from an orthonormal basis of the seeds; then sweep over all columns
    ``z``, append ``(U z - P_L U z) / |U z - P_L U z|`` whenever it is nonzero,
    and repeat the sweep until one adds nothing.  Columns whose image was
    already tested are skipped, since that image lies in every later span.
    """
    bk, seeds = _prepare(c, spec, tol, backend, d_max)
    vectors: list = []
    noise: list[float] = []
    started = time.perf_counter()
    for z in seeds:
        w, r, unorm, _ = _orthogonalize(bk, z, vectors)
        if _independent(r, unorm, UNIT_NOISE, tol):
            if len(vectors) >= d_max:
                raise CapacityError(f"reduced dimension exceeds d_max={d_max}", partial_d=len(vectors))
            vectors.append(bk.scale(1.0 / r, w))
            noise.append(UNIT_NOISE * unorm / r)
    images: list = []
    # an image whose residual was appended (or vanished) stays inside the span as it grows
    settled = 0
    sweeps = 0
    while True:
        sweeps += 1
        appended = False
        for j in range(settled, len(vectors)):
            if j == len(images):
                images.append(bk.apply(c, vectors[j]))
            w, r, unorm, _ = _orthogonalize(bk, images[j], vectors)
            settled = j + 1
            cand_noise = UNIT_NOISE + noise[j]
            if _independent(r, unorm, cand_noise, tol):
                if len(vectors) >= d_max:
                    raise CapacityError(f"reduced dimension exceeds d_max={d_max}", partial_d=len(vectors))
                vectors.append(bk.scale(1.0 / r, w))
                noise.append(cand_noise * unorm / r)
                appended = True
            bk.maybe_collect(vectors + images)
            _check_deadline(deadline, len(vectors), "lumping")
        if not appended:
            break
    u_hat = _reduced_matrix(bk, vectors, images)
    basis = LumpingBasis(c.n, vectors, bk)
    stats = {"applications": len(images), "sweeps": sweeps, "seconds": time.perf_counter() - started}
    return ReducedSystem(basis, u_hat, (spec.describe(),), c.name, "residual", tol, stats)


def _max_residual(basis: LumpingBasis, images) -> float:
    bk = basis.backend
    worst = 0.0
    for x in images:
        worst = max(worst, bk.norm(basis.residual(x)))
    return worst


def _implicit_max_residual(basis: ImplicitBasis, c: Circuit) -> float:
    """``max_i |(I - P_L) U v_i|`` for ``V = K C`` without building ``V``.

    ``U`` is applied to every raw vector.  An image that lands on the same
    diagram node as some raw vector is a known multiple of it, so its part of
    the residual, ``K (a - C C^H G a)``, cancels in coefficient space.  Only
    the remaining images get an explicit diagram residual ``E``, and each norm
    is read from the Gram matrix of ``[K, E]``.
    """
    bk = basis.backend
    raws, coeffs, gram = basis.raws, basis.coeffs, basis.gram
    k = len(raws)
    by_node: dict[int, int] = {}
    for idx, r in enumerate(raws):
        by_node.setdefault(id(r.root.target), idx)
    # U K = K A + E B: A in raw coordinates, E the unmatched images with selector B
    a = np.zeros((k, k), dtype=np.complex128)
    extra, extra_cols = [], []
    for j, r in enumerate(raws):
        img = bk.apply(c, r)
        hit = by_node.get(id(img.root.target))
        if hit is not None and img.n == raws[hit].n:
            a[hit, j] = img.root.weight / raws[hit].root.weight
        else:
            extra.append(basis.residual(img))
            extra_cols.append(j)
    alpha = a @ coeffs
    beta = alpha - coeffs @ (coeffs.conj().T @ (gram @ alpha))
    # Gram matrix of [K, E]; the residual norms are quadratic forms without cancellation
    m = len(extra)
    h = np.zeros((k + m, k + m), dtype=np.complex128)
    h[:k, :k] = gram
    for p, e in enumerate(extra):
        for q in range(k):
            h[q, k + p] = bk.inner(raws[q], e)
        for q, f in enumerate(extra):
            h[k + q, k + p] = bk.inner(f, e)
    h[k:, :k] = h[:k, k:].conj().T
    w = np.vstack([beta, coeffs[extra_cols, :]])
    sq = np.einsum("ji,jk,ki->i", w.conj(), h, w).real
    return float(math.sqrt(max(float(np.max(sq, initial=0.0)), 0.0)))


def check_fcb(basis: LumpingBasis, c: Circuit) -> float:
    """``max_i |(I - P_L) U^dagger v_i|``; small means the rows of ``L`` form an FCB."""
    inv = c.inverse()
    if isinstance(basis, ImplicitBasis):
        return _implicit_max_residual(basis, inv)
    return _max_residual(basis, [basis.backend.apply(inv, v) for v in basis.vectors])


def check_bcb(basis: LumpingBasis, c: Circuit) -> float:
    """``max_i |(I - P_L) U v_i|``; small means the columns of ``L^dagger`` form a BCB."""
    if isinstance(basis, ImplicitBasis):
        return _implicit_max_residual(basis, c)
    return _max_residual(basis, [basis.backend.apply(c, v) for v in basis.vectors])


def krylov_oracle(c: Circuit, spec: SubspaceSpec, tol: TolerancePolicy = DEFAULT_TOLERANCE):
    """Rank and orthonormal column basis of ``[z, Uz, ..., U^{N-1} z]`` over all seeds.

    Uses raw powers and column-pivoted QR, independently of the lumping code.
    """
    if c.n > ORACLE_CAP:
        raise CapacityError(f"the brute-force oracle is capped at n={ORACLE_CAP}")
    size = 1 << c.n
    blocks = []
    for z in spec.dense_vectors(c.n):
        cols = np.empty((size, size), dtype=np.complex128)
        state = DenseState(c.n, z / np.linalg.norm(z))
        for k in range(size):
            cols[:, k] = state.amplitudes
            state = apply_circuit(c, state)
        blocks.append(cols)
    krylov = np.hstack(blocks)
    q, r, _ = scipy.linalg.qr(krylov, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > tol.eps_rank * diag[0])) if diag.size else 0
    return rank, q[:, :rank]


@dataclass(frozen=True)
class MinimalityReport:
    oracle_rank: int
    d: int
    max_angle: float
    passed: bool


def minimality_certificate(reduced: ReducedSystem, c: Circuit, spec: SubspaceSpec, tol: TolerancePolicy | None = None) -> MinimalityReport:
    """Compare ``reduced`` against the brute-force Krylov rank oracle."""
    tol = tol or reduced.tol
    rank, q = krylov_oracle(c, spec, tol)
    angle = float("inf")
    if rank == reduced.d and rank > 0:
        angle = float(np.max(scipy.linalg.subspace_angles(q, reduced.basis.column_matrix())))
    return MinimalityReport(rank, reduced.d, angle, rank == reduced.d and angle < 1e-8)


def construct_begin_hamiltonian(basis: LumpingBasis, H_hat: np.ndarray, delta: float = 0.1, tol: TolerancePolicy = DEFAULT_TOLERANCE) -> np.ndarray:
    """``U_B = L^dagger exp(-i delta H_hat) L + Q^dagger Q`` for an orthonormal completion ``Q``.

    The reduced map of ``U_B`` on the basis is exactly ``exp(-i delta H_hat)``.
    """
    if basis.n > N_DENSE_CAP:
        raise CapacityError(f"dense unitaries are capped at {N_DENSE_CAP} qubits")
    h = np.asarray(H_hat, dtype=np.complex128)
    if h.shape != (basis.d, basis.d):
        raise DimensionError(f"H_hat must be {basis.d}x{basis.d}, got {h.shape}")
    if np.max(np.abs(h - h.conj().T), initial=0.0) > tol.eps_amp:
        raise DomainError("H_hat is not Hermitian")
    u_hat = scipy.linalg.expm(-1j * delta * h)
    ldag = basis.column_matrix()
    l = ldag.conj().T
    q = scipy.linalg.null_space(l).conj().T
    u_b = ldag @ u_hat @ l + q.conj().T @ q
    size = u_b.shape[0]
    if unitarity_residual(u_b) > tol.eps_unitary * max(1.0, math.sqrt(size)):
        raise NumericalError("constructed U_B is not unitary")
    if np.max(np.abs(l @ u_b - u_hat @ l)) > tol.eps_unitary * max(1.0, math.sqrt(size)):
        raise NumericalError("L U_B != U_hat L")
    return u_b


# -- serialization ---------------------------------------------------------------

_MAGIC = "qlump-reduced 1"


def _fmt(z: complex) -> str:
    return f"{float(z.real)!r},{float(z.imag)!r}"


def dumps_reduced(rs: ReducedSystem) -> str:
    t = rs.tol
    lines = [
        _MAGIC,
        f"circuit {rs.circuit_name}",
        f"n {rs.n}",
        f"d {rs.d}",
        f"backend {rs.basis.backend.name}",
        f"method {rs.method}",
        "seeds " + " ".join(rs.seeds),
        f"tol eps_amp={t.eps_amp!r} eps_norm={t.eps_norm!r} eps_rank={t.eps_rank!r} eps_unitary={t.eps_unitary!r}",
        "uhat",
    ]
    lines += [" ".join(_fmt(z) for z in row) for row in rs.U_hat]
    lines.append("basis")
    for i, v in enumerate(rs.basis.vectors):
        lines.append(f"vector {i}")
        if rs.basis.backend.name == "dd":
            lines.append(dd_export(v).rstrip("\n"))
        else:
            lines.append(" ".join(_fmt(z) for z in v.amplitudes))
        lines.append("end")
    return "\n".join(lines) + "\n"


def _parse_complex(tok: str, lineno: int) -> complex:
    try:
        re_s, im_s = tok.split(",")
        return complex(float(re_s), float(im_s))
    except ValueError as exc:
        raise ParseError(lineno, f"bad complex entry {tok!r}") from exc


def loads_reduced(text: str, backend=None) -> ReducedSystem:
    lines = text.splitlines()
    if not lines or lines[0].strip() != _MAGIC:
        raise ParseError(1, "not a qlump reduced-system file")

    def field_(k: int, key: str) -> str:
        if k >= len(lines):
            raise ParseError(k + 1, f"missing {key!r} line")
        head, _, rest = lines[k].partition(" ")
        if head != key:
            raise ParseError(k + 1, f"expected {key!r}, got {head!r}")
        return rest.strip()

    name = field_(1, "circuit")
    try:
        n = int(field_(2, "n"))
        d = int(field_(3, "d"))
    except ValueError as exc:
        raise ParseError(3, "n and d must be integers") from exc
    bk_name = field_(4, "backend")
    method = field_(5, "method")
    seeds = tuple(field_(6, "seeds").split())
    tol_fields = dict(tok.split("=") for tok in field_(7, "tol").split())
    tol = TolerancePolicy(**{k: float(v) for k, v in tol_fields.items()})
    if lines[8].strip() != "uhat":
        raise ParseError(9, "expected 'uhat'")
    u_hat = np.array(
        [[_parse_complex(tok, 10 + i) for tok in lines[9 + i].split()] for i in range(d)],
        dtype=np.complex128,
    ).reshape(d, d)
    k = 9 + d
    if lines[k].strip() != "basis":
        raise ParseError(k + 1, "expected 'basis'")
    bk = make_backend(backend or bk_name, tol)
    vectors = []
    k += 1
    for i in range(d):
        field_(k, "vector")
        end = k + 1
        while end < len(lines) and lines[end].strip() != "end":
            end += 1
        body = lines[k + 1 : end]
        if body and body[0].startswith("dd "):
            state = dd_import("\n".join(body), getattr(bk, "manager", None))
            if bk.name == "dense":
                state = state.to_dense()
        else:
            amps = np.array([_parse_complex(tok, k + 2) for tok in body[0].split()], dtype=np.complex128)
            state = bk.from_dense(amps)
        vectors.append(state)
        k = end + 1
    return ReducedSystem(LumpingBasis(n, vectors, bk), u_hat, seeds, name, method, tol)


def save_reduced(rs: ReducedSystem, path: str | Path):
    Path(path).write_text(dumps_reduced(rs))


def load_reduced(path: str | Path, backend=None) -> ReducedSystem:
    return loads_reduced(Path(path).read_text(), backend)
