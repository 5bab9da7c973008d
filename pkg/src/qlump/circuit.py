"""Gate-level circuits, their application to states, and circuit generators.

One application of a :class:`Circuit` is one step of the dynamical system
``w_{k+1} = U w_k``.  Besides the usual elementary gates, two "semantic" gates
act directly on basis indices: ``DiagonalPhase`` multiplies amplitude ``x`` by
``exp(i * angle(x))`` and ``PermutationMap`` sends ``|x>`` to ``|p(x)>``.  For
both, ``targets[i]`` supplies bit ``i`` of the local index.
"""

from __future__ import annotations

import cmath
import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from .amplitude import N_DENSE_CAP, N_STATE_CAP, DenseState
from .dd import DDEdge, DDManager, DDState
from .errors import CapacityError, DimensionError, DomainError

SQRT1_2 = 1.0 / math.sqrt(2.0)

FIXED_1Q = {
    "H": np.array([[SQRT1_2, SQRT1_2], [SQRT1_2, -SQRT1_2]], dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
    "S": np.array([[1, 0], [0, 1j]], dtype=np.complex128),
    "Sdg": np.array([[1, 0], [0, -1j]], dtype=np.complex128),
    "T": np.array([[1, 0], [0, cmath.exp(1j * math.pi / 4)]], dtype=np.complex128),
    "Tdg": np.array([[1, 0], [0, cmath.exp(-1j * math.pi / 4)]], dtype=np.complex128),
}
PARAM_1Q = {"RX": 1, "RY": 1, "RZ": 1, "Phase": 1, "U3": 3}
SEMANTIC = ("DiagonalPhase", "PermutationMap")
GATE_KINDS = frozenset(FIXED_1Q) | frozenset(PARAM_1Q) | {"SWAP"} | frozenset(SEMANTIC)

_DAGGER = {"S": "Sdg", "Sdg": "S", "T": "Tdg", "Tdg": "T"}


def unit_phase(theta: float) -> complex:
    """``exp(i theta)`` with components that are exactly 0 when they should be."""
    z = cmath.exp(1j * theta)
    re = 0.0 if abs(z.real) < 1e-15 else z.real
    im = 0.0 if abs(z.imag) < 1e-15 else z.imag
    return complex(re, im)


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c = math.cos(theta / 2)
    s = math.sin(theta / 2)
    return np.array(
        [[c, -unit_phase(lam) * s], [unit_phase(phi) * s, unit_phase(phi + lam) * c]],
        dtype=np.complex128,
    )


def _param_matrix(kind: str, params: tuple) -> np.ndarray:
    if kind == "RX":
        (t,) = params
        c, s = math.cos(t / 2), math.sin(t / 2)
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)
    if kind == "RY":
        (t,) = params
        c, s = math.cos(t / 2), math.sin(t / 2)
        return np.array([[c, -s], [s, c]], dtype=np.complex128)
    if kind == "RZ":
        (t,) = params
        return np.array([[unit_phase(-t / 2), 0], [0, unit_phase(t / 2)]], dtype=np.complex128)
    if kind == "Phase":
        (t,) = params
        return np.array([[1, 0], [0, unit_phase(t)]], dtype=np.complex128)
    return u3_matrix(*params)


@dataclass(frozen=True, eq=False)
class Gate:
    """One gate; ``controls`` are positive controls (all must be 1).

    ``func`` is only used by the semantic gates.  ``DiagonalPhase`` accepts a
    mapping ``{local index: angle}`` (angle 0 elsewhere), an array of
    ``2^len(targets)`` angles, or a callable ``index -> angle``.
    ``PermutationMap`` accepts a sequence/array table or a callable.
    """

    kind: str
    targets: tuple[int, ...]
    controls: tuple[int, ...] = ()
    params: tuple[float, ...] = ()
    func: object = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        object.__setattr__(self, "controls", tuple(int(c) for c in self.controls))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kind not in GATE_KINDS:
            raise DomainError(f"unknown gate kind {self.kind!r}")
        qubits = self.targets + self.controls
        if len(set(qubits)) != len(qubits):
            raise DomainError(f"{self.kind}: targets and controls must be distinct, got {qubits}")
        if any(q < 0 for q in qubits):
            raise DomainError(f"{self.kind}: negative qubit index")
        if self.kind in FIXED_1Q or self.kind in PARAM_1Q:
            if len(self.targets) != 1:
                raise DomainError(f"{self.kind} takes exactly one target")
            expected = PARAM_1Q.get(self.kind, 0)
            if len(self.params) != expected:
                raise DomainError(f"{self.kind} takes {expected} parameter(s), got {len(self.params)}")
        elif self.kind == "SWAP":
            if len(self.targets) != 2:
                raise DomainError("SWAP takes exactly two targets")
        else:
            if not self.targets:
                raise DomainError(f"{self.kind} needs at least one target")
            if self.controls:
                raise DomainError(f"{self.kind} does not take controls")
            if self.kind == "PermutationMap":
                table = self.perm_table()
                if not np.array_equal(np.sort(table), np.arange(table.shape[0])):
                    raise DomainError("PermutationMap is not a bijection")

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.controls + self.targets

    def matrix(self) -> np.ndarray:
        """The 2x2 block of a single-target gate."""
        if self.kind in FIXED_1Q:
            return FIXED_1Q[self.kind]
        if self.kind in PARAM_1Q:
            return _param_matrix(self.kind, self.params)
        raise DomainError(f"{self.kind} has no 2x2 matrix")

    def angle_table(self) -> np.ndarray:
        if self.kind != "DiagonalPhase":
            raise DomainError("angle_table is only defined for DiagonalPhase")
        table = self._cache.get("angles")
        if table is None:
            size = 1 << len(self.targets)
            f = self.func
            if isinstance(f, Mapping):
                table = np.zeros(size)
                for idx, ang in f.items():
                    table[int(idx)] = float(ang)
            elif callable(f):
                table = np.array([float(f(i)) for i in range(size)])
            else:
                table = np.asarray(f, dtype=float).reshape(-1)
                if table.shape[0] != size:
                    raise DimensionError(f"DiagonalPhase table has {table.shape[0]} entries, expected {size}")
            if not np.all(np.isfinite(table)):
                raise DomainError("DiagonalPhase angles must be finite")
            self._cache["angles"] = table
        return table

    def phase_table(self) -> np.ndarray:
        table = self._cache.get("phases")
        if table is None:
            ang = self.angle_table()
            if isinstance(self.func, Mapping):
                table = np.ones(ang.shape[0], dtype=np.complex128)
                for idx in self.func:
                    table[int(idx)] = unit_phase(float(self.func[idx]))
            else:
                table = np.exp(1j * ang)
            self._cache["phases"] = table
        return table

    def perm_table(self) -> np.ndarray:
        if self.kind != "PermutationMap":
            raise DomainError("perm_table is only defined for PermutationMap")
        table = self._cache.get("perm")
        if table is None:
            size = 1 << len(self.targets)
            f = self.func
            if callable(f):
                table = np.array([int(f(i)) for i in range(size)], dtype=np.int64)
            else:
                table = np.asarray(f, dtype=np.int64).reshape(-1)
            if table.shape[0] != size:
                raise DimensionError(f"PermutationMap table has {table.shape[0]} entries, expected {size}")
            self._cache["perm"] = table
        return table

    def inverse(self) -> "Gate":
        k = self.kind
        if k in ("H", "X", "Y", "Z", "SWAP"):
            return self
        if k in _DAGGER:
            return Gate(_DAGGER[k], self.targets, self.controls)
        if k in ("RX", "RY", "RZ", "Phase"):
            return Gate(k, self.targets, self.controls, (-self.params[0],))
        if k == "U3":
            theta, phi, lam = self.params
            return Gate(k, self.targets, self.controls, (-theta, -lam, -phi))
        if k == "DiagonalPhase":
            return Gate(k, self.targets, func=-self.angle_table())
        table = self.perm_table()
        inv = np.empty_like(table)
        inv[table] = np.arange(table.shape[0])
        return Gate(k, self.targets, func=inv)

    def __eq__(self, other):
        if not isinstance(other, Gate):
            return NotImplemented
        if (self.kind, self.targets, self.controls) != (other.kind, other.targets, other.controls):
            return False
        if self.kind == "DiagonalPhase":
            return np.allclose(self.phase_table(), other.phase_table(), atol=1e-12)
        if self.kind == "PermutationMap":
            return np.array_equal(self.perm_table(), other.perm_table())
        return np.allclose(self.params, other.params, atol=1e-12)

    __hash__ = object.__hash__

    def __repr__(self):
        extra = f", params={self.params}" if self.params else ""
        ctrl = f", controls={self.controls}" if self.controls else ""
        return f"Gate({self.kind}, targets={self.targets}{ctrl}{extra})"


@dataclass(frozen=True)
class Circuit:
    n: int
    gates: tuple[Gate, ...]
    name: str = "circuit"

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("a circuit needs at least one qubit")
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if max(g.qubits) >= self.n:
                raise DomainError(f"{g!r} addresses a qubit outside 0..{self.n - 1}")

    def __len__(self):
        return len(self.gates)

    def inverse(self) -> "Circuit":
        return Circuit(self.n, tuple(g.inverse() for g in reversed(self.gates)), self.name + "_dg")

    def then(self, other: "Circuit") -> "Circuit":
        if other.n != self.n:
            raise DimensionError("cannot concatenate circuits on different qubit counts")
        return Circuit(self.n, self.gates + other.gates, self.name)

    def __eq__(self, other):
        if not isinstance(other, Circuit):
            return NotImplemented
        return self.n == other.n and len(self.gates) == len(other.gates) and all(
            a == b for a, b in zip(self.gates, other.gates)
        )

    __hash__ = object.__hash__


def _swap_as_cx(g: Gate) -> list[Gate]:
    a, b = g.targets
    return [
        Gate("X", (a,), (b,)),
        Gate("X", (b,), g.controls + (a,)),
        Gate("X", (a,), (b,)),
    ]


def _local_to_full(targets: tuple[int, ...], n: int) -> np.ndarray:
    """For every full index, the local index formed from the ``targets`` bits."""
    idx = np.arange(1 << n)
    local = np.zeros(1 << n, dtype=np.int64)
    for i, t in enumerate(targets):
        local |= ((idx >> t) & 1) << i
    return local


def _full_tables(g: Gate, n: int):
    """``(full_index_map, None)`` for permutations, ``(phases, None)`` for diagonals."""
    key = ("full", n)
    cached = g._cache.get(key)
    if cached is not None:
        return cached
    if tuple(g.targets) == tuple(range(n)):
        if g.kind == "DiagonalPhase":
            cached = g.phase_table()
        else:
            cached = g.perm_table()
    else:
        local = _local_to_full(g.targets, n)
        if g.kind == "DiagonalPhase":
            cached = g.phase_table()[local]
        else:
            idx = np.arange(1 << n)
            mask = 0
            for t in g.targets:
                mask |= 1 << t
            image_local = g.perm_table()[local]
            full = idx & ~mask
            for i, t in enumerate(g.targets):
                full |= ((image_local >> i) & 1) << t
            cached = full
    g._cache[key] = cached
    return cached


def _apply_gate_dense(g: Gate, psi: np.ndarray, n: int) -> np.ndarray:
    k = g.kind
    if k == "SWAP":
        for sub in _swap_as_cx(g):
            psi = _apply_gate_dense(sub, psi, n)
        return psi
    if k == "DiagonalPhase":
        if isinstance(g.func, Mapping) and tuple(g.targets) == tuple(range(n)):
            out = psi.copy()
            for idx, ang in g.func.items():
                out[int(idx)] *= unit_phase(float(ang))
            return out
        return psi * _full_tables(g, n)
    if k == "PermutationMap":
        out = np.empty_like(psi)
        out[_full_tables(g, n)] = psi
        return out
    m = g.matrix()
    out = psi.copy()
    view = out.reshape([2] * n)
    index: list = [slice(None)] * n
    for c in g.controls:
        index[n - 1 - c] = 1
    sub = view[tuple(index)]
    t = g.targets[0]
    axis = (n - 1 - t) - sum(1 for c in g.controls if (n - 1 - c) < (n - 1 - t))
    moved = np.moveaxis(sub, axis, 0)
    a0 = moved[0].copy()
    a1 = moved[1].copy()
    moved[0] = m[0, 0] * a0 + m[0, 1] * a1
    moved[1] = m[1, 0] * a0 + m[1, 1] * a1
    return out


def _diagonal_edge(g: Gate, mgr: DDManager, n: int) -> DDEdge:
    cached = mgr._diagonals.get(id(g))
    if cached is not None and cached[0] is g:
        return cached[1]
    if isinstance(g.func, Mapping) and tuple(g.targets) == tuple(range(n)):
        ones = mgr.uniform(n)
        ones_edge = DDEdge(ones.root.weight * 2.0 ** (n / 2), ones.root.target)
        delta = mgr.from_sparse(n, [(int(i), unit_phase(float(a)) - 1.0) for i, a in g.func.items()])
        edge = mgr.add_edges(ones_edge, delta.root, {})
    else:
        if n > N_STATE_CAP:
            raise CapacityError(f"cannot tabulate a dense diagonal on {n} qubits")
        edge = mgr.from_dense(_full_tables(g, n)).root
    mgr._diagonals[id(g)] = (g, edge)
    return edge


def _apply_gate_dd(g: Gate, state: DDState) -> DDState:
    mgr = state.manager
    n = state.n
    k = g.kind
    root = state.root
    if k == "SWAP":
        for sub in _swap_as_cx(g):
            state = _apply_gate_dd(sub, state)
        return state
    if k == "DiagonalPhase":
        return DDState(mgr, n, mgr.multiply_edges(root, _diagonal_edge(g, mgr, n), {}))
    if k == "PermutationMap":
        full = _full_tables(g, n) if n <= N_STATE_CAP and tuple(g.targets) != tuple(range(n)) else None
        table = g.perm_table()
        items = []
        for idx, amp in mgr.nonzero_paths(root):
            items.append((int(full[idx]) if full is not None else int(table[idx]), amp))
        return mgr.from_sparse(n, items)
    m = g.matrix()
    t = g.targets[0]
    if not g.controls:
        return DDState(mgr, n, mgr.apply_1q_edge(root, m, t))
    if min(g.controls) > t:
        return DDState(mgr, n, mgr.apply_1q_edge(root, m, t, frozenset(g.controls)))
    delta = mgr.apply_1q_edge(root, m - np.eye(2), t)
    delta = mgr.project_ones_edge(delta, frozenset(g.controls))
    if delta.weight == 0:
        return state
    return DDState(mgr, n, mgr.add_edges(root, delta, {}))


def apply_gate(g: Gate, state):
    if isinstance(state, DDState):
        return _apply_gate_dd(g, state)
    return DenseState(state.n, _apply_gate_dense(g, state.amplitudes, state.n), copy=False)


def apply_circuit(c: Circuit, state):
    """One full pass of ``c`` over ``state`` (dense or DD)."""
    if c.n != state.n:
        raise DimensionError(f"circuit has {c.n} qubits, state has {state.n}")
    if isinstance(state, DDState):
        for g in c.gates:
            state = _apply_gate_dd(g, state)
        return state
    if not isinstance(state, DenseState):
        raise DomainError(f"unsupported state type {type(state).__name__}")
    psi = state.amplitudes
    for g in c.gates:
        psi = _apply_gate_dense(g, psi, c.n)
    return DenseState(c.n, psi, copy=False)


def circuit_matrix(c: Circuit) -> np.ndarray:
    """Dense unitary, built column by column from basis states."""
    if c.n > N_DENSE_CAP:
        raise CapacityError(f"dense unitaries are capped at {N_DENSE_CAP} qubits")
    size = 1 << c.n
    cols = [apply_circuit(c, DenseState.basis(c.n, j)).amplitudes for j in range(size)]
    return np.stack(cols, axis=1)


# -- problem instances ----------------------------------------------------------


@dataclass(frozen=True)
class SatFormula:
    """CNF formula; literal ``+k``/``-k`` refers to variable ``k-1`` (qubit ``k-1``)."""

    n_vars: int
    clauses: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "clauses", tuple(tuple(int(l) for l in c) for c in self.clauses))
        if not self.clauses:
            raise DomainError("a formula needs at least one clause")
        used = set()
        for c in self.clauses:
            if not 1 <= len(c) <= 3:
                raise DomainError(f"clause {c} must have 1 to 3 literals")
            for lit in c:
                if lit == 0 or abs(lit) > self.n_vars:
                    raise DomainError(f"literal {lit} out of range for {self.n_vars} variables")
                used.add(abs(lit))
        if used != set(range(1, self.n_vars + 1)):
            raise DomainError("every variable must occur in some clause")

    @property
    def n(self) -> int:
        return self.n_vars

    @property
    def size(self) -> int:
        """Number of clauses."""
        return len(self.clauses)

    def values(self, indices=None) -> np.ndarray:
        """Number of satisfied clauses for each assignment index (all by default)."""
        idx = np.arange(1 << self.n_vars) if indices is None else np.asarray(indices, dtype=np.int64)
        total = np.zeros(idx.shape[0], dtype=np.int64)
        for clause in self.clauses:
            sat = np.zeros(idx.shape[0], dtype=bool)
            for lit in clause:
                bit = (idx >> (abs(lit) - 1)) & 1
                sat |= bit == (1 if lit > 0 else 0)
            total += sat
        return total


@dataclass(frozen=True)
class Graph:
    """Undirected graph on vertices ``0..n_vertices-1`` (vertex ``i`` is qubit ``i``)."""

    n_vertices: int
    edges: frozenset

    def __post_init__(self):
        normalized = set()
        for e in self.edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise DomainError(f"self-loop at vertex {i}")
            if not (0 <= i < self.n_vertices and 0 <= j < self.n_vertices):
                raise DomainError(f"edge {e} out of range")
            normalized.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(normalized))

    @property
    def n(self) -> int:
        return self.n_vertices

    @property
    def size(self) -> int:
        """Number of edges."""
        return len(self.edges)

    def values(self, indices=None) -> np.ndarray:
        """Cut size for each vertex-subset index (all by default)."""
        idx = np.arange(1 << self.n_vertices) if indices is None else np.asarray(indices, dtype=np.int64)
        total = np.zeros(idx.shape[0], dtype=np.int64)
        for i, j in self.edges:
            total += ((idx >> i) & 1) != ((idx >> j) & 1)
        return total


def random_sat_formula(n: int, rng: np.random.Generator) -> SatFormula:
    """Clause count uniform in ``[n, 3n]``, 1-3 literals per clause, all variables used."""
    if n < 1:
        raise DomainError("need at least one variable")
    m = int(rng.integers(n, 3 * n + 1))
    order = rng.permutation(n)
    clauses = []
    for c in range(m):
        size = int(rng.integers(1, min(3, n) + 1))
        chosen = [int(order[c])] if c < n else []
        rest = [v for v in rng.permutation(n).tolist() if v not in chosen]
        chosen += rest[: size - len(chosen)]
        clauses.append(tuple((v + 1) * (1 if rng.random() < 0.5 else -1) for v in chosen))
    return SatFormula(n, tuple(clauses))


def random_graph(n: int, p: float, rng: np.random.Generator, *, min_edges: int = 1) -> Graph:
    """Erdos-Renyi ``G(n, p)``, resampled until it has ``min_edges`` edges."""
    if n < 2 and min_edges > 0:
        raise DomainError("need at least two vertices for an edge")
    while True:
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
        if len(edges) >= min_edges:
            return Graph(n, frozenset(edges))


# -- generators -----------------------------------------------------------------


def grover_circuit(n: int, marked) -> Circuit:
    """``G = (I - 2|psi><psi|) O_f``: phase oracle on ``marked``, then diffusion.

    The diffusion is ``H^n (I - 2|0><0|) H^n``, which equals ``I - 2|psi><psi|``
    exactly, so no global phase correction is needed.
    """
    marked = sorted({int(m) for m in marked})
    size = 1 << n
    if not marked:
        raise DomainError("Grover needs at least one marked element")
    if len(marked) > size // 2:
        raise DomainError(f"{len(marked)} marked elements exceed N/2 = {size // 2}")
    if marked[0] < 0 or marked[-1] >= size:
        raise DomainError("marked index out of range")
    allq = tuple(range(n))
    gates = [Gate("DiagonalPhase", allq, func={m: math.pi for m in marked})]
    gates += [Gate("H", (q,)) for q in allq]
    gates.append(Gate("DiagonalPhase", allq, func={0: math.pi}))
    gates += [Gate("H", (q,)) for q in allq]
    return Circuit(n, tuple(gates), f"grover{n}")


def problem_values(problem: SatFormula | Graph) -> np.ndarray:
    """Eigenvalues of the (diagonal) problem Hamiltonian: satisfied clauses or cut size."""
    return problem.values()


def qaoa_problem_step(problem: SatFormula | Graph, delta: float = 0.1) -> Circuit:
    """``exp(-i delta H_P)`` as one DiagonalPhase gate."""
    if not delta > 0:
        raise DomainError("delta must be positive")
    n = problem.n
    table = -float(delta) * problem_values(problem).astype(float)
    label = "sat" if isinstance(problem, SatFormula) else "maxcut"
    return Circuit(n, (Gate("DiagonalPhase", tuple(range(n)), func=table),), f"{label}{n}")


def order_finding_circuit(x: int, modulus: int) -> Circuit:
    """``|y> -> |x y mod N>`` for ``y < N``, identity on ``N <= y < 2^l``."""
    if modulus < 3 or not 2 <= x < modulus:
        raise DomainError(f"need 2 <= x < N, got x={x}, N={modulus}")
    if math.gcd(x, modulus) != 1:
        raise DomainError(f"gcd({x}, {modulus}) != 1, the map is not a bijection")
    n = (modulus - 1).bit_length()
    table = np.arange(1 << n, dtype=np.int64)
    table[:modulus] = (x * np.arange(modulus, dtype=np.int64)) % modulus
    return Circuit(n, (Gate("PermutationMap", tuple(range(n)), func=table),), f"order_{x}_{modulus}")


def multiplicative_order(x: int, modulus: int) -> int:
    if math.gcd(x, modulus) != 1:
        raise DomainError(f"{x} is not invertible modulo {modulus}")
    r, acc = 1, x % modulus
    while acc != 1 % modulus:
        acc = (acc * x) % modulus
        r += 1
    return r


def _ghz(n: int) -> list[Gate]:
    gates = [Gate("H", (n - 1,))]
    gates += [Gate("X", (q - 1,), (q,)) for q in range(n - 1, 0, -1)]
    return gates


def _qft(n: int) -> list[Gate]:
    gates = []
    for j in range(n - 1, -1, -1):
        gates.append(Gate("H", (j,)))
        for k in range(j - 1, -1, -1):
            gates.append(Gate("Phase", (j,), (k,), (math.pi / 2 ** (j - k),)))
    for i in range(n // 2):
        gates.append(Gate("SWAP", (i, n - 1 - i)))
    return gates


def _dj(n: int, rng: np.random.Generator | None) -> list[Gate]:
    inputs = list(range(n - 1))
    anc = n - 1
    if rng is None:
        pattern = [(i + 1) % 2 for i in inputs]
    else:
        pattern = rng.integers(0, 2, size=len(inputs)).tolist()
    flips = [Gate("X", (i,)) for i, b in zip(inputs, pattern) if b]
    gates = [Gate("X", (anc,))]
    gates += [Gate("H", (q,)) for q in range(n)]
    gates += flips
    gates += [Gate("X", (anc,), (i,)) for i in inputs]
    gates += flips
    gates += [Gate("H", (i,)) for i in inputs]
    return gates


def _graphstate(n: int, graph: Graph | None) -> list[Gate]:
    if graph is None:
        edges = sorted({(min(i, (i + 1) % n), max(i, (i + 1) % n)) for i in range(n)})
    else:
        if graph.n_vertices != n:
            raise DimensionError("graph size does not match qubit count")
        edges = sorted(graph.edges)
    gates = [Gate("H", (q,)) for q in range(n)]
    gates += [Gate("Z", (j,), (i,)) for i, j in edges]
    return gates


def _controlled_ry(theta: float, control: int, target: int) -> list[Gate]:
    return [
        Gate("RY", (target,), (), (theta / 2,)),
        Gate("X", (target,), (control,)),
        Gate("RY", (target,), (), (-theta / 2,)),
        Gate("X", (target,), (control,)),
    ]


def _wstate(n: int) -> list[Gate]:
    gates = [Gate("X", (0,))]
    for i in range(n - 1):
        theta = 2 * math.acos(1 / math.sqrt(n - i))
        gates += _controlled_ry(theta, i, i + 1)
        gates.append(Gate("X", (i,), (i + 1,)))
    return gates


FAMILIES = ("ghz", "qft", "dj", "graphstate", "wstate")


def family_circuit(family: str, n: int, *, rng: np.random.Generator | None = None, graph: Graph | None = None) -> Circuit:
    """Textbook constructions of the built-in circuit families."""
    if family not in FAMILIES:
        raise DomainError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")
    if n < 2:
        raise DomainError(f"{family} needs n >= 2")
    if family == "ghz":
        gates = _ghz(n)
    elif family == "qft":
        gates = _qft(n)
    elif family == "dj":
        gates = _dj(n, rng)
    elif family == "graphstate":
        gates = _graphstate(n, graph)
    else:
        gates = _wstate(n)
    return Circuit(n, tuple(gates), f"{family}{n}")


RANDOM_1Q = ("H", "X", "Y", "Z", "S", "T", "RX", "RY", "RZ", "U3")
RANDOM_2Q = ("CX", "CZ", "CP", "SWAP")


def random_circuit(n: int, n_gates: int, rng: np.random.Generator) -> Circuit:
    """Random mix of 1- and 2-qubit gates (plus Toffolis when n >= 3)."""
    pool = list(RANDOM_1Q) + (list(RANDOM_2Q) if n >= 2 else []) + (["CCX"] if n >= 3 else [])
    gates = []
    for _ in range(n_gates):
        kind = pool[int(rng.integers(len(pool)))]
        if kind in RANDOM_1Q:
            q = int(rng.integers(n))
            nparams = PARAM_1Q.get(kind, 0)
            gates.append(Gate(kind, (q,), (), tuple(rng.uniform(0, 2 * math.pi, nparams).tolist())))
            continue
        qs = rng.choice(n, size=3 if kind == "CCX" else 2, replace=False).tolist()
        if kind == "CX":
            gates.append(Gate("X", (qs[1],), (qs[0],)))
        elif kind == "CZ":
            gates.append(Gate("Z", (qs[1],), (qs[0],)))
        elif kind == "CP":
            gates.append(Gate("Phase", (qs[1],), (qs[0],), (float(rng.uniform(0, 2 * math.pi)),)))
        elif kind == "SWAP":
            gates.append(Gate("SWAP", (qs[0], qs[1])))
        else:
            gates.append(Gate("X", (qs[2],), (qs[0], qs[1])))
    return Circuit(n, tuple(gates), f"random{n}")


def identity_circuit(n: int) -> Circuit:
    """A circuit with no gates (the identity map)."""
    return Circuit(n, (), f"identity{n}")
