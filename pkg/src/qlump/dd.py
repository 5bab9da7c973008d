"""Canonical vector decision diagrams.

A state on ``n`` qubits is a DAG of nodes; a node at level ``k`` splits the
sub-vector it represents on the value of qubit ``k`` (low edge: qubit is 0,
high edge: qubit is 1).  Level ``n-1`` is the root level and level 0 sits just
above the terminal.  Edges carry complex weights; the amplitude of basis state
``d`` is the product of the weights along the path selected by the bits of
``d``.

Canonical form: every node stores its low weight as exactly 1 unless the low
branch is zero, in which case the high weight is exactly 1.  The factor goes to
the incoming edge.  Nodes are hash-consed in the manager's unique table keyed by
their successor ids and the remaining weight quantized to ``eps_amp``.

With this normalization an edge weight says nothing about the size of the
sub-vector below it (a node may carry a huge high/low ratio), so every node
also records its norm.  Snapping of negligible branches and the quantization
grid are both measured against the effective branch magnitudes
``|weight| * child.norm`` rather than raw weights.

Zero edges always point to the terminal with weight 0.  No level is ever
skipped, so both operands of a binary operation are always at the same level.
"""

from __future__ import annotations

import math
import threading
from typing import Iterator, NamedTuple

import numpy as np

from .amplitude import DEFAULT_TOLERANCE, N_STATE_CAP, DenseState, TolerancePolicy
from .errors import CapacityError, DimensionError, DomainError, ParseError


class DDNode:
    """``norm`` is the 2-norm of the sub-vector the node represents (incoming weight 1)."""

    __slots__ = ("id", "level", "low", "high", "norm")

    def __init__(self, id: int, level: int, low: "DDEdge | None", high: "DDEdge | None", norm: float = 1.0):
        self.id = id
        self.level = level
        self.low = low
        self.high = high
        self.norm = norm

    def __repr__(self):
        if self.level < 0:
            return "DDNode(terminal)"
        return f"DDNode(id={self.id}, level={self.level})"


class DDEdge(NamedTuple):
    weight: complex
    target: DDNode


TERMINAL = DDNode(0, -1, None, None)
ZERO_EDGE = DDEdge(0j, TERMINAL)
ONE_EDGE = DDEdge(1 + 0j, TERMINAL)

_tuple_new = tuple.__new__
_frexp = math.frexp
_ldexp = math.ldexp
_hypot = math.hypot


def _edge(weight: complex, target: DDNode) -> DDEdge:
    return _tuple_new(DDEdge, (weight, target))


def _target_id(edge) -> int:
    return edge[1].id


class DDState:
    """A state vector held by a :class:`DDManager`."""

    __slots__ = ("manager", "n", "root")

    def __init__(self, manager: "DDManager", n: int, root: DDEdge):
        self.manager = manager
        self.n = n
        self.root = root

    def to_dense(self) -> DenseState:
        return dd_decode(self)

    def norm(self) -> float:
        return math.sqrt(max(dd_inner_product(self, self).real, 0.0))

    def is_zero(self) -> bool:
        return self.root.weight == 0

    def same_as(self, other: "DDState") -> bool:
        """Canonical equality: identical root node and root weights within eps_amp."""
        return (
            self.manager is other.manager
            and self.n == other.n
            and self.root.target is other.root.target
            and abs(self.root.weight - other.root.weight) <= self.manager.tol.eps_amp
        )

    __eq__ = same_as
    __hash__ = None  # type: ignore[assignment]

    def __repr__(self):
        return f"DDState(n={self.n}, nodes={dd_node_count(self)})"


class DDManager:
    """Unique table plus node-id allocation for one family of DDs.

    A manager must only be used by one thread at a time; run independent
    computations on separate managers.
    """

    def __init__(self, tol: TolerancePolicy = DEFAULT_TOLERANCE):
        self.tol = tol
        self._eps = tol.eps_amp
        self._unique: dict[tuple, DDNode] = {}
        self._next_id = 1
        # compiled diagonal gates, keyed by id(gate); the gate is kept alive alongside
        self._diagonals: dict[int, tuple[object, DDEdge]] = {}

    def __len__(self):
        return len(self._unique)

    # -- node construction --------------------------------------------------

    def make_node(self, level: int, low: DDEdge, high: DDEdge) -> DDEdge:
        """Return the normalized edge to the unique node with the given successors."""
        lw, lt = low
        hw, ht = high
        alw = abs(lw) * lt.norm if lw != 0 else 0.0
        ahw = abs(hw) * ht.norm if hw != 0 else 0.0
        m = alw if alw > ahw else ahw
        if m == 0:
            return ZERO_EDGE
        cut = self._eps * m
        if alw <= cut:
            lw = 0
        elif ahw <= cut:
            hw = 0
        if lw != 0:
            factor = lw
            if hw != 0:
                ratio = hw / lw
                hn = ht.norm
                ln = lt.norm
                arh = abs(ratio) * hn
                # grid spacing eps relative to the node magnitude, in units of the high weight
                exp = _frexp(self._eps * (ln if ln > arh else arh) / hn)[1]
                grid = _ldexp(1.0, exp)
                key = (level, lt.id, ht.id, exp, round(ratio.real / grid), round(ratio.imag / grid))
                node = self._unique.get(key)
                if node is None:
                    node = DDNode(self._next_id, level, _edge(1 + 0j, lt), _edge(ratio, ht), _hypot(ln, arh))
                    self._next_id += 1
                    self._unique[key] = node
            else:
                key = (level, lt.id, -1)
                node = self._unique.get(key)
                if node is None:
                    node = DDNode(self._next_id, level, _edge(1 + 0j, lt), ZERO_EDGE, lt.norm)
                    self._next_id += 1
                    self._unique[key] = node
        else:
            factor = hw
            key = (level, -1, ht.id)
            node = self._unique.get(key)
            if node is None:
                node = DDNode(self._next_id, level, ZERO_EDGE, _edge(1 + 0j, ht), ht.norm)
                self._next_id += 1
                self._unique[key] = node
        return _edge(complex(factor), node)

    def collect(self, roots) -> int:
        """Drop unique-table entries not reachable from ``roots``; returns the new size.

        ``roots`` may mix :class:`DDState` and :class:`DDEdge` values.  Compiled
        diagonal gates are always kept.
        """
        live: set[int] = set()
        stack = []
        for r in roots:
            edge = r.root if isinstance(r, DDState) else r
            stack.append(edge[1])
        stack.extend(edge[1] for _, edge in self._diagonals.values())
        while stack:
            node = stack.pop()
            if node.level < 0 or node.id in live:
                continue
            live.add(node.id)
            stack.append(node.low[1])
            stack.append(node.high[1])
        self._unique = {k: nd for k, nd in self._unique.items() if nd.id in live}
        return len(self._unique)

    def wrap(self, n: int, root: DDEdge) -> DDState:
        return DDState(self, n, root)

    # -- constructors ---------------------------------------------------------

    def basis_state(self, n: int, index: int) -> DDState:
        if not 0 <= index < (1 << n):
            raise IndexError(f"basis index {index} out of range for n={n}")
        edge = ONE_EDGE
        for level in range(n):
            if (index >> level) & 1:
                edge = self.make_node(level, ZERO_EDGE, edge)
            else:
                edge = self.make_node(level, edge, ZERO_EDGE)
        return DDState(self, n, edge)

    def uniform(self, n: int) -> DDState:
        edge = ONE_EDGE
        for level in range(n):
            edge = self.make_node(level, edge, edge)
        return DDState(self, n, DDEdge(edge.weight * 2.0 ** (-n / 2), edge.target))

    def zero(self, n: int) -> DDState:
        return DDState(self, n, ZERO_EDGE)

    def from_dense(self, vector) -> DDState:
        arr = np.asarray(getattr(vector, "amplitudes", vector), dtype=np.complex128).reshape(-1)
        size = arr.shape[0]
        n = size.bit_length() - 1
        if size == 0 or (1 << n) != size:
            raise DimensionError(f"vector length {size} is not a power of two")
        edges = [DDEdge(complex(a), TERMINAL) if a != 0 else ZERO_EDGE for a in arr.tolist()]
        for level in range(n):
            edges = [self.make_node(level, edges[i], edges[i + 1]) for i in range(0, len(edges), 2)]
        return DDState(self, n, edges[0])

    def from_sparse(self, n: int, items) -> DDState:
        """Build a DD from ``(index, amplitude)`` pairs; repeated indices are summed."""
        acc: dict[int, complex] = {}
        for idx, amp in items:
            if not 0 <= idx < (1 << n):
                raise IndexError(f"basis index {idx} out of range for n={n}")
            acc[idx] = acc.get(idx, 0j) + complex(amp)
        ordered = sorted((i, a) for i, a in acc.items() if a != 0)
        return DDState(self, n, self._build_sparse(n - 1, ordered))

    def _build_sparse(self, level: int, items: list) -> DDEdge:
        if not items:
            return ZERO_EDGE
        if level < 0:
            return DDEdge(items[0][1], TERMINAL)
        bit = 1 << level
        split = len(items)
        for pos, (idx, _) in enumerate(items):
            if idx & bit:
                split = pos
                break
        low = self._build_sparse(level - 1, items[:split])
        high = self._build_sparse(level - 1, [(i ^ bit, a) for i, a in items[split:]])
        return self.make_node(level, low, high)

    # -- arithmetic on edges --------------------------------------------------

    def add_edges(self, a: DDEdge, b: DDEdge, cache: dict) -> DDEdge:
        wa, na = a
        wb, nb = b
        if wa == 0:
            return b
        if wb == 0:
            return a
        if na is nb:
            w = wa + wb
            aa = abs(wa)
            ab = abs(wb)
            if abs(w) <= self._eps * (aa if aa > ab else ab):
                return ZERO_EDGE
            return _edge(w, na)
        if na.id > nb.id:
            na, nb, wa, wb = nb, na, wb, wa
        ratio = wb / wa
        key = (na.id, nb.id, ratio)
        r = cache.get(key)
        if r is None:
            blw, blt = nb.low
            bhw, bht = nb.high
            low = self.add_edges(na.low, _edge(ratio * blw, blt) if blw != 0 else ZERO_EDGE, cache)
            high = self.add_edges(na.high, _edge(ratio * bhw, bht) if bhw != 0 else ZERO_EDGE, cache)
            r = self.make_node(na.level, low, high)
            cache[key] = r
        rw = r[0]
        if rw == 0:
            return ZERO_EDGE
        return _edge(rw * wa, r[1])

    def lincomb_edges(self, terms, cache: dict) -> DDEdge:
        """``sum_k terms[k]`` for edges on one level, built in a single traversal."""
        terms = [t for t in terms if t[0] != 0]
        if not terms:
            return ZERO_EDGE
        if len(terms) == 1:
            w, t = terms[0]
            return _edge(w, t)
        terms.sort(key=_target_id)
        eps = self._eps
        items = []
        prev = None
        for w, t in terms:
            if t is prev:
                acc = items[-1]
                acc[0] += w
                aw = abs(w)
                if aw > acc[2]:
                    acc[2] = aw
            else:
                items.append([w, t, abs(w)])
                prev = t
        items = [(w, t) for w, t, scale in items if abs(w) > eps * scale]
        if not items:
            return ZERO_EDGE
        if len(items) == 1:
            return _edge(items[0][0], items[0][1])
        w0 = items[0][0]
        first = items[0][1]
        ratios = [w / w0 for w, _ in items]
        key = (tuple([t.id for _, t in items]), tuple(ratios))
        r = cache.get(key)
        if r is None:
            lows = []
            highs = []
            for ratio, (_, t) in zip(ratios, items):
                lw, lt = t.low
                if lw != 0:
                    lows.append((ratio * lw, lt))
                hw, ht = t.high
                if hw != 0:
                    highs.append((ratio * hw, ht))
            r = self.make_node(first.level, self.lincomb_edges(lows, cache), self.lincomb_edges(highs, cache))
            cache[key] = r
        rw = r[0]
        if rw == 0:
            return ZERO_EDGE
        return _edge(rw * w0, r[1])

    def inner_edges(self, a: DDEdge, b: DDEdge, cache: dict) -> complex:
        wa, na = a
        wb, nb = b
        if wa == 0 or wb == 0:
            return 0j
        if na.level < 0:
            return wa.conjugate() * wb
        return wa.conjugate() * wb * self._inner_nodes(na, nb, cache)

    def _inner_nodes(self, na: DDNode, nb: DDNode, cache: dict) -> complex:
        key = (na.id << 32) | nb.id
        r = cache.get(key)
        if r is not None:
            return r
        r = 0j
        wa, ta = na.low
        wb, tb = nb.low
        if wa != 0 and wb != 0:
            r = wa.conjugate() * wb * (1.0 if ta.level < 0 else self._inner_nodes(ta, tb, cache))
        wa, ta = na.high
        wb, tb = nb.high
        if wa != 0 and wb != 0:
            r += wa.conjugate() * wb * (1.0 if ta.level < 0 else self._inner_nodes(ta, tb, cache))
        cache[key] = r
        return r

    def multiply_edges(self, a: DDEdge, b: DDEdge, cache: dict) -> DDEdge:
        """Elementwise (Hadamard) product."""
        if a.weight == 0 or b.weight == 0:
            return ZERO_EDGE
        w = a.weight * b.weight
        na = a.target
        nb = b.target
        if na.level < 0:
            return DDEdge(w, TERMINAL)
        key = (na.id, nb.id)
        r = cache.get(key)
        if r is None:
            r = self.make_node(
                na.level,
                self.multiply_edges(na.low, nb.low, cache),
                self.multiply_edges(na.high, nb.high, cache),
            )
            cache[key] = r
        if r.weight == 0:
            return ZERO_EDGE
        return DDEdge(w * r.weight, r.target)

    def apply_1q_edge(self, edge: DDEdge, matrix, target: int, controls: frozenset = frozenset()) -> DDEdge:
        """Apply a (not necessarily unitary) 2x2 block acting on qubit ``target``.

        ``controls`` must all lie above ``target``; on a control level the low
        branch is passed through untouched.
        """
        m00, m01, m10, m11 = (complex(x) for x in np.asarray(matrix).reshape(-1))
        node_cache: dict[int, DDEdge] = {}
        add_cache: dict = {}
        make = self.make_node
        add = self.add_edges

        def child(e: DDEdge) -> DDEdge:
            w, t = e
            if w == 0:
                return ZERO_EDGE
            r = rec(t)
            rw = r[0]
            if rw == 0:
                return ZERO_EDGE
            return _edge(w * rw, r[1])

        def rec(node: DDNode) -> DDEdge:
            r = node_cache.get(node.id)
            if r is not None:
                return r
            level = node.level
            if level > target:
                if level in controls:
                    r = make(level, node.low, child(node.high))
                else:
                    r = make(level, child(node.low), child(node.high))
            else:
                w0, t0 = node.low
                w1, t1 = node.high
                a0 = _edge(m00 * w0, t0) if m00 != 0 and w0 != 0 else ZERO_EDGE
                a1 = _edge(m01 * w1, t1) if m01 != 0 and w1 != 0 else ZERO_EDGE
                b0 = _edge(m10 * w0, t0) if m10 != 0 and w0 != 0 else ZERO_EDGE
                b1 = _edge(m11 * w1, t1) if m11 != 0 and w1 != 0 else ZERO_EDGE
                r = make(level, add(a0, a1, add_cache), add(b0, b1, add_cache))
            node_cache[node.id] = r
            return r

        return child(edge)

    def project_ones_edge(self, edge: DDEdge, qubits: frozenset) -> DDEdge:
        """Zero every amplitude whose bits at ``qubits`` are not all 1."""
        if not qubits:
            return edge
        lowest = min(qubits)
        node_cache: dict[int, DDEdge] = {}

        def child(e: DDEdge) -> DDEdge:
            if e.weight == 0:
                return ZERO_EDGE
            r = rec(e.target)
            if r.weight == 0:
                return ZERO_EDGE
            return DDEdge(e.weight * r.weight, r.target)

        def rec(node: DDNode) -> DDEdge:
            if node.level < lowest:
                return DDEdge(1 + 0j, node)
            r = node_cache.get(node.id)
            if r is None:
                if node.level in qubits:
                    r = self.make_node(node.level, ZERO_EDGE, child(node.high))
                else:
                    r = self.make_node(node.level, child(node.low), child(node.high))
                node_cache[node.id] = r
            return r

        return child(edge)

    def nonzero_paths(self, edge: DDEdge) -> Iterator[tuple[int, complex]]:
        """Yield ``(index, amplitude)`` for every nonzero amplitude."""
        if edge.weight == 0:
            return
        stack = [(edge.target, edge.weight, 0)]
        while stack:
            node, w, idx = stack.pop()
            if node.level < 0:
                yield idx, w
                continue
            h = node.high
            if h.weight != 0:
                stack.append((h.target, w * h.weight, idx | (1 << node.level)))
            lo = node.low
            if lo.weight != 0:
                stack.append((lo.target, w * lo.weight, idx))


_local = threading.local()


def default_manager() -> DDManager:
    """Per-thread default manager used when none is given explicitly."""
    mgr = getattr(_local, "manager", None)
    if mgr is None:
        mgr = _local.manager = DDManager()
    return mgr


def _same_manager(a: DDState, b: DDState):
    if a.n != b.n:
        raise DimensionError(f"state dimensions differ: n={a.n} vs n={b.n}")
    if a.manager is not b.manager:
        raise DomainError("decision diagrams belong to different managers")


def dd_from_basis_state(n: int, d: int, manager: DDManager | None = None) -> DDState:
    return (manager if manager is not None else default_manager()).basis_state(n, d)


def dd_from_dense(vector, manager: DDManager | None = None) -> DDState:
    return (manager if manager is not None else default_manager()).from_dense(vector)


def dd_add(a: DDState, b: DDState) -> DDState:
    _same_manager(a, b)
    return DDState(a.manager, a.n, a.manager.add_edges(a.root, b.root, {}))


def dd_scale(alpha: complex, a: DDState) -> DDState:
    w = complex(alpha) * a.root.weight
    if w == 0:
        return DDState(a.manager, a.n, ZERO_EDGE)
    return DDState(a.manager, a.n, DDEdge(w, a.root.target))


def dd_axpy(alpha: complex, x: DDState, y: DDState) -> DDState:
    """``y + alpha * x`` in one traversal."""
    return dd_add(dd_scale(alpha, x), y)


def dd_inner_product(a: DDState, b: DDState) -> complex:
    """``<a|b>``, conjugate-linear in ``a``."""
    _same_manager(a, b)
    return a.manager.inner_edges(a.root, b.root, {})


def dd_lincomb(coeffs, states) -> DDState:
    """``sum_k coeffs[k] * states[k]`` in one traversal."""
    states = list(states)
    if not states:
        raise DomainError("dd_lincomb needs at least one state")
    for s in states[1:]:
        _same_manager(states[0], s)
    mgr = states[0].manager
    terms = [(complex(c) * s.root.weight, s.root.target) for c, s in zip(coeffs, states)]
    return DDState(mgr, states[0].n, mgr.lincomb_edges(terms, {}))


def dd_multiply(a: DDState, b: DDState) -> DDState:
    _same_manager(a, b)
    return DDState(a.manager, a.n, a.manager.multiply_edges(a.root, b.root, {}))


def dd_decode(a: DDState) -> DenseState:
    if a.n > N_STATE_CAP:
        raise CapacityError(f"cannot decode a {a.n}-qubit DD into a dense vector (cap {N_STATE_CAP})")
    if a.root.weight == 0:
        return DenseState.zero(a.n)
    cache: dict[int, np.ndarray] = {}

    def rec(node: DDNode) -> np.ndarray:
        if node.level < 0:
            return np.ones(1, dtype=np.complex128)
        r = cache.get(node.id)
        if r is None:
            half = 1 << node.level
            parts = []
            for e in (node.low, node.high):
                if e.weight == 0:
                    parts.append(np.zeros(half, dtype=np.complex128))
                else:
                    parts.append(e.weight * rec(e.target))
            r = np.concatenate(parts)
            cache[node.id] = r
        return r

    return DenseState(a.n, a.root.weight * rec(a.root.target), copy=False)


def dd_amplitude(a: DDState, index: int) -> complex:
    if not 0 <= index < (1 << a.n):
        raise IndexError(f"basis index {index} out of range for n={a.n}")
    edge = a.root
    w = edge.weight
    node = edge.target
    while w != 0 and node.level >= 0:
        edge = node.high if (index >> node.level) & 1 else node.low
        w *= edge.weight
        node = edge.target
    return complex(w)


def _reachable(a: DDState) -> list[DDNode]:
    seen: dict[int, DDNode] = {}
    stack = [a.root.target] if a.root.weight != 0 else []
    while stack:
        node = stack.pop()
        if node.level < 0 or node.id in seen:
            continue
        seen[node.id] = node
        for e in (node.low, node.high):
            if e.weight != 0:
                stack.append(e.target)
    return list(seen.values())


def dd_node_count(a: DDState) -> int:
    """Number of distinct nonterminal nodes reachable from the root."""
    return len(_reachable(a))


def dd_tree_size(a: DDState) -> int:
    """Nonterminal node count of the same diagram with all sharing undone."""
    if a.root.weight == 0:
        return 0
    cache: dict[int, int] = {}

    def rec(node: DDNode) -> int:
        if node.level < 0:
            return 0
        r = cache.get(node.id)
        if r is None:
            r = 1 + sum(rec(e.target) for e in (node.low, node.high) if e.weight != 0)
            cache[node.id] = r
        return r

    return rec(a.root.target)


def _fmt(w: complex) -> str:
    return f"{float(w.real)!r},{float(w.imag)!r}"


def dd_export(a: DDState) -> str:
    """Graph text: a header, a root line, then one node per line (children first).

    Node lines read ``id level low_id low_weight high_id high_weight`` with
    weights written as ``re,im``; id 0 is the terminal.
    """
    nodes = sorted(_reachable(a), key=lambda nd: (nd.level, nd.id))
    lines = [f"dd n={a.n} nodes={len(nodes)}", f"root {a.root.target.id} {_fmt(a.root.weight)}"]
    for nd in nodes:
        lines.append(
            f"{nd.id} {nd.level} {nd.low.target.id} {_fmt(nd.low.weight)} {nd.high.target.id} {_fmt(nd.high.weight)}"
        )
    return "\n".join(lines) + "\n"


def _parse_complex(token: str) -> complex:
    re_s, im_s = token.split(",")
    return complex(float(re_s), float(im_s))


def dd_import(text: str, manager: DDManager | None = None) -> DDState:
    """Inverse of :func:`dd_export`; nodes are re-canonicalized in ``manager``."""
    mgr = manager if manager is not None else default_manager()
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    try:
        header = dict(tok.split("=") for tok in lines[0].split()[1:])
        n = int(header["n"])
        _, root_id, root_w = lines[1].split()
        built: dict[int, DDEdge] = {0: ONE_EDGE}
        for lineno, ln in enumerate(lines[2:], start=3):
            nid, level, lid, lw, hid, hw = ln.split()
            low_w = _parse_complex(lw)
            high_w = _parse_complex(hw)

            def edge(cid: str, w: complex) -> DDEdge:
                if w == 0:
                    return ZERO_EDGE
                sub = built[int(cid)]
                return DDEdge(w * sub.weight, sub.target)

            built[int(nid)] = mgr.make_node(int(level), edge(lid, low_w), edge(hid, high_w))
        rw = _parse_complex(root_w)
        if rw == 0:
            return DDState(mgr, n, ZERO_EDGE)
        sub = built[int(root_id)]
        return DDState(mgr, n, DDEdge(rw * sub.weight, sub.target))
    except (ValueError, KeyError, IndexError) as exc:
        raise ParseError(0, f"malformed DD export: {exc}") from exc
