import math

import numpy as np
import pytest

from conftest import random_state
from oracles import cut_values, dft_matrix, embed_1q, grover_matrix, kron_1q, order_loop, sat_values
from qlump.amplitude import DenseState
from qlump.circuit import (
    FIXED_1Q,
    Circuit,
    Gate,
    Graph,
    SatFormula,
    apply_circuit,
    circuit_matrix,
    family_circuit,
    grover_circuit,
    identity_circuit,
    multiplicative_order,
    order_finding_circuit,
    qaoa_problem_step,
    random_circuit,
    random_graph,
    random_sat_formula,
)
from qlump.dd import DDManager, dd_amplitude, dd_decode
from qlump.errors import CapacityError, DimensionError, DomainError

S2 = 1 / math.sqrt(2)


def dense_run(c, v):
    return apply_circuit(c, DenseState(c.n, v)).amplitudes


def dd_run(c, v):
    return dd_decode(apply_circuit(c, DDManager().from_dense(v))).amplitudes


def test_pauli_x_examples():
    x = Circuit(1, (Gate("X", (0,)),))
    np.testing.assert_allclose(dense_run(x, [1, 0]), [0, 1])
    np.testing.assert_allclose(dense_run(x, [S2, -S2]), [-S2, S2])
    np.testing.assert_allclose(dd_run(x, np.array([S2, -S2])), [-S2, S2])


@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_ghz_state(n):
    out = dense_run(family_circuit("ghz", n), DenseState.basis(n, 0).amplitudes)
    expected = np.zeros(1 << n)
    expected[0] = expected[-1] = S2
    np.testing.assert_allclose(out, expected, atol=1e-14)


@pytest.mark.parametrize("kind", sorted(FIXED_1Q))
@pytest.mark.parametrize("target", [0, 2])
def test_single_qubit_gates_match_kronecker(kind, target):
    c = Circuit(3, (Gate(kind, (target,)),))
    np.testing.assert_allclose(circuit_matrix(c), kron_1q(FIXED_1Q[kind], target, 3), atol=1e-14)


@pytest.mark.parametrize("kind", ["RX", "RY", "RZ", "Phase"])
def test_rotations_and_controls_match_oracle(kind):
    g = Gate(kind, (1,), (0, 3), (0.37,))
    c = Circuit(4, (g,))
    np.testing.assert_allclose(circuit_matrix(c), embed_1q(g.matrix(), 1, 4, (0, 3)), atol=1e-14)


def test_rotation_conventions():
    t = 0.8
    np.testing.assert_allclose(Gate("RZ", (0,), (), (t,)).matrix(), np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)]))
    np.testing.assert_allclose(Gate("Phase", (0,), (), (t,)).matrix(), np.diag([1, np.exp(1j * t)]))
    rx = Gate("RX", (0,), (), (t,)).matrix()
    np.testing.assert_allclose(rx, [[math.cos(t / 2), -1j * math.sin(t / 2)], [-1j * math.sin(t / 2), math.cos(t / 2)]])


def test_swap_matrix():
    c = Circuit(2, (Gate("SWAP", (0, 1)),))
    np.testing.assert_allclose(circuit_matrix(c), np.eye(4)[[0, 2, 1, 3]])


@pytest.mark.parametrize("n", [2, 3, 4])
def test_qft_matches_dft(n):
    np.testing.assert_allclose(circuit_matrix(family_circuit("qft", n)), dft_matrix(n), atol=1e-12)


@pytest.mark.parametrize("n", [2, 5, 9])
def test_qft_maps_zero_and_uniform(n):
    c = family_circuit("qft", n)
    psi = DenseState.uniform(n).amplitudes
    np.testing.assert_allclose(dense_run(c, DenseState.basis(n, 0).amplitudes), psi, atol=1e-12)
    np.testing.assert_allclose(dense_run(c, psi), DenseState.basis(n, 0).amplitudes, atol=1e-12)


@pytest.mark.parametrize("n, marked", [(2, [1]), (3, [5]), (4, [7]), (4, [0, 3, 9]), (5, list(range(16)))])
def test_grover_matches_formula(n, marked):
    np.testing.assert_allclose(circuit_matrix(grover_circuit(n, marked)), grover_matrix(n, marked), atol=1e-12)


def test_grover_domain():
    with pytest.raises(DomainError):
        grover_circuit(3, range(5))
    with pytest.raises(DomainError):
        grover_circuit(3, [])
    with pytest.raises(DomainError):
        grover_circuit(3, [8])


def test_qaoa_single_clause():
    step = qaoa_problem_step(SatFormula(1, ((1,),)), 0.1)
    np.testing.assert_allclose(circuit_matrix(step), np.diag([1, np.exp(-0.1j)]), atol=1e-15)
    with pytest.raises(DomainError):
        qaoa_problem_step(SatFormula(1, ((1,),)), 0.0)


def test_problem_values_match_oracle(rng):
    for n in range(1, 7):
        f = random_sat_formula(n, rng)
        assert n <= f.size <= 3 * n
        assert all(1 <= len(cl) <= 3 for cl in f.clauses)
        assert {abs(l) for cl in f.clauses for l in cl} == set(range(1, n + 1))
        np.testing.assert_array_equal(f.values(), sat_values(n, f.clauses))
    for n in range(2, 7):
        g = random_graph(n, 1 / 3, rng)
        assert g.size >= 1
        np.testing.assert_array_equal(g.values(), cut_values(n, sorted(g.edges)))
    np.testing.assert_array_equal(Graph(2, frozenset({(0, 1)})).values(), [0, 1, 1, 0])


def test_order_finding_small():
    c = order_finding_circuit(2, 3)
    assert c.n == 2
    np.testing.assert_array_equal(c.gates[0].perm_table(), [0, 2, 1, 3])
    with pytest.raises(DomainError):
        order_finding_circuit(3, 15)
    assert multiplicative_order(7, 15) == order_loop(7, 15) == 4


@pytest.mark.parametrize("family", ["ghz", "qft", "dj", "graphstate", "wstate"])
def test_families_are_unitary_and_backends_agree(family, rng):
    c = family_circuit(family, 5, rng=rng)
    u = circuit_matrix(c)
    np.testing.assert_allclose(u.conj().T @ u, np.eye(32), atol=1e-12)
    v = random_state(rng, 5)
    np.testing.assert_allclose(dd_run(c, v), dense_run(c, v), atol=1e-12)


def test_wstate():
    out = dense_run(family_circuit("wstate", 4), DenseState.basis(4, 0).amplitudes)
    expected = np.zeros(16)
    expected[[1, 2, 4, 8]] = 0.5
    np.testing.assert_allclose(np.abs(out), expected, atol=1e-12)


@pytest.mark.parametrize("seed", range(12))
def test_random_circuits_dense_dd_agree(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    c = random_circuit(n, 25, rng)
    v = random_state(rng, n)
    np.testing.assert_allclose(dd_run(c, v), dense_run(c, v), atol=1e-12)
    np.testing.assert_allclose(dense_run(c.inverse(), dense_run(c, v)), v, atol=1e-12)


def test_semantic_gates_on_partial_targets(rng):
    diag = Gate("DiagonalPhase", (3, 1), func=[0.1, 0.2, 0.3, 0.4])
    perm = Gate("PermutationMap", (0, 2), func=[2, 0, 3, 1])
    c = Circuit(4, (diag, perm))
    v = random_state(rng, 4)
    expected = v * np.exp(1j * np.array([[0.1, 0.2, 0.3, 0.4][((x >> 3) & 1) | (((x >> 1) & 1) << 1)] for x in range(16)]))
    out = np.zeros(16, dtype=complex)
    table = [2, 0, 3, 1]
    for x in range(16):
        local = ((x >> 0) & 1) | (((x >> 2) & 1) << 1)
        new = table[local]
        y = (x & ~0b0101) | (new & 1) | (((new >> 1) & 1) << 2)
        out[y] = expected[x]
    np.testing.assert_allclose(dense_run(c, v), out, atol=1e-14)
    np.testing.assert_allclose(dd_run(c, v), out, atol=1e-12)


def test_gate_validation():
    with pytest.raises(DomainError):
        Gate("Foo", (0,))
    with pytest.raises(DomainError):
        Gate("X", (0,), (0,))
    with pytest.raises(DomainError):
        Gate("RX", (0,))
    with pytest.raises(DomainError):
        Gate("PermutationMap", (0,), func=[0, 0])
    with pytest.raises(DimensionError):
        Gate("DiagonalPhase", (0, 1), func=[0.0]).angle_table()
    with pytest.raises(DomainError):
        Circuit(2, (Gate("X", (2,)),))


def test_capacity_and_dimension_errors():
    with pytest.raises(CapacityError):
        circuit_matrix(identity_circuit(15))
    with pytest.raises(DimensionError):
        apply_circuit(identity_circuit(3), DenseState.basis(2, 0))


def test_dd_reaches_beyond_dense_capacity():
    c = family_circuit("ghz", 30)
    out = apply_circuit(c, DDManager().basis_state(30, 0))
    assert dd_amplitude(out, 0) == pytest.approx(S2)
    assert dd_amplitude(out, (1 << 30) - 1) == pytest.approx(S2)
