import math
import warnings

import numpy as np
import pytest

from oracles import grover_matrix
from qlump.circuit import Circuit, Gate, circuit_matrix, family_circuit, grover_circuit, order_finding_circuit, qaoa_problem_step, random_circuit, random_sat_formula
from qlump.errors import DomainError, ParseError, UnsupportedGateError
from qlump.qasm import parse_qasm, to_qasm

HEADER = 'OPENQASM 2.0;\ninclude "qelib1.inc";\n'


def test_single_x():
    c = parse_qasm(HEADER + "qreg q[1]; x q[0];")
    assert c == Circuit(1, (Gate("X", (0,)),))


def test_bell_pair():
    c = parse_qasm(HEADER + "qreg q[2];\nh q[0];\ncx q[0],q[1];\n")
    assert c.n == 2
    assert c.gates == (Gate("H", (0,)), Gate("X", (1,), (0,)))


def test_parameters_and_registers():
    text = HEADER + "qreg a[1];\nqreg b[2];\ncreg c[3];\nrz(pi/4) b[1];\nu3(0.1, -pi, 2*pi^2) a[0];\ncp(-pi/8) a[0],b[0];\n"
    c = parse_qasm(text)
    assert c.n == 3
    assert c.gates[0] == Gate("RZ", (2,), (), (math.pi / 4,))
    assert c.gates[1].params == pytest.approx((0.1, -math.pi, 2 * math.pi**2))
    assert c.gates[2] == Gate("Phase", (1,), (0,), (-math.pi / 8,))


def test_ignored_statements_warn():
    with pytest.warns(UserWarning):
        c = parse_qasm(HEADER + "qreg q[2];\ncreg c[2];\nh q[0];\nbarrier q[0],q[1];\nmeasure q[0] -> c[0];\n")
    assert len(c) == 1


def test_comments():
    c = parse_qasm(HEADER + "// a comment\nqreg q[1]; // trailing\nh q[0];\n")
    assert len(c) == 1


@pytest.mark.parametrize(
    "body, gate",
    [
        ("qreg q[2];\nrzz(0.3) q[0],q[1];\n", "rzz"),
        ("qreg q[1];\ngate foo a { x a; }\n", "gate"),
        ("qreg q[1];\ncreg c[1];\nif(c==1) x q[0];\n", "if"),
    ],
)
def test_unsupported(body, gate):
    with pytest.raises(UnsupportedGateError) as info:
        parse_qasm(HEADER + body)
    assert info.value.name == gate
    assert info.value.line >= 3


@pytest.mark.parametrize(
    "body, line",
    [
        ("qreg q[1];\nx q[3];\n", 4),
        ("qreg q[1];\nrx q[0];\n", 4),
        ("qreg q[2];\ncx q[0];\n", 4),
        ("qreg q[2];\n\ncx q[0],q[0];\n", 5),
        ("qreg q[1];\nx r[0];\n", 4),
        ("qreg q[;\n", 3),
        ("qreg q[1];\nrx(foo) q[0];\n", 4),
    ],
)
def test_syntax_errors_report_lines(body, line):
    with pytest.raises(ParseError) as info:
        parse_qasm(HEADER + body)
    assert not isinstance(info.value, UnsupportedGateError)
    assert info.value.line == line


def test_version_and_missing_register():
    with pytest.raises(ParseError):
        parse_qasm("OPENQASM 3.0;\nqubit q;\n")
    with pytest.raises(ParseError):
        parse_qasm(HEADER)


@pytest.mark.parametrize("family", ["ghz", "qft", "dj", "graphstate", "wstate"])
def test_family_round_trip(family):
    c = family_circuit(family, 5, rng=np.random.default_rng(3))
    back = parse_qasm(to_qasm(c))
    np.testing.assert_allclose(circuit_matrix(back), circuit_matrix(c), atol=1e-12)


def test_ghz_round_trip_is_equal():
    c = family_circuit("ghz", 5)
    assert parse_qasm(to_qasm(c)) == c


@pytest.mark.parametrize("seed", range(5))
def test_random_round_trip(seed):
    rng = np.random.default_rng(seed)
    c = random_circuit(4, 30, rng)
    np.testing.assert_allclose(circuit_matrix(parse_qasm(to_qasm(c))), circuit_matrix(c), atol=1e-12)


@pytest.mark.parametrize("n, marked", [(4, [7]), (3, [0, 6])])
def test_grover_export_matches_formula(n, marked):
    u = circuit_matrix(parse_qasm(to_qasm(grover_circuit(n, marked))))
    np.testing.assert_allclose(u, grover_matrix(n, marked), atol=1e-12)


def test_qaoa_export(rng):
    step = qaoa_problem_step(random_sat_formula(3, rng))
    np.testing.assert_allclose(circuit_matrix(parse_qasm(to_qasm(step))), circuit_matrix(step), atol=1e-12)


def test_permutation_export_refused():
    with pytest.raises(DomainError):
        to_qasm(order_finding_circuit(2, 15))


def test_no_header_warns():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        parse_qasm("qreg q[1]; x q[0];")
    assert caught
