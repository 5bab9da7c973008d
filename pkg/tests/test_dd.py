import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from conftest import random_state
from qlump import dd
from qlump.amplitude import DenseState
from qlump.dd import (
    DDManager,
    dd_add,
    dd_amplitude,
    dd_axpy,
    dd_decode,
    dd_export,
    dd_from_basis_state,
    dd_from_dense,
    dd_import,
    dd_inner_product,
    dd_lincomb,
    dd_node_count,
    dd_scale,
    dd_tree_size,
)
from qlump.errors import DimensionError, ParseError

S2 = 1 / math.sqrt(2)
A = 1 / (2 * math.sqrt(2))
EXAMPLE_Z = np.array([A, A, 0.5, 0, A, A, 0.5, 0])
PHI = np.array([S2, -S2])


@pytest.fixture
def mgr():
    return DDManager()


@pytest.mark.parametrize("n, index", [(1, 0), (3, 0), (2, 3), (2, 1)])
def test_basis_state_decodes(mgr, n, index):
    expected = np.zeros(1 << n)
    expected[index] = 1
    np.testing.assert_allclose(dd_decode(dd_from_basis_state(n, index, mgr)).amplitudes, expected)


def test_basis_state_out_of_range(mgr):
    with pytest.raises(IndexError):
        dd_from_basis_state(2, 4, mgr)


def test_add_examples(mgr):
    z = dd_from_dense(EXAMPLE_Z, mgr)
    np.testing.assert_allclose(dd_decode(dd_add(z, mgr.zero(3))).amplitudes, EXAMPLE_Z)
    one = dd_add(dd_from_basis_state(1, 0, mgr), dd_from_basis_state(1, 1, mgr))
    np.testing.assert_allclose(dd_decode(one).amplitudes, [1, 1])
    np.testing.assert_allclose(dd_decode(dd_add(z, z)).amplitudes, 2 * EXAMPLE_Z, atol=1e-15)


def test_add_dimension_mismatch(mgr):
    with pytest.raises(DimensionError):
        dd_add(mgr.basis_state(2, 0), mgr.basis_state(3, 0))


def test_scale_examples(mgr):
    phi = dd_from_dense(PHI, mgr)
    assert dd_scale(1, phi) == phi
    assert dd_scale(0, phi).is_zero()
    np.testing.assert_allclose(dd_decode(dd_scale(-1, phi)).amplitudes, -PHI, atol=1e-15)


def test_inner_product_examples(mgr):
    z = dd_from_dense(EXAMPLE_Z, mgr)
    assert dd_inner_product(z, z) == pytest.approx(1)
    assert dd_inner_product(mgr.basis_state(1, 0), mgr.basis_state(1, 1)) == 0
    assert dd_inner_product(dd_from_dense(PHI, mgr), mgr.basis_state(1, 0)) == pytest.approx(S2)
    with pytest.raises(DimensionError):
        dd_inner_product(mgr.basis_state(1, 0), mgr.basis_state(2, 0))


def test_example_node_counts(mgr):
    z = dd_from_dense(EXAMPLE_Z, mgr)
    assert dd_tree_size(z) == 7
    assert dd_node_count(z) == 4
    np.testing.assert_allclose(dd_decode(z).amplitudes, EXAMPLE_Z, atol=1e-15)
    assert dd_node_count(mgr.basis_state(5, 0)) == 5
    assert dd_node_count(mgr.zero(4)) == 0
    np.testing.assert_array_equal(dd_decode(mgr.zero(3)).amplitudes, np.zeros(8))


def test_ghz_is_compact(mgr):
    v = np.zeros(1 << 12)
    v[0] = v[-1] = S2
    s = dd_from_dense(v, mgr)
    assert dd_node_count(s) == 2 * 12 - 1


@given(hst.integers(1, 8), hst.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_round_trip(n, seed):
    rng = np.random.default_rng(seed)
    v = random_state(rng, n)
    s = dd_from_dense(v, DDManager())
    np.testing.assert_allclose(dd_decode(s).amplitudes, v, atol=1e-12)
    idx = int(rng.integers(1 << n))
    assert abs(dd_amplitude(s, idx) - v[idx]) < 1e-12


@given(hst.integers(1, 7), hst.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_arithmetic_matches_dense(n, seed):
    rng = np.random.default_rng(seed)
    mgr = DDManager()
    x, y = random_state(rng, n), random_state(rng, n)
    # sparse vectors stress the canonical form
    y[rng.random(1 << n) < 0.5] = 0
    alpha = complex(rng.normal(), rng.normal())
    dx, dy = dd_from_dense(x, mgr), dd_from_dense(y, mgr)
    np.testing.assert_allclose(dd_decode(dd_axpy(alpha, dx, dy)).amplitudes, y + alpha * x, atol=1e-12)
    assert abs(dd_inner_product(dx, dy) - np.vdot(x, y)) < 1e-12
    np.testing.assert_allclose(dd_decode(dd_scale(alpha, dx)).amplitudes, alpha * x, atol=1e-12)


@given(hst.integers(1, 6), hst.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_canonical_sharing(n, seed):
    """Building the same vector along two arithmetic paths yields the same root node."""
    rng = np.random.default_rng(seed)
    mgr = DDManager()
    x, y = random_state(rng, n), random_state(rng, n)
    dx, dy = dd_from_dense(x, mgr), dd_from_dense(y, mgr)
    a = dd_add(dx, dy)
    b = dd_from_dense(x + y, mgr)
    assert a.root.target is b.root.target
    assert abs(a.root.weight - b.root.weight) < 1e-12


def test_lincomb_matches_dense(rng):
    mgr = DDManager()
    vs = [random_state(rng, 5) for _ in range(6)]
    coeffs = rng.normal(size=6) + 1j * rng.normal(size=6)
    out = dd_lincomb(coeffs, [dd_from_dense(v, mgr) for v in vs])
    np.testing.assert_allclose(dd_decode(out).amplitudes, sum(c * v for c, v in zip(coeffs, vs)), atol=1e-12)


def test_cancellation_to_zero(mgr):
    v = dd_from_dense(EXAMPLE_Z, mgr)
    assert dd_axpy(-1, v, v).is_zero()


def test_small_amplitudes_survive_next_to_large_ones(mgr):
    v = np.zeros(64, dtype=complex)
    v[0] = 1.0
    v[37] = 2e-6
    s = dd_axpy(1.0, dd_from_dense(v - 0.5 * v, mgr), dd_from_dense(0.5 * v, mgr))
    np.testing.assert_allclose(dd_decode(s).amplitudes, v, atol=1e-15)


def test_export_import_round_trip(rng):
    v = random_state(rng, 4)
    v[3] = 0
    s = dd_from_dense(v, DDManager())
    other = DDManager()
    back = dd_import(dd_export(s), other)
    np.testing.assert_allclose(dd_decode(back).amplitudes, v, atol=1e-12)
    assert dd_node_count(back) == dd_node_count(s)
    with pytest.raises(ParseError):
        dd_import("dd n=2 nodes=1\nroot 9 1.0,0.0\n", other)


def test_collect_keeps_live_nodes(rng):
    mgr = DDManager()
    keep = dd_from_dense(random_state(rng, 6), mgr)
    for _ in range(5):
        dd_from_dense(random_state(rng, 6), mgr)
    before = len(mgr)
    mgr.collect([keep])
    assert len(mgr) < before
    np.testing.assert_allclose(dd_decode(keep).amplitudes, dd_decode(dd_from_dense(dd_decode(keep).amplitudes, mgr)).amplitudes)
    again = dd_from_dense(dd_decode(keep).amplitudes, mgr)
    assert again.root.target is keep.root.target


def test_decode_capacity():
    mgr = DDManager()
    big = mgr.basis_state(40, 3)
    assert dd_amplitude(big, 3) == 1
    with pytest.raises(dd.CapacityError):
        dd_decode(big)


def test_dense_state_input_accepted(mgr):
    s = dd_from_dense(DenseState.uniform(3), mgr)
    assert s.norm() == pytest.approx(1)
