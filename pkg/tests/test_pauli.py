import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from topocrit.lattice import build_lattice
from topocrit.pauli import (
    DenseCapError,
    DimensionError,
    PauliString,
    commutes,
    dense_matrix,
    multiply,
    product,
    restrict,
)

from conftest import kron_text


def paulis(n_min=1, n_max=6):
    @st.composite
    def build(draw, n=None):
        n = n if n is not None else draw(st.integers(n_min, n_max))
        x = draw(st.integers(0, (1 << n) - 1))
        z = draw(st.integers(0, (1 << n) - 1))
        ph = draw(st.integers(0, 3))
        return PauliString(n, x, z, ph)

    return build


@st.composite
def same_size(draw, k=2, n_max=6):
    n = draw(st.integers(1, n_max))
    return [draw(paulis()(n)) for _ in range(k)]


def test_x_squared_is_identity():
    x = PauliString.single(1, 0, "X")
    assert multiply(x, x).is_identity()


def test_xz_is_minus_i_y():
    x = PauliString.single(1, 0, "X")
    z = PauliString.single(1, 0, "Z")
    y = PauliString.single(1, 0, "Y")
    assert multiply(x, z) == y.with_phase(y.phase + 3)
    assert multiply(x, z).to_text() == "-iY"


def test_xx_times_zz_is_minus_yy():
    xx = PauliString.from_text("XX")
    zz = PauliString.from_text("ZZ")
    prod = multiply(xx, zz)
    assert prod.to_text() == "-YY"
    np.testing.assert_allclose(dense_matrix(prod), kron_text("XX") @ kron_text("ZZ"))


def test_size_mismatch_raises():
    with pytest.raises(DimensionError):
        multiply(PauliString.identity(2), PauliString.identity(3))
    with pytest.raises(DimensionError):
        commutes(PauliString.identity(2), PauliString.identity(3))


def test_commutation_examples():
    assert not commutes(PauliString.from_text("X"), PauliString.from_text("Z"))
    assert commutes(PauliString.from_text("XX"), PauliString.from_text("ZZ"))


def test_plaquettes_commute_with_vertices():
    lat = build_lattice("kitaev_square", 2, 4)
    for p in lat.z_stabilizers():
        for v in lat.x_stabilizers():
            overlap = bin(p.z_mask & v.x_mask).count("1")
            assert overlap in (0, 2)
            assert commutes(p, v)


def test_restrict_examples():
    a = PauliString.from_text("XZX")
    assert restrict(a, [0, 2]).to_text() == "+XX"
    ident = PauliString.identity(5)
    assert restrict(ident, [1, 3]).is_identity()
    with pytest.raises(IndexError):
        restrict(a, [3])


def test_dense_small_cases():
    np.testing.assert_array_equal(dense_matrix(PauliString.identity(1)), np.eye(2))
    np.testing.assert_array_equal(dense_matrix(PauliString.from_text("Z")), np.diag([1, -1]))
    zp = PauliString.from_support(4, range(4), "Z")
    m = dense_matrix(zp)
    np.testing.assert_array_equal(m, np.diag(np.diag(m)))
    assert np.trace(m) == 0
    np.testing.assert_array_equal(m, kron_text("ZZZZ"))
    with pytest.raises(DenseCapError):
        dense_matrix(PauliString.identity(13))


def test_text_round_trip():
    for text in ["+XIZY", "-YYI", "+iXZ", "-iIII"]:
        assert PauliString.from_text(text).to_text() == text


@settings(max_examples=200, deadline=None)
@given(same_size(k=2))
def test_commutes_matches_product_order(pair):
    a, b = pair
    ab, ba = multiply(a, b), multiply(b, a)
    assert ab.equals_up_to_phase(ba)
    assert commutes(a, b) == (ab.phase == ba.phase)


@settings(max_examples=200, deadline=None)
@given(same_size(k=3))
def test_multiplication_associative(triple):
    a, b, c = triple
    assert multiply(multiply(a, b), c) == multiply(a, multiply(b, c))


@settings(max_examples=100, deadline=None)
@given(same_size(k=2, n_max=5))
def test_dense_is_homomorphism(pair):
    a, b = pair
    np.testing.assert_allclose(dense_matrix(multiply(a, b)), dense_matrix(a) @ dense_matrix(b),
                               atol=0)


@settings(max_examples=100, deadline=None)
@given(paulis(1, 6)())
def test_dense_matches_kron_oracle(a):
    np.testing.assert_allclose(dense_matrix(a), kron_text(a.to_text()))


@settings(max_examples=100, deadline=None)
@given(paulis(2, 8)(), st.data())
def test_restrict_idempotent(a, data):
    omega = data.draw(st.lists(st.integers(0, a.n_qubits - 1), min_size=1, unique=True))
    r = restrict(a, omega)
    assert restrict(r, range(len(omega))) == r
    assert r.is_hermitian()


def test_product_of_empty_needs_size():
    assert product([], 3).is_identity()
    with pytest.raises(ValueError):
        product([])
