import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import ORACLE_CASES
from impvqe.pauli import (PauliTerm, QubitOperator, commutator_over_2i, count_y, from_mapping, multiply,
                          symplectic_form, weight)

labels = st.integers(1, 4).flatmap(lambda n: st.text("IXYZ", min_size=n, max_size=n))
pairs = st.integers(1, 4).flatmap(
    lambda n: st.tuples(st.text("IXYZ", min_size=n, max_size=n), st.text("IXYZ", min_size=n, max_size=n)))


def test_single_letters():
    assert np.allclose(PauliTerm.from_string("X").to_matrix(), [[0, 1], [1, 0]])
    assert np.allclose(PauliTerm.from_string("Y").to_matrix(), [[0, -1j], [1j, 0]])
    assert np.allclose(PauliTerm.from_string("Z").to_matrix(), [[1, 0], [0, -1]])


def test_rightmost_letter_is_qubit_zero():
    p = PauliTerm.from_string("XZ")
    assert p.letter(0) == "Z" and p.letter(1) == "X"
    assert np.allclose(p.to_matrix(), np.kron([[0, 1], [1, 0]], np.diag([1, -1])))


def test_xy_product():
    r = multiply(PauliTerm.from_string("X"), PauliTerm.from_string("Y"))
    assert r.label() == "Z" and r.coefficient == 1j


def test_bad_label():
    with pytest.raises(ValueError):
        PauliTerm.from_string("XQ")


@given(labels)
def test_label_roundtrip(s):
    assert PauliTerm.from_string(s).label() == s


@settings(max_examples=ORACLE_CASES)
@given(pairs)
def test_product_matches_dense(ab):
    a, b = (PauliTerm.from_string(s) for s in ab)
    r = multiply(a, b)
    assert np.allclose(r.coefficient * r.unsigned().to_matrix(), a.to_matrix() @ b.to_matrix())


@settings(max_examples=ORACLE_CASES)
@given(pairs)
def test_commutation_matches_dense(ab):
    a, b = (PauliTerm.from_string(s) for s in ab)
    A, B = a.to_matrix(), b.to_matrix()
    assert a.commutes_with(b) == np.allclose(A @ B, B @ A)
    assert symplectic_form(a, b) == (0 if a.commutes_with(b) else 1)


@given(pairs)
def test_commutator_over_2i(ab):
    a, b = (PauliTerm.from_string(s) for s in ab)
    A, B = a.to_matrix(), b.to_matrix()
    c = commutator_over_2i(a, b)
    assert np.allclose(c.to_matrix(), (A @ B - B @ A) / 2j)


@given(labels)
def test_weight_and_y_count(s):
    p = PauliTerm.from_string(s)
    assert weight(p) == sum(ch != "I" for ch in s)
    assert count_y(p) == s.count("Y")


@settings(max_examples=ORACLE_CASES)
@given(st.integers(1, 3).flatmap(lambda n: st.lists(
    st.tuples(st.text("IXYZ", min_size=n, max_size=n), st.floats(-2, 2), st.floats(-2, 2)),
    min_size=1, max_size=6)))
def test_operator_algebra_matches_dense(terms):
    n = len(terms[0][0])
    op = QubitOperator.from_terms(n, [(s, re + 1j * im) for s, re, im in terms])
    dense = sum((re + 1j * im) * PauliTerm.from_string(s).to_matrix() for s, re, im in terms)
    assert np.allclose(op.to_matrix(), dense)
    assert np.allclose((op * op).to_matrix(), dense @ dense)
    assert np.allclose(op.adjoint().to_matrix(), dense.conj().T)
    simp = op.simplify()
    assert np.allclose(simp.to_matrix(), dense)
    assert all(abs(c) > 1e-12 for _, c in simp.items())


def test_duplicates_merge():
    op = from_mapping(2, {"XZ": 1.0}) + from_mapping(2, {"XZ": -1.0, "YY": 0.5})
    assert len(op.simplify()) == 1


def test_hermiticity_flags():
    assert from_mapping(1, {"X": 1.0, "Z": 2.0}).is_hermitian()
    assert not from_mapping(1, {"X": 1j}).is_hermitian()
