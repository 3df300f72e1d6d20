import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import gauss_inverse, leibniz_det, sigma_min_float
from torus_lab.errors import GapViolationError, SingularMatrixError
from torus_lab.linalg import (
    Matrix,
    MatrixSequence,
    charpoly,
    count_roots_le,
    determinant,
    gap_constant,
    inverse_rational,
    is_expanding,
    ratio_matrix,
    smallest_singular_value,
    sturm_sequence,
)


def square(d, lo=-6, hi=6):
    return st.lists(st.lists(st.integers(lo, hi), min_size=d, max_size=d), min_size=d, max_size=d)


matrices = st.integers(1, 4).flatmap(square)


# -- examples ---------------------------------------------------------------


@pytest.mark.parametrize("rows,det", [([[2, 1], [0, 3]], 6), ([[1, 0, 0], [0, 1, 0], [0, 0, 1]], 1),
                                      ([[2, 1], [1, 1]], 1)])
def test_determinant_examples(rows, det):
    assert determinant(Matrix(rows)) == det


def test_inverse_examples():
    assert inverse_rational(Matrix([[2, 0], [0, 2]])) == Matrix.identity(2) * Fraction(1, 2)
    assert inverse_rational(Matrix([[2, 1], [0, 3]])) == Matrix([[3, -1], [0, 2]]) * Fraction(1, 6)
    assert inverse_rational(Matrix.identity(3)) == Matrix.identity(3)


def test_inverse_singular_raises():
    with pytest.raises(SingularMatrixError):
        inverse_rational(Matrix([[1, 2], [2, 4]]))


@pytest.mark.parametrize("rows,value", [([[2, 0], [0, 3]], 2.0), ([[1, 1], [0, 1]], math.sqrt((3 - math.sqrt(5)) / 2)),
                                        ([[2, 1], [0, 2]], math.sqrt((9 - math.sqrt(17)) / 2))])
def test_smallest_singular_value_examples(rows, value):
    iv = smallest_singular_value(Matrix(rows))
    assert iv.width <= Fraction(1, 10**12)
    assert float(iv.lo) - 1e-15 <= value <= float(iv.hi) + 1e-15


def test_is_expanding_examples():
    assert is_expanding(Matrix([[2, 0], [0, 2]]))
    assert not is_expanding(Matrix([[1, 1], [0, 1]]))
    assert is_expanding(Matrix([[2, 1], [0, 2]]))


def test_gap_constant_examples():
    assert gap_constant(MatrixSequence.power(Matrix.identity(2) * 2), 10) == pytest.approx(2.0, abs=1e-12)
    assert gap_constant(MatrixSequence.power([[2, 1], [0, 2]]), 10) == pytest.approx(1.561553, abs=1e-6)
    seq = MatrixSequence.from_list([Matrix.identity(2) * 2, Matrix.identity(2) * 4, Matrix.identity(2) * 6,
                                    Matrix([[7, 0], [0, 6]])])
    with pytest.raises(GapViolationError) as info:
        gap_constant(seq, 4)
    assert info.value.index == 3


def test_ratio_matrix_examples():
    A = Matrix([[2, 1], [0, 2]])
    assert ratio_matrix(MatrixSequence.power(A), 5) == (A, True)
    seq = MatrixSequence.from_list([Matrix.diag([2**n, 3**n]) for n in range(1, 6)])
    assert ratio_matrix(seq, 2) == (Matrix.diag([2, 3]), True)
    seq = MatrixSequence.from_list([Matrix.identity(2) * 2, Matrix.identity(2) * 3])
    R, integral = ratio_matrix(seq, 1)
    assert R == Matrix.identity(2) * Fraction(3, 2) and not integral


def test_charpoly_matches_numpy():
    M = Matrix([[2, 1, 0], [1, 3, 1], [0, 1, 4]])
    assert np.allclose([float(c) for c in charpoly(M)], np.poly(np.array(M.tolist(), dtype=float)))


def test_sturm_counts_known_roots():
    # (x-1)(x-2)^2(x-5)
    p = np.poly([1, 2, 2, 5]).round().astype(int).tolist()
    seq = sturm_sequence([Fraction(c) for c in p])
    assert count_roots_le(seq, Fraction(0)) == 0
    assert count_roots_le(seq, Fraction(1)) == 1
    assert count_roots_le(seq, Fraction(3)) == 2  # distinct roots
    assert count_roots_le(seq, Fraction(10)) == 3


def test_list_sequence_validation():
    seq = MatrixSequence.from_list([Matrix([[1, 1], [0, 1]])])
    with pytest.raises(ValueError):
        seq.validate(1)
    with pytest.raises(IndexError):
        seq.matrix(2)


# -- properties --------------------------------------------------------------


@given(matrices)
@settings(max_examples=150, deadline=None)
def test_determinant_matches_leibniz(rows):
    assert determinant(Matrix(rows)) == leibniz_det(rows)


@given(st.integers(1, 3).flatmap(lambda d: st.tuples(square(d), square(d))))
@settings(max_examples=100, deadline=None)
def test_determinant_multiplicative(pair):
    A, B = Matrix(pair[0]), Matrix(pair[1])
    assert determinant(A @ B) == determinant(A) * determinant(B)


@given(matrices)
@settings(max_examples=100, deadline=None)
def test_inverse_is_exact(rows):
    A = Matrix(rows)
    if determinant(A) == 0:
        with pytest.raises(SingularMatrixError):
            inverse_rational(A)
        return
    inv = inverse_rational(A)
    assert A @ inv == Matrix.identity(A.dim)
    assert inv.tolist() == gauss_inverse(rows)


@given(st.integers(1, 3).flatmap(square))
@settings(max_examples=60, deadline=None)
def test_singular_value_interval(rows):
    A = Matrix(rows)
    iv = smallest_singular_value(A)
    ref = sigma_min_float(rows)
    assert float(iv.lo) - 1e-9 <= ref <= float(iv.hi) + 1e-9
    # sanity bound sigma <= sqrt(max diag of A^T A)
    gram_diag = [sum(rows[i][j] ** 2 for i in range(A.dim)) for j in range(A.dim)]
    assert float(iv.lo) <= math.sqrt(max(gram_diag)) + 1e-12


@given(st.integers(1, 3).flatmap(square))
@settings(max_examples=40, deadline=None)
def test_singular_value_lower_bound_on_random_vectors(rows):
    A = Matrix(rows)
    lo = float(smallest_singular_value(A).lo)
    rng = random.Random(0)
    M = np.array(rows, dtype=float)
    for _ in range(1000):
        v = np.array([rng.randint(-50, 50) / 7 for _ in rows])
        n = np.linalg.norm(v)
        if n == 0:
            continue
        assert np.linalg.norm(M @ v) / n >= lo - 1e-12


@given(st.integers(1, 3).flatmap(square))
@settings(max_examples=80, deadline=None)
def test_is_expanding_agrees_with_interval(rows):
    A = Matrix(rows)
    if determinant(A) == 0:
        return
    iv = smallest_singular_value(A, Fraction(1, 10**12))
    if iv.lo > 1:
        assert is_expanding(A)
    elif iv.hi <= 1:
        assert not is_expanding(A)
