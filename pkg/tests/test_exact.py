from fractions import Fraction

import numpy as np
import sympy
from hypothesis import given
from hypothesis import strategies as st

from period_dynamics import exact

small = st.integers(-6, 6)


def matrices(n):
    return st.lists(st.lists(small, min_size=n, max_size=n), min_size=n, max_size=n)


@given(matrices(4))
def test_determinant_matches_sympy(m):
    assert exact.determinant(m) == sympy.Matrix(m).det()


@given(matrices(4))
def test_inertia_matches_eigen_signs(m):
    sym = [[m[i][j] + m[j][i] for j in range(4)] for i in range(4)]
    pos, neg, zero = exact.inertia(sym)
    assert pos + neg + zero == 4
    assert zero == 4 - sympy.Matrix(sym).rank()
    eig = np.linalg.eigvalsh(np.array(sym, dtype=float))
    assert pos == int((eig > 1e-9).sum())


@given(st.lists(st.lists(small, min_size=5, max_size=5), min_size=1, max_size=3))
def test_integer_kernel_is_a_kernel_basis(rows):
    ker = exact.integer_kernel(rows, 5)
    for v in ker:
        assert all(sum(a * b for a, b in zip(r, v)) == 0 for r in rows)
    assert len(ker) == 5 - sympy.Matrix(rows).rank()
    if ker:
        assert sympy.Matrix(ker).rank() == len(ker)


def test_saturation_recovers_primitive_span():
    # 2*e1 alone saturates to e1
    assert exact.saturation([[2, 0, 0]], 3) in ([[1, 0, 0]], [[-1, 0, 0]])
    sat = exact.saturation([[2, 2, 0], [0, 2, 2]], 3)
    m = sympy.Matrix(sat)
    assert m.rank() == 2
    # index one: the 2x2 minors have gcd 1
    minors = [m[:, [i, j]].det() for i in range(3) for j in range(i + 1, 3)]
    assert sympy.gcd(minors) == 1


def test_content_and_primitive():
    assert exact.content([4, -6, 8]) == 2
    assert exact.primitive([4, -6, 8]) == [2, -3, 4]
    assert exact.clear_denominators([Fraction(1, 2), Fraction(1, 3)]) == [3, 2]


def test_exact_vectors_over_sqrt2():
    ex = exact.ExactVectors.parse([[1, 0, 0, 0, 0], [0, "sqrt(2)", 0, 1, 0]])
    assert not ex.is_rational
    assert ex.count == 2
    num = ex.evaluate()
    assert abs(num[1][1] - 2**0.5) < 1e-15
    rows = ex.constraint_rows([[1 if i == j else 0 for j in range(5)] for i in range(5)])
    ker = exact.integer_kernel(rows, 5)
    assert sorted(map(tuple, (exact.primitive(v) if v[next(i for i, x in enumerate(v) if x)] > 0
                              else [-x for x in exact.primitive(v)] for v in ker))) == [
        (0, 0, 0, 0, 1), (0, 0, 1, 0, 0)]


def test_exact_vectors_transform_is_linear():
    ex = exact.ExactVectors.parse([[1, "sqrt(3)"], ["1/2", 0]])
    swapped = ex.transform([[0, 1], [1, 0]])
    a, b = swapped.evaluate()
    assert abs(a[0] - 3**0.5) < 1e-15 and a[1] == 1.0
    assert b == [0.0, 0.5]
