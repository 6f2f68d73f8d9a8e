"""Exact integer/rational linear algebra and exact real vectors.

Everything here works with Python ints and :class:`fractions.Fraction`, so
entries may grow without overflow.  Matrices are plain lists of rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Iterable, Sequence

import mpmath
import sympy


def as_fraction(x) -> Fraction:
    """Convert an int, Fraction, numpy integer or ``"p/q"`` string exactly."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not lattice coordinates")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    if hasattr(x, "__index__"):
        return Fraction(int(x))
    raise TypeError(f"cannot convert {x!r} to an exact rational")


def is_exact_scalar(x) -> bool:
    if isinstance(x, bool):
        return False
    return isinstance(x, (int, Fraction)) or (hasattr(x, "__index__") and not isinstance(x, float))


def content(values: Iterable) -> int:
    """gcd of a collection of integers (0 for an all-zero collection)."""
    return reduce(math.gcd, (abs(int(v)) for v in values), 0)


def clear_denominators(row: Sequence[Fraction]) -> list[int]:
    """Smallest positive multiple of ``row`` with integer entries."""
    den = reduce(lambda a, b: a * b // math.gcd(a, b), (Fraction(x).denominator for x in row), 1)
    return [int(Fraction(x) * den) for x in row]


def primitive(row: Sequence[int]) -> list[int]:
    g = content(row)
    if g == 0:
        return list(row)
    return [int(x) // g for x in row]


def mat_mul(a: Sequence[Sequence], b: Sequence[Sequence]) -> list[list]:
    bt = list(zip(*b))
    return [[sum(x * y for x, y in zip(row, col)) for col in bt] for row in a]


def mat_vec(a: Sequence[Sequence], v: Sequence) -> list:
    return [sum(x * y for x, y in zip(row, v)) for row in a]


def transpose(a: Sequence[Sequence]) -> list[list]:
    return [list(r) for r in zip(*a)]


def identity(n: int) -> list[list[int]]:
    return [[int(i == j) for j in range(n)] for i in range(n)]


def determinant(a: Sequence[Sequence[int]]) -> int:
    """Bareiss fraction-free determinant of an integer matrix."""
    m = [list(map(int, row)) for row in a]
    n = len(m)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for i in range(k + 1, n):
                if m[i][k] != 0:
                    m[k], m[i] = m[i], m[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


def inertia(a: Sequence[Sequence]) -> tuple[int, int, int]:
    """(positive, negative, zero) inertia of a symmetric rational matrix.

    Symmetric Gaussian elimination by congruence; no floating point.
    """
    m = [[as_fraction(x) for x in row] for row in a]
    n = len(m)
    for i in range(n):
        if len(m[i]) != n:
            raise ValueError("matrix is not square")
        for j in range(i):
            if m[i][j] != m[j][i]:
                raise ValueError("matrix is not symmetric")
    pos = neg = 0
    active = list(range(n))
    while active:
        piv = next((i for i in active if m[i][i] != 0), None)
        if piv is None:
            pair = next(((i, j) for i in active for j in active if i < j and m[i][j] != 0), None)
            if pair is None:
                break
            i, j = pair
            # congruence e_i -> e_i + e_j makes the (i,i) entry 2 m[i][j] != 0
            for k in range(n):
                m[i][k] += m[j][k]
            for k in range(n):
                m[k][i] += m[k][j]
            piv = i
        p = m[piv][piv]
        if p > 0:
            pos += 1
        else:
            neg += 1
        active.remove(piv)
        for i in active:
            f = m[i][piv] / p
            if f:
                for k in active:
                    m[i][k] -= f * m[piv][k]
        for i in active:
            m[i][piv] = m[piv][i] = Fraction(0)
    return pos, neg, n - pos - neg


def _row_reduce(rows: list[list[int]], ncols: int) -> list[list[int]]:
    """Integer row echelon form over the first ``ncols`` columns.

    Only unimodular operations are used, so trailing columns (if any)
    record the transformation.
    """
    rows = [list(r) for r in rows]
    r = 0
    for c in range(ncols):
        while True:
            nz = [i for i in range(r, len(rows)) if rows[i][c] != 0]
            if not nz:
                break
            i = min(nz, key=lambda k: abs(rows[k][c]))
            rows[r], rows[i] = rows[i], rows[r]
            if rows[r][c] < 0:
                rows[r] = [-x for x in rows[r]]
            done = True
            for k in range(r + 1, len(rows)):
                if rows[k][c]:
                    q = rows[k][c] // rows[r][c]
                    rows[k] = [x - q * y for x, y in zip(rows[k], rows[r])]
                    if rows[k][c]:
                        done = False
            if done:
                break
        if r < len(rows) and rows[r][c] != 0:
            for k in range(r):
                q = rows[k][c] // rows[r][c]
                if q:
                    rows[k] = [x - q * y for x, y in zip(rows[k], rows[r])]
            r += 1
            if r == len(rows):
                break
    return rows


def hermite_rows(vectors: Sequence[Sequence[int]]) -> list[list[int]]:
    """Non-zero rows of the row Hermite normal form: a canonical Z-basis of
    the lattice generated by ``vectors``."""
    vectors = [list(map(int, v)) for v in vectors]
    if not vectors:
        return []
    reduced = _row_reduce(vectors, len(vectors[0]))
    return [row for row in reduced if any(row)]


def integer_kernel(a: Sequence[Sequence], ncols: int | None = None) -> list[list[int]]:
    """Z-basis (in Hermite form) of ``{v in Z^n : a v = 0}`` for rational ``a``."""
    rows = [clear_denominators([as_fraction(x) for x in row]) for row in a]
    n = ncols if ncols is not None else (len(rows[0]) if rows else 0)
    if not rows:
        return identity(n)
    m = len(rows)
    aug = [[rows[k][i] for k in range(m)] + [int(i == j) for j in range(n)] for i in range(n)]
    reduced = _row_reduce(aug, m)
    kernel = [row[m:] for row in reduced if not any(row[:m])]
    return hermite_rows(kernel)


def saturation(vectors: Sequence[Sequence[int]], n: int) -> list[list[int]]:
    """Z-basis of ``span_Q(vectors) ∩ Z^n``."""
    vectors = [list(v) for v in vectors if any(v)]
    if not vectors:
        return []
    complement = integer_kernel(vectors, n)
    if not complement:
        return identity(n)
    return integer_kernel(complement, n)


def rational_rank(vectors: Sequence[Sequence]) -> int:
    rows = [clear_denominators([as_fraction(x) for x in v]) for v in vectors]
    if not rows:
        return 0
    return len(hermite_rows(rows))


# ---------------------------------------------------------------------------
# exact real vectors


def _split_terms(expr: sympy.Expr) -> dict[sympy.Expr, Fraction]:
    expr = sympy.expand(expr)
    out: dict[sympy.Expr, Fraction] = {}
    for term in sympy.Add.make_args(expr):
        coeff, mono = term.as_coeff_Mul()
        if not coeff.is_Rational:
            raise ValueError(f"coefficient {coeff} is not rational")
        if not (mono.is_number and mono.is_real):
            raise ValueError(f"{mono} is not a real constant")
        if mono.is_Rational:
            coeff, mono = coeff * mono, sympy.Integer(1)
        out[mono] = out.get(mono, Fraction(0)) + Fraction(int(coeff.p), int(coeff.q))
    return {k: v for k, v in out.items() if v != 0}


@dataclass(frozen=True)
class ExactVectors:
    """A tuple of real vectors with coordinates in a common number field.

    Each vector is ``sum_j numbers[j] * coeffs[k][j]`` where ``numbers`` are
    real constants assumed linearly independent over Q (``numbers[0] == 1``)
    and ``coeffs[k][j]`` is a rational coordinate vector.  Sympy's canonical
    radicals (``sqrt(2)``, ``sqrt(6)``, ``2**(1/3)`` ...) satisfy the
    independence assumption; nested radicals that sympy does not denest do
    not.
    """

    numbers: tuple[sympy.Expr, ...]
    coeffs: tuple[tuple[tuple[Fraction, ...], ...], ...]

    @classmethod
    def parse(cls, vectors: Sequence[Sequence]) -> "ExactVectors":
        split = []
        monos: list[sympy.Expr] = [sympy.Integer(1)]
        for vec in vectors:
            row = []
            for x in vec:
                if is_exact_scalar(x):
                    terms = {sympy.Integer(1): as_fraction(x)}
                else:
                    terms = _split_terms(sympy.sympify(x, rational=True))
                row.append(terms)
                for m in terms:
                    if m not in monos:
                        monos.append(m)
            split.append(row)
        monos = [monos[0]] + sorted(monos[1:], key=sympy.default_sort_key)
        coeffs = tuple(
            tuple(tuple(t.get(m, Fraction(0)) for t in row) for m in monos) for row in split
        )
        return cls(tuple(monos), coeffs)

    @property
    def is_rational(self) -> bool:
        return len(self.numbers) == 1

    @property
    def count(self) -> int:
        return len(self.coeffs)

    @property
    def rank(self) -> int:
        return len(self.coeffs[0][0])

    def transform(self, matrix: Sequence[Sequence[int]]) -> "ExactVectors":
        return ExactVectors(
            self.numbers,
            tuple(tuple(tuple(mat_vec(matrix, part)) for part in vec) for vec in self.coeffs),
        )

    def constraint_rows(self, gram: Sequence[Sequence[int]]) -> list[list[Fraction]]:
        """Rational rows ``r`` such that ``q(v, w) = 0`` for every stored ``w``
        iff ``r . v = 0`` for all rows (uses Q-independence of ``numbers``)."""
        rows = []
        for vec in self.coeffs:
            for part in vec:
                if any(part):
                    rows.append(mat_vec(gram, part))
        return rows

    def digits(self) -> int:
        """Decimal size of the largest stored coefficient."""
        return max(
            (max(len(str(abs(c.numerator))), len(str(c.denominator)))
             for vec in self.coeffs for part in vec for c in part),
            default=1,
        )

    def evaluate(self, dps: int | None = None) -> list[list[float]]:
        """Floating point coordinates, computed at enough precision that
        cancellation between large coefficients does not leak into the result."""
        if dps is None:
            dps = 30 + 2 * self.digits()
        with mpmath.workdps(dps):
            return [[float(x) for x in coords] for coords in self.evaluate_mp(dps)]

    def evaluate_mp(self, dps: int) -> list[list]:
        """Coordinates as mpmath numbers at ``dps`` digits (caller sets context)."""
        with mpmath.workdps(dps):
            nums = [mpmath.mpf(sympy.N(n, dps + 10)) for n in self.numbers]
            out = []
            for vec in self.coeffs:
                coords = []
                for i in range(self.rank):
                    s = mpmath.mpf(0)
                    for nj, part in zip(nums, vec):
                        c = part[i]
                        if c:
                            s += nj * mpmath.mpf(c.numerator) / c.denominator
                    coords.append(s)
                out.append(coords)
        return out

    def as_strings(self) -> list[list[str]]:
        out = []
        for vec in self.coeffs:
            coords = []
            for i in range(self.rank):
                e = sum(
                    (sympy.Rational(part[i].numerator, part[i].denominator) * n
                     for n, part in zip(self.numbers, vec)),
                    sympy.Integer(0),
                )
                coords.append(str(e))
            out.append(coords)
        return out
