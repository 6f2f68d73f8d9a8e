"""Recovering the quadratic form and constant from a Fujiki-type polynomial.

Given an evaluator ``F`` of a homogeneous degree-``2n`` polynomial known to
equal ``c * q(v, v)**n``, :func:`recover_bbf` finds the primitive integral
Gram matrix of ``q`` (sign fixed by requiring three positive directions)
and the positive rational ``c``.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from math import comb
from typing import Callable, Sequence

from . import exact
from .lattice import LatticeError, QuadraticLattice, fujiki_form

Evaluator = Callable[[Sequence[int]], object]


class NotFujikiForm(LatticeError):
    """The evaluator is not of the form ``c * q**n`` with the required signature."""


def _binary_coefficients(values: Sequence[Fraction], degree: int) -> list[Fraction]:
    """Coefficients ``a_0..a_d`` of ``p(s) = sum a_k s^k`` from ``p(0..d)``.

    Newton forward differences, exact.
    """
    diffs = [list(values)]
    for _ in range(degree):
        prev = diffs[-1]
        diffs.append([b - a for a, b in zip(prev, prev[1:])])
    # p(s) = sum_k Δ^k p(0) * binom(s, k); expand the falling factorials
    coeffs = [Fraction(0)] * (degree + 1)
    falling = [Fraction(1)]  # coefficients of s(s-1)...(s-k+1)/k!
    fact = 1
    for k in range(degree + 1):
        if k:
            fact *= k
            nxt = [Fraction(0)] * (len(falling) + 1)
            for i, c in enumerate(falling):
                nxt[i + 1] += c
                nxt[i] -= c * (k - 1)
            falling = nxt
        d0 = diffs[k][0]
        if d0:
            for i, c in enumerate(falling):
                coeffs[i] += d0 * c / fact
    return coeffs


def _poly_pow(p: Sequence[Fraction], n: int) -> list[Fraction]:
    out = [Fraction(1)]
    for _ in range(n):
        nxt = [Fraction(0)] * (len(out) + len(p) - 1)
        for i, a in enumerate(out):
            for j, b in enumerate(p):
                nxt[i + j] += a * b
        out = nxt
    return out


def _monic_quadratic_root(coeffs: Sequence[Fraction], n: int) -> tuple[Fraction, Fraction] | None:
    """If ``coeffs`` (ascending, degree 2n) is ``lead * (s^2 + p s + r)^n``
    return ``(p, r)``; otherwise ``None``."""
    lead = coeffs[2 * n]
    if lead == 0:
        return None
    h = [c / lead for c in coeffs]
    # top coefficients of (s^2 + p s + r)^n:  s^{2n-1}: n p ;  s^{2n-2}: n r + C(n,2) p^2
    p = h[2 * n - 1] / n
    r = (h[2 * n - 2] - comb(n, 2) * p * p) / n
    if _poly_pow([r, p, Fraction(1)], n) != h:
        return None
    return p, r


def _restriction(F: Evaluator, w: Sequence[int], v: Sequence[int], n: int) -> list[Fraction]:
    """Coefficients in ``s`` of ``F(s w + v)``."""
    vals = [exact.as_fraction(F([s * wi + vi for wi, vi in zip(w, v)])) for s in range(2 * n + 1)]
    return _binary_coefficients(vals, 2 * n)


def _anchor(F: Evaluator, rank: int) -> list[int]:
    """A small integer vector where ``F`` does not vanish."""
    for height in range(1, 4):
        for v in itertools.product(range(-height, height + 1), repeat=rank):
            if max(map(abs, v)) == height and exact.as_fraction(F(list(v))) != 0:
                return list(v)
    raise NotFujikiForm("F vanishes on all small integer vectors")


def _unisolvent_points(rank: int, degree: int):
    """Non-negative integer points of total degree <= ``degree``; a polynomial
    of degree <= ``degree`` vanishing on all of them is zero."""
    for alpha in itertools.product(range(degree + 1), repeat=rank):
        if sum(alpha) <= degree:
            yield list(alpha)


def canonical_sign(gram) -> int:
    """Sign of the first non-zero entry in row-major order."""
    for row in gram:
        for x in row:
            if x:
                return 1 if x > 0 else -1
    return 0


def recover_bbf(F: Evaluator, rank: int, n: int) -> tuple[tuple[tuple[int, ...], ...], Fraction]:
    """Recover ``(gram, c)`` from an evaluator of ``v -> c q(v, v)^n``.

    ``F`` must return ints or Fractions.  The result is verified exactly on
    a unisolvent point set, so any mismatch raises :class:`NotFujikiForm`.
    """
    if rank < 1 or n < 1:
        raise ValueError("rank and n must be positive")
    w = _anchor(F, rank)
    basis = exact.identity(rank)

    def ratios(v):
        root = _monic_quadratic_root(_restriction(F, w, v, n), n)
        if root is None:
            raise NotFujikiForm("restriction to a 2-dimensional subspace is not a power of a quadratic")
        return root

    # with q(w, w) normalised to 1:  F(s w + v) ∝ (s^2 + 2 q(w,v) s + q(v,v))^n
    qvv = [ratios(e)[1] for e in basis]
    gram = [[Fraction(0)] * rank for _ in range(rank)]
    for i in range(rank):
        gram[i][i] = qvv[i]
        for j in range(i + 1, rank):
            q_sum = ratios([a + b for a, b in zip(basis[i], basis[j])])[1]
            gram[i][j] = gram[j][i] = (q_sum - qvv[i] - qvv[j]) / 2

    flat = [x for row in gram for x in row]
    den = 1
    for x in flat:
        den = den * x.denominator // math.gcd(den, x.denominator)
    ints = [int(x * den) for x in flat]
    g = exact.content(ints)
    if g == 0:
        raise NotFujikiForm("recovered form is zero")
    int_gram = [[int(gram[i][j] * den) // g for j in range(rank)] for i in range(rank)]
    # the normalised form has q(w,w) = 1, so int_gram gives q(w,w) = den / g
    mu = Fraction(den, g)
    pos, neg, zero = exact.inertia(int_gram)
    if zero:
        raise NotFujikiForm("recovered form is degenerate")
    if pos == 3 and neg == 3:
        # both signs have signature (3, 3): odd n is settled by c > 0,
        # even n cannot be, so fall back to canonical_sign
        fw = exact.as_fraction(F(w))
        flip = (fw / mu**n < 0) if n % 2 else canonical_sign(int_gram) < 0
    elif neg == 3:
        flip = True
    elif pos == 3:
        flip = False
    else:
        raise NotFujikiForm(f"neither sign of the recovered form has three positive directions ({pos}, {neg})")
    if flip:
        int_gram = [[-x for x in row] for row in int_gram]
        mu = -mu
    c = exact.as_fraction(F(w)) / mu ** n
    if c <= 0:
        raise NotFujikiForm("recovered Fujiki constant is not positive")

    gram_t = tuple(tuple(row) for row in int_gram)
    lattice = QuadraticLattice(gram_t, c, n)
    for point in _unisolvent_points(rank, 2 * n):
        if exact.as_fraction(F(point)) != fujiki_form(lattice, point):
            raise NotFujikiForm(f"F differs from c q^n at {point}")
    return gram_t, c


def polynomial_evaluator(expression: str, rank: int) -> Evaluator:
    """Exact evaluator for a polynomial in ``v1 .. v{rank}`` given as text."""
    import sympy

    symbols = sympy.symbols(f"v1:{rank + 1}")
    expr = sympy.sympify(expression, locals={str(s): s for s in symbols}, rational=True)
    extra = expr.free_symbols - set(symbols)
    if extra:
        raise ValueError(f"unknown variables {sorted(map(str, extra))}")
    poly = sympy.Poly(expr, *symbols)
    terms = [(tuple(m), Fraction(int(c.p), int(c.q))) for m, c in poly.terms()]

    def F(v):
        total = Fraction(0)
        for mono, coeff in terms:
            t = coeff
            for x, e in zip(v, mono):
                if e:
                    t *= x ** e
            total += t
        return total

    return F
