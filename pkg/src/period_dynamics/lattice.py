"""Integral quadratic lattices: form evaluation, inertia, reflections and
Néron–Severi detection for real 2-planes."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from . import exact
from .exact import ExactVectors, as_fraction

EPS = 1e-9
DEFAULT_HEIGHT = 10
# refuse enumerations larger than this many candidate vectors
MAX_ENUMERATION = 20_000_000


class LatticeError(ValueError):
    """Raised when lattice data violates one of its invariants."""


@dataclass(frozen=True)
class QuadraticLattice:
    """An integral symmetric bilinear form on Z^rank.

    The constructor only checks what every operation needs (square,
    symmetric, integral, non-degenerate, ``fujiki_constant > 0``).  The
    hyperkähler signature condition is enforced by :meth:`check_hyperkahler`,
    which file loading and the period-domain code call.
    """

    gram: tuple[tuple[int, ...], ...]
    fujiki_constant: Fraction = Fraction(1)
    half_dim: int = 1

    def __post_init__(self):
        try:
            gram = tuple(tuple(_to_int(x) for x in row) for row in self.gram)
        except TypeError as err:
            raise LatticeError(f"gram entries must be integers: {err}") from None
        n = len(gram)
        if n == 0:
            raise LatticeError("rank must be positive")
        if any(len(row) != n for row in gram):
            raise LatticeError("gram must be a square matrix")
        for i in range(n):
            for j in range(i):
                if gram[i][j] != gram[j][i]:
                    raise LatticeError(f"gram must be symmetric (entry ({i},{j}) != ({j},{i}))")
        c = as_fraction(self.fujiki_constant)
        if c <= 0:
            raise LatticeError("fujiki_constant must be positive")
        if int(self.half_dim) < 1:
            raise LatticeError("half_dim must be a positive integer")
        object.__setattr__(self, "gram", gram)
        object.__setattr__(self, "fujiki_constant", c)
        object.__setattr__(self, "half_dim", int(self.half_dim))
        if exact.determinant(gram) == 0:
            raise LatticeError("gram must be non-degenerate (determinant is zero)")

    @classmethod
    def diagonal(cls, *entries: int, **kw) -> "QuadraticLattice":
        n = len(entries)
        return cls(tuple(tuple(entries[i] if i == j else 0 for j in range(n)) for i in range(n)), **kw)

    @property
    def rank(self) -> int:
        return len(self.gram)

    @cached_property
    def determinant(self) -> int:
        return exact.determinant(self.gram)

    @cached_property
    def signature(self) -> tuple[int, int, int]:
        return exact.inertia(self.gram)

    @cached_property
    def gram_array(self) -> np.ndarray:
        """Float copy of the Gram matrix for numerical work."""
        return np.array(self.gram, dtype=float)

    def check_hyperkahler(self) -> "QuadraticLattice":
        if self.rank < 4:
            raise LatticeError(f"rank must be >= 4 (got {self.rank})")
        pos, neg, _ = self.signature
        if (pos, neg) != (3, self.rank - 3):
            raise LatticeError(
                f"signature must be (3, {self.rank - 3}) with three positive directions (got ({pos}, {neg}))"
            )
        return self

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        c = self.fujiki_constant
        return {
            "rank": self.rank,
            "gram": [list(row) for row in self.gram],
            "fujiki_constant": f"{c.numerator}/{c.denominator}",
            "half_dim": self.half_dim,
        }

    @classmethod
    def from_dict(cls, data: dict, check: bool = True) -> "QuadraticLattice":
        if not isinstance(data, dict):
            raise LatticeError("lattice file must hold a JSON object")
        for key in ("rank", "gram", "fujiki_constant", "half_dim"):
            if key not in data:
                raise LatticeError(f"missing field {key!r}")
        gram = data["gram"]
        if not isinstance(gram, list) or not all(isinstance(r, list) for r in gram):
            raise LatticeError("gram must be a list of integer rows")
        if any(isinstance(x, float) or not isinstance(x, int) for r in gram for x in r):
            raise LatticeError("gram entries must be integers")
        if data["rank"] != len(gram):
            raise LatticeError(f"rank {data['rank']} does not match gram size {len(gram)}")
        try:
            c = as_fraction(str(data["fujiki_constant"]))
        except (ValueError, ZeroDivisionError):
            raise LatticeError("fujiki_constant must be a rational 'p/q'") from None
        if not isinstance(data["half_dim"], int):
            raise LatticeError("half_dim must be a positive integer")
        lat = cls(tuple(tuple(r) for r in gram), c, data["half_dim"])
        return lat.check_hyperkahler() if check else lat

    @classmethod
    def load(cls, path: str | Path, check: bool = True) -> "QuadraticLattice":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as err:
            raise LatticeError(f"malformed JSON: {err}") from None
        return cls.from_dict(data, check=check)


def _to_int(x) -> int:
    f = as_fraction(x)
    if f.denominator != 1:
        raise TypeError(f"{x!r} is not an integer")
    return int(f)


# ---------------------------------------------------------------------------
# form evaluation


def _check_dim(lattice: QuadraticLattice, *vectors) -> None:
    for v in vectors:
        if len(v) != lattice.rank:
            raise LatticeError(f"vector length {len(v)} does not match lattice rank {lattice.rank}")


def _all_exact(v) -> bool:
    return not isinstance(v, np.ndarray) and all(exact.is_exact_scalar(x) for x in v)


def evaluate(lattice: QuadraticLattice, u: Sequence, v: Sequence):
    """Return ``q(u, v) = u^T gram v``; exact for integer/rational inputs."""
    _check_dim(lattice, u, v)
    if all(type(x) is int for x in u) and all(type(x) is int for x in v):
        return sum(ui * gij * vj for ui, row in zip(u, lattice.gram) if ui for gij, vj in zip(row, v) if gij)
    if _all_exact(u) and _all_exact(v):
        u = [as_fraction(x) for x in u]
        v = [as_fraction(x) for x in v]
        val = sum(ui * gij * vj for ui, row in zip(u, lattice.gram) for gij, vj in zip(row, v) if gij)
        return int(val) if val.denominator == 1 else val
    return float(np.asarray(u, dtype=float) @ lattice.gram_array @ np.asarray(v, dtype=float))


def signature(lattice_or_gram) -> tuple[int, int, int]:
    """(positive, negative, zero) inertia indices, by exact congruence."""
    if isinstance(lattice_or_gram, QuadraticLattice):
        return lattice_or_gram.signature
    return exact.inertia(lattice_or_gram)


def fujiki_form(lattice: QuadraticLattice, v: Sequence) -> Fraction:
    """``c * q(v, v) ** n`` evaluated exactly."""
    _check_dim(lattice, v)
    return lattice.fujiki_constant * Fraction(evaluate(lattice, v, v)) ** lattice.half_dim


# ---------------------------------------------------------------------------
# isometries


@dataclass(frozen=True)
class IsometryElement:
    """Integer matrix preserving the form; ``word`` lists generator indices."""

    matrix: tuple[tuple[int, ...], ...]
    word: tuple[int, ...] | None = None
    delta: tuple[int, ...] | None = field(default=None, compare=False)

    @classmethod
    def identity(cls, rank: int) -> "IsometryElement":
        return cls(tuple(map(tuple, exact.identity(rank))), ())

    @property
    def rank(self) -> int:
        return len(self.matrix)

    def __matmul__(self, other: "IsometryElement") -> "IsometryElement":
        word = None
        if self.word is not None and other.word is not None:
            word = self.word + other.word
        return IsometryElement(tuple(map(tuple, exact.mat_mul(self.matrix, other.matrix))), word)

    def apply(self, v: Sequence[int]) -> list[int]:
        return exact.mat_vec(self.matrix, v)

    def inverse(self, lattice: QuadraticLattice) -> "IsometryElement":
        # g^T gram g = gram  =>  g^{-1} = gram^{-1} g^T gram
        gt_g = exact.mat_mul(exact.transpose(self.matrix), lattice.gram)
        inv = _solve_exact(lattice.gram, gt_g)
        word = tuple(reversed(self.word)) if self.word is not None else None
        return IsometryElement(tuple(tuple(int(x) for x in row) for row in inv), word)

    @property
    def max_entry(self) -> int:
        return max(abs(x) for row in self.matrix for x in row)


def _solve_exact(a, b):
    """Solve ``a X = b`` over the rationals (``a`` invertible)."""
    n = len(a)
    m = [[Fraction(x) for x in ra] + [Fraction(x) for x in rb] for ra, rb in zip(a, b)]
    for c in range(n):
        p = next(i for i in range(c, n) if m[i][c] != 0)
        m[c], m[p] = m[p], m[c]
        piv = m[c][c]
        m[c] = [x / piv for x in m[c]]
        for i in range(n):
            if i != c and m[i][c] != 0:
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[c])]
    return [row[n:] for row in m]


def reflection(lattice: QuadraticLattice, delta: Sequence[int]) -> IsometryElement:
    """Reflection ``v -> v - 2 q(v, δ) / q(δ, δ) δ`` as an integer matrix."""
    _check_dim(lattice, delta)
    delta = [int(x) for x in delta]
    qdd = evaluate(lattice, delta, delta)
    if qdd == 0:
        raise LatticeError("cannot reflect in an isotropic vector (q(δ,δ) = 0)")
    g_delta = exact.mat_vec(lattice.gram, delta)
    if any((2 * x) % qdd for x in g_delta):
        raise LatticeError(f"reflection in {delta} is not integral: q(δ,δ)={qdd} does not divide 2 q(v,δ)")
    n = lattice.rank
    matrix = tuple(
        tuple(int(i == j) - (2 * g_delta[j] // qdd) * delta[i] for j in range(n)) for i in range(n)
    )
    return IsometryElement(matrix, None, tuple(delta))


def is_reflective(lattice: QuadraticLattice, delta: Sequence[int]) -> bool:
    qdd = evaluate(lattice, delta, delta)
    if qdd == 0:
        return False
    return all((2 * x) % qdd == 0 for x in exact.mat_vec(lattice.gram, delta))


def is_isometry(lattice: QuadraticLattice, g) -> bool:
    """True iff ``g^T gram g == gram`` in exact integer arithmetic."""
    matrix = g.matrix if isinstance(g, IsometryElement) else g
    matrix = [[int(x) for x in row] for row in matrix]
    if len(matrix) != lattice.rank or any(len(row) != lattice.rank for row in matrix):
        raise LatticeError(f"matrix shape does not match lattice rank {lattice.rank}")
    gg = exact.mat_mul(lattice.gram, matrix)
    return exact.mat_mul(exact.transpose(matrix), gg) == [list(r) for r in lattice.gram]


# ---------------------------------------------------------------------------
# Néron–Severi detection


@dataclass(frozen=True)
class SublatticeBasis:
    """Z-basis of a saturated sublattice; ``height`` is ``None`` for exact results."""

    vectors: tuple[tuple[int, ...], ...]
    exact: bool = True
    height: int | None = None

    @property
    def rank_value(self) -> int:
        return len(self.vectors)

    def to_dict(self) -> dict:
        return {
            "rank": self.rank_value,
            "vectors": [list(v) for v in self.vectors],
            "exact": self.exact,
            "height": self.height,
        }


def orthogonal_vectors(
    lattice: QuadraticLattice,
    vectors: np.ndarray,
    height_bound: int,
    epsilon: float = EPS,
) -> list[tuple[int, ...]]:
    """All non-zero ``v`` with ``|v_i| <= height_bound`` and ``q(v, w)`` within
    tolerance of zero for each row ``w`` of ``vectors``.

    ``k = len(vectors)`` coordinates are solved for from the others, so the
    search visits ``(2H+1)^(rank-k)`` candidates instead of ``(2H+1)^rank``.
    The tolerance is relative: ``|q(v,w)| <= ε (1 + |v| |gram w|)``.
    """
    if height_bound < 1:
        raise LatticeError("height_bound must be >= 1")
    forms = np.atleast_2d(np.asarray(vectors, dtype=float)) @ lattice.gram_array
    k, n = forms.shape
    if k >= n:
        raise LatticeError("too many constraints for the lattice rank")
    norms = np.linalg.norm(forms, axis=1)
    pivots = max(
        itertools.combinations(range(n), k),
        key=lambda cols: abs(np.linalg.det(forms[:, cols] / norms[:, None])),
    )
    free = [i for i in range(n) if i not in pivots]
    span = 2 * height_bound + 1
    total = span ** len(free)
    if total > MAX_ENUMERATION:
        raise LatticeError(
            f"enumeration of {total} candidates exceeds the limit; lower height_bound"
        )
    sub = forms[:, pivots]
    rest = forms[:, free]
    found: list[tuple[int, ...]] = []
    chunk = 1 << 18
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk))
        free_vals = np.empty((idx.size, len(free)), dtype=np.int64)
        rem = idx.copy()
        for j in range(len(free) - 1, -1, -1):
            free_vals[:, j] = rem % span - height_bound
            rem //= span
        rhs = -(free_vals @ rest.T)
        piv_vals = np.rint(np.linalg.solve(sub, rhs.T).T)
        ok = np.all(np.abs(piv_vals) <= height_bound, axis=1)
        if not ok.any():
            continue
        cand = np.zeros((int(ok.sum()), n), dtype=np.int64)
        cand[:, free] = free_vals[ok]
        cand[:, pivots] = piv_vals[ok].astype(np.int64)
        resid = np.abs(cand @ forms.T)
        scale = epsilon * (1.0 + np.linalg.norm(cand, axis=1)[:, None] * norms[None, :])
        good = np.all(resid <= scale, axis=1) & np.any(cand != 0, axis=1)
        found.extend(tuple(int(x) for x in row) for row in cand[good])
    return found


def _positive_pair(lattice: QuadraticLattice, a, b) -> None:
    g = np.array([[evaluate(lattice, a, a), evaluate(lattice, a, b)],
                  [evaluate(lattice, b, a), evaluate(lattice, b, b)]], dtype=float)
    if not (g[0, 0] > 0 and np.linalg.det(g) > EPS * max(1.0, g[0, 0] * g[1, 1])):
        raise LatticeError("(a, b) does not span a positive 2-plane")


def exact_orthogonal_sublattice(lattice: QuadraticLattice, vecs: ExactVectors) -> SublatticeBasis:
    """``{v in Z^n : q(v, w) = 0 for every w in vecs}`` computed exactly."""
    rows = vecs.constraint_rows(lattice.gram)
    basis = exact.integer_kernel(rows, lattice.rank) if rows else exact.identity(lattice.rank)
    return SublatticeBasis(tuple(tuple(v) for v in basis), True, None)


def ns_sublattice(
    lattice: QuadraticLattice,
    a,
    b,
    height_bound: int = DEFAULT_HEIGHT,
    epsilon: float = EPS,
) -> SublatticeBasis:
    """Lattice vectors q-orthogonal to the plane spanned by ``a`` and ``b``.

    ``a`` and ``b`` may be given exactly (ints, Fractions, or strings such as
    ``"sqrt(2)"``), in which case the kernel is exact and ``height_bound``
    is ignored.  Float input falls back to bounded enumeration and the
    result only claims what was detected at ``height_bound``.
    """
    if height_bound < 1:
        raise LatticeError("height_bound must be >= 1")
    _check_dim(lattice, a, b)
    if _is_symbolic(a) and _is_symbolic(b):
        vecs = ExactVectors.parse([a, b])
    else:
        vecs = None
    if vecs is not None:
        num = vecs.evaluate()
        _positive_pair(lattice, num[0], num[1])
        return exact_orthogonal_sublattice(lattice, vecs)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise LatticeError("coordinates must be finite")
    _positive_pair(lattice, a, b)
    return detected_sublattice(lattice, np.vstack([a, b]), height_bound, epsilon)


def detected_sublattice(lattice, vectors, height_bound, epsilon=EPS) -> SublatticeBasis:
    found = orthogonal_vectors(lattice, vectors, height_bound, epsilon)
    basis = exact.saturation(found, lattice.rank)
    return SublatticeBasis(tuple(tuple(v) for v in basis), False, height_bound)


def _is_symbolic(v) -> bool:
    if isinstance(v, np.ndarray):
        return v.dtype == object and all(not isinstance(x, float) for x in v)
    return all(not isinstance(x, float) for x in v)
