"""Reflection generators for an arithmetic subgroup of O(Λ, q), random
words in them, and the action on positive 2-planes."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np

from . import exact
from .lattice import (
    EPS,
    MAX_ENUMERATION,
    IsometryElement,
    LatticeError,
    QuadraticLattice,
    is_reflective,
    reflection,
)
from .period import PlaneError, TwoPlane, q_orthonormalize

# above this entry size the float action loses too many digits
FLOAT_ACTION_LIMIT = 1 << 12


class EmptyGeneratorSet(LatticeError):
    """No admissible reflection vector exists at the requested height."""


@dataclass(frozen=True)
class GeneratorSet:
    """Inverse-closed generating set (reflections are involutions)."""

    elements: tuple[IsometryElement, ...]
    height_bound: int

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def float_matrices(self) -> np.ndarray:
        return np.array([e.matrix for e in self.elements], dtype=float)

    def to_dict(self) -> dict:
        return {
            "height_bound": self.height_bound,
            "count": len(self.elements),
            "generators": [
                {"matrix": [list(r) for r in e.matrix], "delta": list(e.delta) if e.delta else None}
                for e in self.elements
            ],
        }

    @classmethod
    def from_dict(cls, lattice: QuadraticLattice, data: dict) -> "GeneratorSet":
        from .lattice import is_isometry

        elements = []
        for item in data["generators"]:
            el = IsometryElement(tuple(tuple(int(x) for x in r) for r in item["matrix"]), None,
                                 tuple(item["delta"]) if item.get("delta") else None)
            if not is_isometry(lattice, el):
                raise LatticeError("generator file contains a non-isometry")
            elements.append(el)
        return cls(tuple(elements), int(data["height_bound"]))


def build_generators(lattice: QuadraticLattice, height_bound: int) -> GeneratorSet:
    """Reflections in all admissible ``δ`` with ``|δ_i| <= height_bound``.

    ``δ`` and ``-δ`` (and non-primitive multiples) give the same reflection,
    so only primitive vectors with positive leading coordinate are kept.
    """
    if height_bound < 1:
        raise LatticeError("height_bound must be >= 1")
    n = lattice.rank
    if (2 * height_bound + 1) ** n > MAX_ENUMERATION:
        raise LatticeError("generator enumeration too large for this rank and height")
    seen = set()
    elements = []
    for delta in itertools.product(range(-height_bound, height_bound + 1), repeat=n):
        lead = next((x for x in delta if x), 0)
        if lead <= 0 or exact.content(delta) != 1:
            continue
        if not is_reflective(lattice, delta):
            continue
        g = reflection(lattice, delta)
        if g.matrix in seen:
            continue
        seen.add(g.matrix)
        elements.append(g)
    if not elements:
        raise EmptyGeneratorSet(f"no integral reflections at height {height_bound}; raise the bound")
    return GeneratorSet(tuple(elements), height_bound)


def random_word(generators: GeneratorSet, length: int, seed: int) -> IsometryElement:
    """Product ``s_{i1} s_{i2} ... s_{iL}`` of i.i.d. uniform generators."""
    if length < 0:
        raise ValueError("length must be >= 0")
    rng = np.random.default_rng(seed)
    word = tuple(int(i) for i in rng.integers(0, len(generators), size=length))
    rank = generators.elements[0].rank
    m = exact.identity(rank)
    for i in word:
        m = exact.mat_mul(m, generators.elements[i].matrix)
    return IsometryElement(tuple(map(tuple, m)), word)


def _mp_orthonormalize(lattice: QuadraticLattice, vectors, dps: int) -> np.ndarray:
    with mpmath.workdps(dps):
        gram = mpmath.matrix(lattice.gram)
        out = []
        for v in vectors:
            w = mpmath.matrix(v)
            for u in out:
                w = w - ((w.T * gram * u)[0]) * u
            n2 = (w.T * gram * w)[0]
            if n2 <= 0:
                raise PlaneError("image plane is degenerate")
            out.append(w / mpmath.sqrt(n2))
        return np.array([[float(x) for x in u] for u in out])


def act(lattice: QuadraticLattice, g: IsometryElement, plane: TwoPlane, epsilon: float = EPS) -> TwoPlane:
    """Image ``g(P)``, re-orthonormalised under ``q``.

    Exact spans are transported exactly.  Large matrices (or bases far out
    in coordinates) are applied to the float basis read as exact dyadic
    rationals and orthonormalised at
    raised precision, so the result is the true image of the input plane.
    """
    if g.rank != plane.rank:
        raise LatticeError("isometry and plane have different rank")
    if plane.exact is not None:
        ex = plane.exact.transform(g.matrix)
        dps = 30 + 2 * ex.digits()
        with mpmath.workdps(dps):
            basis = _mp_orthonormalize(lattice, ex.evaluate_mp(dps), dps)
        return TwoPlane(basis, ex)
    # float image is trusted only while its entries stay small
    if g.max_entry * float(np.abs(plane.basis).max()) <= FLOAT_ACTION_LIMIT:
        m = np.array(g.matrix, dtype=float)
        return TwoPlane(q_orthonormalize(lattice, plane.basis @ m.T, epsilon))
    images = [exact.mat_vec(g.matrix, [Fraction(float(x)) for x in v]) for v in plane.basis]
    digits = max(len(str(abs(x))) for row in g.matrix for x in row)
    dps = 40 + 2 * digits
    with mpmath.workdps(dps):
        mp_vectors = [[mpmath.mpf(x.numerator) / x.denominator for x in v] for v in images]
        return TwoPlane(_mp_orthonormalize(lattice, mp_vectors, dps))
