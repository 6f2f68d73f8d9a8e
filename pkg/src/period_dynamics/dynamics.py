"""Ergodic / closed-orbit classification of period planes and random-walk
orbit diagnostics.

A period plane has a closed orbit under the arithmetic group exactly when
it is rational, i.e. when the lattice vectors orthogonal to it have the
maximal rank ``rank - 2``; otherwise its orbit is dense.  The classifier
decides this by computing that orthogonal sublattice.

The walk moves a plane by uniformly chosen generators.  The space of
positive planes is not compact and an unrestricted walk drifts off to the
isotropic boundary, so steps that would leave a compact chart are
rejected (the walker stays put).  The chart is the set of planes whose
q-orthonormal basis has Euclidean operator norm at most ``chart_radius``.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
import sympy

from .exact import ExactVectors
from .lattice import (
    DEFAULT_HEIGHT,
    EPS,
    LatticeError,
    QuadraticLattice,
    SublatticeBasis,
    detected_sublattice,
    exact_orthogonal_sublattice,
)
from .monodromy import GeneratorSet
from .period import PlaneError, TwoPlane, distances_to_frames, euclidean_frame, q_orthonormalize

DEFAULT_CHECKPOINT = 1000
DEFAULT_CHART_RADIUS = 1.25


class InconsistentClassification(RuntimeError):
    """A rational plane was reported with non-maximal Néron–Severi rank."""


@dataclass(frozen=True)
class ErgodicityVerdict:
    kind: str  # "ergodic" or "closed_orbit"
    ns_basis: SublatticeBasis
    detection_height: int | None
    certainty: str  # "exact" or "numerical"

    @property
    def ns_rank(self) -> int:
        return self.ns_basis.rank_value

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "ns_rank": self.ns_rank,
            "ns_basis": [list(v) for v in self.ns_basis.vectors],
            "detection_height": self.detection_height,
            "certainty": self.certainty,
        }


def classify_point(
    lattice: QuadraticLattice,
    plane: TwoPlane,
    height_bound: int = DEFAULT_HEIGHT,
    epsilon: float = EPS,
) -> ErgodicityVerdict:
    """Closed orbit iff the Néron–Severi rank is ``rank - 2``, else ergodic."""
    if height_bound < 1:
        raise LatticeError("height_bound must be >= 1")
    if plane.exact is not None:
        ns = exact_orthogonal_sublattice(lattice, plane.exact)
        certainty, height = "exact", None
    else:
        ns = detected_sublattice(lattice, plane.basis, height_bound, epsilon)
        certainty, height = "numerical", height_bound
    maximal = lattice.rank - 2
    if plane.exact is not None and plane.exact.is_rational and ns.rank_value != maximal:
        raise InconsistentClassification(
            f"rational plane has Néron–Severi rank {ns.rank_value}, expected {maximal}"
        )
    kind = "closed_orbit" if ns.rank_value == maximal else "ergodic"
    return ErgodicityVerdict(kind, ns, height, certainty)


# ---------------------------------------------------------------------------
# walks


@dataclass
class Trajectory:
    """Planes at checkpoint steps, in step order."""

    steps: list[int] = field(default_factory=list)
    planes: list[TwoPlane] = field(default_factory=list)
    accepted: int = 0

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(zip(self.steps, self.planes))

    def append(self, step: int, plane: TwoPlane) -> None:
        self.steps.append(step)
        self.planes.append(plane)

    def to_csv(self) -> str:
        from .serialize import fmt

        if not self.planes:
            return "step\n"
        rank = self.planes[0].rank
        header = ["step"] + [f"x{i}" for i in range(rank)] + [f"y{i}" for i in range(rank)]
        lines = [",".join(header)]
        for s, p in zip(self.steps, self.planes):
            lines.append(",".join([str(s)] + [fmt(x) for x in p.basis.reshape(-1)]))
        return "\n".join(lines) + "\n"


def chart_norm2(basis: np.ndarray) -> float:
    """Squared Euclidean operator norm of a (2, r) basis."""
    x, y = basis
    a, b, c = x @ x, x @ y, y @ y
    return float(0.5 * (a + c) + np.sqrt(0.25 * (a - c) ** 2 + b * b))


def in_chart(plane: TwoPlane, chart_radius: float) -> bool:
    return chart_norm2(plane.basis) <= chart_radius**2


def _gauss_reduce(lattice: QuadraticLattice, a: list[int], b: list[int]) -> tuple[list[int], list[int]]:
    """Lagrange reduction of a positive definite rank-2 lattice basis under
    ``q``, keeping the orientation of ``(a, b)``."""
    g = lattice.gram

    def form(u, v):
        return sum(ui * gij * vj for ui, row in zip(u, g) for gij, vj in zip(row, v) if gij and ui)

    while True:
        qa, qb = form(a, a), form(b, b)
        if qb < qa:
            a, b = b, [-x for x in a]  # (a, b) -> (b, -a) keeps orientation
            qa, qb = qb, qa
        ab = form(a, b)
        mu = (2 * ab + qa) // (2 * qa)  # nearest integer to ab / qa
        if mu == 0:
            return a, b
        b = [x - mu * y for x, y in zip(b, a)]


def _rational_state(plane: TwoPlane) -> tuple[list[int], list[int]] | None:
    ex = plane.exact
    if ex is None or not ex.is_rational:
        return None
    from .exact import clear_denominators

    return clear_denominators(ex.coeffs[0][0]), clear_denominators(ex.coeffs[1][0])


def _rational_plane(lattice: QuadraticLattice, a: list[int], b: list[int]) -> TwoPlane:
    ex = ExactVectors((sympy.Integer(1),),
                      ((tuple(Fraction(x) for x in a),), (tuple(Fraction(x) for x in b),)))
    return TwoPlane(q_orthonormalize(lattice, np.array([a, b], dtype=float)), ex)


@np.errstate(over="ignore", invalid="ignore", divide="ignore")  # checked explicitly per step
def run_walk(
    lattice: QuadraticLattice,
    generators: GeneratorSet,
    start: TwoPlane,
    steps: int,
    seed: int,
    checkpoint_every: int = DEFAULT_CHECKPOINT,
    chart_radius: float | None = DEFAULT_CHART_RADIUS,
    epsilon: float = EPS,
) -> Trajectory:
    """Random walk by i.i.d. uniform generators, emitting checkpoints.

    Planes with an exact rational span are walked in integer arithmetic so
    that closed orbits are followed without rounding drift.  Steps leaving
    the chart are rejected; ``chart_radius=None`` disables the restriction.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if checkpoint_every < 1:
        raise ValueError("checkpoint_every must be >= 1")
    start.check(lattice, epsilon)
    rng = np.random.default_rng(seed)
    mats = generators.float_matrices
    gram = lattice.gram_array
    limit = np.inf if chart_radius is None else chart_radius**2
    traj = Trajectory()
    traj.append(0, start)

    rational = _rational_state(start)
    int_mats = [np.array(e.matrix, dtype=object) for e in generators.elements]
    if rational is not None:
        a, b = _gauss_reduce(lattice, *rational)
        rational = (a, b)

    basis = start.basis.copy()
    current_norm = chart_norm2(basis)
    accepted = 0
    done = 0
    chunk = 1 << 16
    while done < steps:
        n = min(chunk, steps - done)
        choices = rng.integers(0, len(mats), size=n)
        for k in range(n):
            i = choices[k]
            if rational is not None:
                m = int_mats[i]
                ca = [int(v) for v in m.dot(rational[0])]
                cb = [int(v) for v in m.dot(rational[1])]
                ca, cb = _gauss_reduce(lattice, ca, cb)
                cand = np.array([ca, cb], dtype=float)
            else:
                cand = basis @ mats[i].T
            x = cand[0]
            xx = x @ gram @ x
            y = cand[1] - (cand[1] @ gram @ x) * x / xx
            yy = y @ gram @ y
            if not (xx > 0 and yy > 0 and np.isfinite(xx * yy)):
                # float cancellation near the isotropic boundary
                raise PlaneError(f"walk lost float precision at step {done + k + 1}; use a chart radius")
            cand = np.array([x / np.sqrt(xx), y / np.sqrt(yy)])
            norm = chart_norm2(cand)
            if norm <= limit or norm <= current_norm:
                basis, current_norm = cand, norm
                accepted += 1
                if rational is not None:
                    rational = (ca, cb)
            step = done + k + 1
            if step % checkpoint_every == 0 or step == steps:
                if rational is not None:
                    plane = _rational_plane(lattice, *rational)
                else:
                    plane = TwoPlane(q_orthonormalize(lattice, basis, epsilon))
                traj.append(step, plane)
        done += n
    traj.accepted = accepted
    return traj


def _walker(args):
    lattice, generators, start, steps, seed, checkpoint_every, chart_radius = args
    return run_walk(lattice, generators, start, steps, seed, checkpoint_every, chart_radius)


def run_walkers(
    lattice: QuadraticLattice,
    generators: GeneratorSet,
    start: TwoPlane,
    steps: int,
    seed: int,
    walkers: int = 1,
    checkpoint_every: int = DEFAULT_CHECKPOINT,
    chart_radius: float | None = DEFAULT_CHART_RADIUS,
    max_workers: int | None = None,
) -> list[Trajectory]:
    """Independent walkers with seeds ``seed ^ index``; results in index order."""
    jobs = [(lattice, generators, start, steps, seed ^ i, checkpoint_every, chart_radius)
            for i in range(walkers)]
    if max_workers is None:
        max_workers = int(os.environ.get("PERIOD_DYNAMICS_THREADS", "1") or 1)
    max_workers = max(1, min(max_workers, walkers))
    if max_workers == 1:
        return [_walker(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(_walker, jobs))


def merge_trajectories(trajectories: Sequence[Trajectory]) -> Trajectory:
    merged = Trajectory()
    items = sorted(
        ((s, w, p) for w, t in enumerate(trajectories) for s, p in t),
        key=lambda item: (item[0], item[1]),
    )
    for s, _, p in items:
        merged.append(s, p)
    merged.accepted = sum(t.accepted for t in trajectories)
    return merged


# ---------------------------------------------------------------------------
# coverage


@dataclass(frozen=True)
class CoverageReport:
    steps: int
    epsilon: float
    reference_count: int
    covered_fraction: float
    history: tuple[tuple[int, float], ...]

    def fraction_at(self, step: int) -> float:
        """Covered fraction using checkpoints up to ``step``."""
        out = 0.0
        for s, f in self.history:
            if s <= step:
                out = f
        return out

    def to_dict(self) -> dict:
        from .serialize import fmt

        return {
            "steps": self.steps,
            "epsilon": fmt(self.epsilon),
            "reference_count": self.reference_count,
            "covered_fraction": fmt(self.covered_fraction),
            "history": [[s, fmt(f)] for s, f in self.history],
        }


def reference_frames(references: Sequence[TwoPlane]) -> np.ndarray:
    return np.array([euclidean_frame(p.basis) for p in references])


def coverage(trajectory, references: Sequence[TwoPlane], epsilon: float) -> CoverageReport:
    """Fraction of reference planes within ``epsilon`` (chart metric) of some
    trajectory plane, with the running fraction at every checkpoint."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if not references:
        raise ValueError("reference set is empty")
    points = list(trajectory)
    if not points:
        raise ValueError("trajectory is empty")
    frames = reference_frames(references)
    covered = np.zeros(len(references), dtype=bool)
    history: list[tuple[int, float]] = []
    for step, plane in points:
        covered |= distances_to_frames(euclidean_frame(plane.basis), frames) <= epsilon
        frac = float(covered.mean())
        if history and history[-1][0] == step:
            history[-1] = (step, frac)
        else:
            history.append((step, frac))
    return CoverageReport(points[-1][0], float(epsilon), len(references), history[-1][1], tuple(history))


def sample_reference_chart(
    lattice: QuadraticLattice,
    count: int,
    coefficient_bound: float,
    seed: int,
    chart_radius: float | None = DEFAULT_CHART_RADIUS,
) -> list[TwoPlane]:
    """Rejection-sample positive planes from pairs of uniform coordinate
    vectors in ``[-B, B]^rank``, keeping those inside the chart."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if coefficient_bound <= 0:
        raise ValueError("coefficient_bound must be positive")
    rng = np.random.default_rng(seed)
    gram = lattice.gram_array
    out: list[TwoPlane] = []
    attempts = 0
    max_attempts = 1000 * count + 1000
    while len(out) < count:
        if attempts >= max_attempts:
            raise PlaneError(
                f"rejection rate above 99.9% ({len(out)} of {attempts} accepted); raise coefficient_bound"
            )
        attempts += 1
        pair = rng.uniform(-coefficient_bound, coefficient_bound, size=(2, lattice.rank))
        g = pair @ gram @ pair.T
        if not (g[0, 0] > 0 and np.linalg.det(g) > 1e-6 * g[0, 0] * max(g[1, 1], 1e-300)):
            continue
        try:
            plane = TwoPlane(q_orthonormalize(lattice, pair))
        except PlaneError:
            continue
        if chart_radius is not None and not in_chart(plane, chart_radius):
            continue
        out.append(plane)
    return out
