"""Chains of twistor spheres joining two period planes inside a ball.

Each step picks a positive direction ``omega`` orthogonal to the current
plane, forms the 3-plane ``W = P ⊕ <omega>``, checks that no small lattice
vector is orthogonal to ``W`` (a generic, hence liftable, twistor line),
and moves to the point of the twistor sphere of ``W`` closest to the step
target.

Nearest-point steps toward a fixed plane only converge geometrically, so
``connect`` first plans a short sequence of intermediate planes, each
sharing a line with the next and spanning a positive 3-plane with it, and
aims every step at the next plane of the plan.  Each such target lies on
the sphere, so the nearest point is the target itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigvalsh, null_space
from scipy.optimize import minimize

from .dynamics import classify_point
from .lattice import DEFAULT_HEIGHT, EPS, LatticeError, QuadraticLattice, orthogonal_vectors
from .period import (
    PlaneError,
    ThreePlane,
    TwoPlane,
    contains,
    distances_to_frames,
    euclidean_frame,
    extend_to_three_plane,
    plane_distance,
    positive_cone_component,
    q_orthonormalize,
    same_orientation,
    sphere_frame,
    twistor_normal,
    twistor_point,
)
from .serialize import fmt

GRID = (64, 32)
SPHERE_TOL = 1e-10


class ChainError(RuntimeError):
    """A step could not be constructed."""


def blocking_vectors(
    lattice: QuadraticLattice, W: ThreePlane, height_bound: int, epsilon: float = EPS
) -> list[tuple[int, ...]]:
    """Lattice vectors of height <= ``height_bound`` orthogonal to ``W``."""
    return orthogonal_vectors(lattice, W.basis, height_bound, epsilon)


def is_generic_three_plane(
    lattice: QuadraticLattice, W: ThreePlane, height_bound: int = DEFAULT_HEIGHT, epsilon: float = EPS
) -> bool:
    """True iff no non-zero lattice vector with coordinates bounded by
    ``height_bound`` is q-orthogonal to ``W`` (generic at this height)."""
    return not blocking_vectors(lattice, W, height_bound, epsilon)


@dataclass(frozen=True, eq=False)
class ChainStep:
    three_plane: ThreePlane
    from_plane: TwoPlane
    to_plane: TwoPlane
    genericity_height: int
    distance_before: float
    distance_after: float
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "three_plane": [[fmt(x) for x in row] for row in self.three_plane.basis],
            "from_plane": [[fmt(x) for x in row] for row in self.from_plane.basis],
            "to_plane": [[fmt(x) for x in row] for row in self.to_plane.basis],
            "genericity_height": self.genericity_height,
            "distance_before": fmt(self.distance_before),
            "distance_after": fmt(self.distance_after),
            "degenerate": self.degenerate,
        }


@dataclass(eq=False)
class GhkChain:
    steps: list[ChainStep]
    endpoints: tuple[TwoPlane, TwoPlane]
    ball_center: TwoPlane
    ball_radius: float
    complete: bool = True
    diagnostic: str = ""

    @property
    def final_distance(self) -> float:
        last = self.steps[-1].to_plane if self.steps else self.endpoints[0]
        return plane_distance(last, self.endpoints[1])

    def to_dict(self) -> dict:
        return {
            "complete": self.complete,
            "diagnostic": self.diagnostic,
            "step_count": len(self.steps),
            "final_distance": fmt(self.final_distance),
            "ball_radius": fmt(self.ball_radius),
            "ball_center": [[fmt(x) for x in row] for row in self.ball_center.basis],
            "endpoints": [[[fmt(x) for x in row] for row in p.basis] for p in self.endpoints],
            "steps": [s.to_dict() for s in self.steps],
        }


@dataclass
class _Session:
    """Per-request state: RNG and the reference fixing the cone component."""

    rng: np.random.Generator
    reference: np.ndarray | None = None
    grid: tuple[int, int] = GRID
    log: list[str] = field(default_factory=list)


def _project_perp(lattice: QuadraticLattice, plane: TwoPlane, v: np.ndarray) -> np.ndarray:
    g = lattice.gram_array
    return v - sum((v @ g @ b) * b for b in plane.basis)


def _landing(lattice: QuadraticLattice, cur: TwoPlane, perp: np.ndarray, target: TwoPlane):
    """3-plane ``cur ⊕ <perp>`` and the Euclidean projection of ``target``
    into it, which is the nearest point of its twistor sphere."""
    W = extend_to_three_plane(lattice, cur, perp)
    wq = euclidean_frame(W.basis)
    proj = (wq @ (wq.T @ target.basis.T)).T
    return W, TwoPlane(q_orthonormalize(lattice, proj))


def _cone_frame(gram: np.ndarray, basis: np.ndarray):
    """``(e_pos, e_neg)`` with ``e_pos + e_neg @ b`` positive for ``|b| < 1``,
    spanning the q-orthogonal complement of ``basis``."""
    ns = null_space(basis @ gram)
    lam, vecs = np.linalg.eigh(ns.T @ gram @ ns)
    if lam[-1] <= 0 or (lam[:-1] > 0).any():
        raise PlaneError("complement does not have exactly one positive direction")
    e_pos = ns @ vecs[:, -1] / np.sqrt(lam[-1])
    e_neg = (ns @ vecs[:, :-1]) / np.sqrt(-lam[:-1])
    return e_pos, e_neg


def _cone_samples(lattice: QuadraticLattice, cur: TwoPlane, count: int, rng: np.random.Generator) -> list:
    """Random vectors of the positive cone of ``cur^perp``."""
    frame = _cone_frame(lattice.gram_array, cur.basis)
    out = []
    for _ in range(count):
        b = rng.standard_normal(frame[1].shape[1])
        b *= rng.uniform(0, 0.95) / max(np.linalg.norm(b), 1e-300)
        out.append(frame[0] + frame[1] @ b)
    return out


def _closing_direction(lattice: QuadraticLattice, cur: TwoPlane, target: TwoPlane) -> tuple[np.ndarray, float]:
    """Part orthogonal to ``cur`` of the target vector least aligned with
    ``cur``, and its q-norm.  When the planes share a line and this is
    positive, ``cur ⊕ <it>`` contains the target."""
    a = cur.basis @ lattice.gram_array @ target.basis.T
    _, s, vt = np.linalg.svd(a)
    return _project_perp(lattice, cur, vt[-1] @ target.basis), 1.0 - float(s[-1] ** 2)


def _plan(lattice: QuadraticLattice, cur: TwoPlane, target: TwoPlane, session: "_Session") -> list:
    """Candidate ``omega`` directions, best first: the closing direction,
    then random cone directions ordered by distance gained."""
    out = []
    perp, margin = _closing_direction(lattice, cur, target)
    if margin > 0:
        out.append(perp)
    scored = []
    for omega in _cone_samples(lattice, cur, 48, session.rng):
        try:
            _, m = _landing(lattice, cur, omega, target)
        except PlaneError:
            continue
        scored.append((plane_distance(m, target), omega))
    scored.sort(key=lambda x: x[0])
    return out + [o for _, o in scored]


# ---------------------------------------------------------------------------
# hop plans: sequences v_0, v_1, ... whose consecutive pairs span the planes
# of the chain; consecutive planes share a vector and every consecutive
# triple must span a positive 3-plane


def _positivity(gram: np.ndarray, vectors: np.ndarray) -> float:
    """Smallest eigenvalue of the q-Gram relative to the Euclidean Gram."""
    try:
        return float(eigvalsh(vectors @ gram @ vectors.T, vectors @ vectors.T)[0])
    except np.linalg.LinAlgError:
        return -1.0


def _principal_vectors(p: TwoPlane, t: TwoPlane):
    q1, q2 = euclidean_frame(p.basis), euclidean_frame(t.basis)
    u, s, vt = np.linalg.svd(q1.T @ q2)
    return (q1 @ u).T, (q2 @ vt.T).T, np.arccos(np.clip(s, 0.0, 1.0))


def _zigzag(lattice: QuadraticLattice, p: TwoPlane, t: TwoPlane, m: int, kappa: float, swap: bool,
            sign: float) -> np.ndarray:
    """Move the two principal vectors of ``p`` to those of ``t`` in ``m``
    alternating increments, offset by ``±R n`` along a positive normal so
    every increment is positive; ``2m`` hops."""
    a, b, th = _principal_vectors(p, t)
    if swap:
        a, b, th = a[::-1], b[::-1], th[::-1]
    n = _cone_frame(lattice.gram_array, p.basis)[0]
    n = sign * n / np.linalg.norm(n)
    r0, r1 = kappa * th[0] / m, kappa * th[1] / m
    s = [0] + [(-1) ** (k + 1) for k in range(1, m)] + [0]
    out = [a[0], a[1]]
    for k in range(1, m + 1):
        out.append(a[0] + k / m * (b[0] - a[0]) + s[k] * r0 * n)
        out.append(a[1] + k / m * (b[1] - a[1]) - s[k] * r1 * n)
    return np.array(out)


def _hop_terms(gram, vs: np.ndarray, target: TwoPlane, center: TwoPlane, radius: float, d0: float) -> np.ndarray:
    """Normalised slacks: triple positivity, distance decrease, ball."""
    pos = [_positivity(gram, vs[i:i + 3]) / d0**2 for i in range(len(vs) - 2)]
    ds = [plane_distance(vs[i:i + 2], target) for i in range(len(vs) - 1)]
    ball = [(radius - plane_distance(vs[i:i + 2], center)) / radius for i in range(1, len(vs) - 2)]
    return np.array(pos + list(-np.diff(ds) / d0) + ball)


def _refine(gram, vs, target, center, radius, d0):
    head, tail, free = vs[:2], vs[-2:], vs[2:-2]

    def full(x):
        return np.vstack([head, x[:-1].reshape(free.shape), tail])

    x0 = np.concatenate([free.ravel(), [_hop_terms(gram, vs, target, center, radius, d0).min()]])
    cons = {"type": "ineq", "fun": lambda x: _hop_terms(gram, full(x), target, center, radius, d0) - x[-1]}
    res = minimize(lambda x: -x[-1], x0, method="SLSQP", constraints=[cons],
                   options={"maxiter": 200, "ftol": 1e-12})
    out = full(res.x)
    return out, float(_hop_terms(gram, out, target, center, radius, d0).min())


def hop_plan(
    lattice: QuadraticLattice,
    cur: TwoPlane,
    target: TwoPlane,
    center: TwoPlane,
    radius: float,
    max_hops: int = 8,
    floor: float = 1e-3,
) -> list[TwoPlane]:
    """Planes ``M_1, ..., M_k = target`` with each consecutive pair on a
    common twistor sphere, distances to ``target`` strictly decreasing and
    every plane inside the ball; empty when no plan is found."""
    g = lattice.gram_array
    d0 = plane_distance(cur, target)
    if d0 == 0:
        return []
    found = None
    for m in range(1, max_hops // 2 + 1):
        cands = []
        for kappa in (0.5, 1.0, 1.5, 2.0, 3.0):
            for swap in (False, True):
                for sign in (1.0, -1.0):
                    try:
                        vs = _zigzag(lattice, cur, target, m, kappa, swap, sign)
                    except PlaneError:
                        continue
                    cands.append((_hop_terms(g, vs, target, center, radius, d0).min(), vs))
        cands.sort(key=lambda c: -c[0])
        for score, vs in cands[:3]:
            if score <= floor and m > 1:
                vs, score = _refine(g, vs, target, center, radius, d0)
            if score > floor:
                found = vs
                break
        if found is not None:
            break
    if found is None:
        return []
    planes = []
    for i in range(1, len(found) - 2):
        try:
            planes.append(TwoPlane(q_orthonormalize(lattice, found[i:i + 2])))
        except PlaneError:
            return []
    return planes + [target]


def _sphere_grid(n_phi: int, n_theta: int) -> np.ndarray:
    phi = (np.arange(n_phi) + 0.5) * 2 * np.pi / n_phi
    theta = (np.arange(n_theta) + 0.5) * np.pi / n_theta
    t, p = np.meshgrid(theta, phi, indexing="ij")
    return np.stack([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)], axis=-1).reshape(-1, 3)


def _twistor_planes(W: ThreePlane, us: np.ndarray) -> np.ndarray:
    """Bases (m, 2, r) of the twistor planes for unit vectors ``us``."""
    out = []
    for u in us:
        p, s = sphere_frame(u)
        out.append(np.array([p @ W.basis, s @ W.basis]))
    return np.array(out)


def _closest_twistor_point(
    lattice: QuadraticLattice, W: ThreePlane, cur: TwoPlane, target: TwoPlane, grid: tuple[int, int]
) -> TwoPlane:
    """Point of the twistor sphere of ``W`` nearest to ``target``: coarse
    sphere grid, plus the current plane and the projection of the target,
    followed by a local refinement of the best candidate."""
    target_frame = euclidean_frame(target.basis)
    candidates = [twistor_normal(lattice, W, cur)]
    wq = euclidean_frame(W.basis)
    proj = (wq @ (wq.T @ target.basis.T)).T
    try:
        proj_plane = TwoPlane(q_orthonormalize(lattice, proj))
        candidates.append(twistor_normal(lattice, W, proj_plane))
    except PlaneError:
        pass
    us = np.vstack([_sphere_grid(*grid), np.array(candidates)])
    planes = _twistor_planes(W, us)
    frames = np.array([euclidean_frame(b) for b in planes])
    d = distances_to_frames(target_frame, frames)
    best = int(np.argmin(d))
    u0 = us[best]

    # local refinement in a tangent chart around u0
    e1, e2 = sphere_frame(u0)

    def objective(st):
        u = u0 + st[0] * e1 + st[1] * e2
        u = u / np.linalg.norm(u)
        return plane_distance(twistor_point(W, u), target)

    if d[best] > 0:
        res = minimize(objective, np.zeros(2), method="Nelder-Mead",
                       options={"xatol": SPHERE_TOL, "fatol": 1e-15, "initial_simplex":
                                np.array([[0, 0], [1e-3, 0], [0, 1e-3]]) * max(d[best], 1e-6) * 10})
        if res.fun < d[best]:
            u0 = u0 + res.x[0] * e1 + res.x[1] * e2
            u0 = u0 / np.linalg.norm(u0)
    plane = twistor_point(W, u0)
    # the antipode gives the same plane with the other orientation
    if not same_orientation(target, _aligned(plane, target)):
        plane = twistor_point(W, -u0)
    return plane


def _aligned(plane: TwoPlane, target: TwoPlane) -> TwoPlane:
    """Euclidean projection of ``target``'s basis onto ``plane``, used to
    compare orientations of nearby planes."""
    q = euclidean_frame(plane.basis)
    t, *_ = np.linalg.lstsq(plane.basis.T, q @ (q.T @ target.basis.T), rcond=None)
    return TwoPlane((t.T @ plane.basis) if np.linalg.matrix_rank(t) == 2 else plane.basis)


def _oriented_omega(lattice: QuadraticLattice, cur: TwoPlane, omega: np.ndarray, session: _Session) -> np.ndarray:
    """Flip ``omega`` into the component of the positive cone in ``cur^⊥``
    singled out by the session reference."""
    ref = None
    if session.reference is not None:
        r = _project_perp(lattice, cur, session.reference)
        if r @ lattice.gram_array @ r > EPS * max(1.0, r @ r):
            ref = r
    if ref is None:
        session.reference = omega.copy()
        return omega
    if positive_cone_component(lattice, cur, omega, ref, epsilon=1e-7) == "minus":
        return -omega
    return omega


def ghk_step(
    lattice: QuadraticLattice,
    cur: TwoPlane,
    target: TwoPlane,
    height_bound: int = DEFAULT_HEIGHT,
    max_retries: int = 20,
    session: _Session | None = None,
    epsilon: float = EPS,
    accept=None,
) -> ChainStep:
    """One twistor step from ``cur`` toward ``target`` through a 3-plane that
    is generic at ``height_bound``.

    ``accept`` is an optional predicate on the finished step; rejected
    candidates are skipped.
    """
    if session is None:
        session = _Session(np.random.default_rng(0))
    g = lattice.gram_array
    d0 = plane_distance(cur, target)
    degenerate = d0 <= epsilon and same_orientation(cur, target)
    if degenerate:
        plan = _cone_samples(lattice, cur, max_retries + 1, session.rng)
    else:
        plan = _plan(lattice, cur, target, session)
    blocking: list = []
    for base in plan:
        for attempt in range(max_retries + 1):
            omega = base
            if attempt:
                jitter = session.rng.standard_normal(lattice.rank)
                omega = base + 1e-6 * 2 ** min(attempt, 10) * np.linalg.norm(base) * jitter
            perp = _project_perp(lattice, cur, omega)
            if not perp @ g @ perp > epsilon * max(1.0, perp @ perp):
                break
            perp = _oriented_omega(lattice, cur, perp, session)
            try:
                W = extend_to_three_plane(lattice, cur, perp, epsilon)
            except PlaneError:
                break
            blocking = blocking_vectors(lattice, W, height_bound, epsilon)
            if blocking:
                continue
            if degenerate:
                to_plane = cur
            else:
                to_plane = _closest_twistor_point(lattice, W, cur, target, session.grid)
            d1 = plane_distance(to_plane, target)
            if d1 > d0:
                to_plane, d1 = cur, d0
            step = ChainStep(W, cur, to_plane, height_bound, d0, d1, degenerate or d1 >= d0)
            if accept is None or accept(step):
                return step
            break
    if blocking:
        raise ChainError(f"no generic 3-plane after {max_retries} retries; blocking vectors {blocking[:5]}")
    raise ChainError("no admissible positive direction orthogonal to the current plane")


def geodesic_midpoint(lattice: QuadraticLattice, p1: TwoPlane, p2: TwoPlane) -> TwoPlane:
    """Midpoint of the principal-angle geodesic between two planes."""
    q1, q2 = euclidean_frame(p1.basis), euclidean_frame(p2.basis)
    u, _, vt = np.linalg.svd(q1.T @ q2)
    a = q1 @ u
    b = q2 @ vt.T
    m = a + b
    m = m / np.linalg.norm(m, axis=0)
    plane = TwoPlane(q_orthonormalize(lattice, m.T))
    t, *_ = np.linalg.lstsq(plane.basis.T, p1.basis.T, rcond=None)
    return plane if np.linalg.det(t) > 0 else plane.reversed()


def connect(
    lattice: QuadraticLattice,
    p1: TwoPlane,
    p2: TwoPlane,
    ball_radius: float,
    max_steps: int,
    seed: int,
    height_bound: int = DEFAULT_HEIGHT,
    epsilon: float = EPS,
    max_retries: int = 20,
    grid: tuple[int, int] = GRID,
) -> GhkChain:
    """Chain of generic twistor steps from ``p1`` to ``p2`` inside the ball of
    radius ``ball_radius`` around their midpoint.

    On budget exhaustion the partial chain is returned with
    ``complete=False``.
    """
    if max_steps < 0:
        raise ValueError("max_steps must be >= 0")
    d = plane_distance(p1, p2)
    if d > 2 * ball_radius + 1e-12:
        raise LatticeError("endpoints are farther apart than the ball diameter")
    try:
        center = geodesic_midpoint(lattice, p1, p2)
    except PlaneError:
        raise ChainError("geodesic midpoint of the endpoints is not a positive plane") from None
    chain = GhkChain([], (p1, p2), center, float(ball_radius))
    if d <= epsilon and same_orientation(p1, p2):
        return chain
    session = _Session(np.random.default_rng(seed), grid=grid)

    def relative(step: ChainStep) -> ChainStep:
        before = plane_distance(step.from_plane, p2)
        after = plane_distance(step.to_plane, p2)
        return ChainStep(step.three_plane, step.from_plane, step.to_plane, step.genericity_height,
                         before, after, step.degenerate or after >= before)

    def accept(step: ChainStep) -> bool:
        return _acceptable(lattice, relative(step), center, ball_radius, p2, height_bound, epsilon)

    cur = p1
    hops: list[TwoPlane] = []
    while len(chain.steps) < max_steps:
        if not hops:
            perp, margin = _closing_direction(lattice, cur, p2)
            closes = False
            if margin > 0:
                try:
                    closes = plane_distance(_landing(lattice, cur, perp, p2)[1], p2) < epsilon
                except PlaneError:
                    pass
            hops = [p2] if closes else hop_plan(lattice, cur, p2, center, ball_radius)
        target = hops.pop(0) if hops else p2
        try:
            step = ghk_step(lattice, cur, target, height_bound, max_retries, session, epsilon, accept)
        except ChainError as err:
            if target is not p2 or hops:
                session.log.append(str(err))
                hops = []
                try:
                    step = ghk_step(lattice, cur, p2, height_bound, max_retries, session, epsilon, accept)
                except ChainError as err2:
                    chain.complete = False
                    chain.diagnostic = f"no admissible step inside the ball ({err2})"
                    return chain
            else:
                chain.complete = False
                chain.diagnostic = f"no admissible step inside the ball ({err})"
                return chain
        if plane_distance(step.to_plane, target) > epsilon:
            # off plan (perturbed 3-plane or fallback): plan again from here
            hops = []
        chain.steps.append(relative(step))
        cur = step.to_plane
        if plane_distance(cur, p2) < epsilon:
            return chain
    chain.complete = False
    chain.diagnostic = f"step budget {max_steps} exhausted at distance {plane_distance(cur, p2):.3g}"
    return chain


def _acceptable(lattice, step: ChainStep, center, radius, p2, height_bound, epsilon) -> bool:
    if step.distance_after >= step.distance_before:
        return False
    if plane_distance(step.to_plane, center) > radius + 1e-12:
        return False
    if not (contains(step.three_plane, step.from_plane) and contains(step.three_plane, step.to_plane)):
        return False
    if step.distance_after >= epsilon:
        # junctions must be generic points themselves
        if classify_point(lattice, step.to_plane, height_bound, epsilon).ns_rank != 0:
            return False
    return True


def check_chain(lattice: QuadraticLattice, chain: GhkChain, epsilon: float = EPS, tol: float = 1e-8) -> list[str]:
    """Invariant violations of ``chain`` (empty list when all hold)."""
    problems = []
    for i, s in enumerate(chain.steps):
        if not contains(s.three_plane, s.from_plane, tol) or not contains(s.three_plane, s.to_plane, tol):
            problems.append(f"step {i}: endpoint plane not inside its 3-plane")
        if not is_generic_three_plane(lattice, s.three_plane, s.genericity_height, epsilon):
            problems.append(f"step {i}: 3-plane not generic at height {s.genericity_height}")
        for p in (s.from_plane, s.to_plane):
            if plane_distance(p, chain.ball_center) > chain.ball_radius + tol:
                problems.append(f"step {i}: plane outside the ball")
        if i + 1 < len(chain.steps) and plane_distance(s.to_plane, chain.steps[i + 1].from_plane) > tol:
            problems.append(f"step {i}: does not meet step {i + 1}")
        if s.distance_after > s.distance_before + 1e-12:
            problems.append(f"step {i}: distance to the target increased")
    if chain.steps:
        if plane_distance(chain.steps[0].from_plane, chain.endpoints[0]) > tol:
            problems.append("chain does not start at the first endpoint")
        if chain.complete and plane_distance(chain.steps[-1].to_plane, chain.endpoints[1]) > max(tol, epsilon):
            problems.append("chain does not end at the second endpoint")
    return problems
