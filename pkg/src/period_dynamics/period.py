"""Period domain geometry: period lines, positive oriented 2- and 3-planes,
twistor spheres and the positive-cone selector.

Planes carry float bases that are orthonormal for ``q``.  A plane may also
carry an exact spanning pair (:class:`~period_dynamics.exact.ExactVectors`);
the float basis is then the q-Gram–Schmidt of that pair, and lattice-level
questions (Néron–Severi rank) are answered exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exact import ExactVectors
from .lattice import EPS, LatticeError, QuadraticLattice


class PlaneError(ValueError):
    """A plane or period point violates its invariants."""


def _qform(lattice: QuadraticLattice, u: np.ndarray, v: np.ndarray) -> float:
    return float(u @ lattice.gram_array @ v)


def _scale(lattice: QuadraticLattice, *vs: np.ndarray) -> float:
    """Magnitude used to make tolerances relative."""
    g = np.abs(lattice.gram_array).max()
    out = 1.0
    for v in vs:
        out *= float(np.linalg.norm(v))
    return max(out * g, 1e-300)


def q_orthonormalize(lattice: QuadraticLattice, vectors: np.ndarray, epsilon: float = EPS) -> np.ndarray:
    """Gram–Schmidt under ``q`` (two passes); every pivot must be positive."""
    out: list[np.ndarray] = []
    for v in np.atleast_2d(np.asarray(vectors, dtype=float)):
        w = v.copy()
        for _ in range(2):
            for u in out:
                w = w - _qform(lattice, w, u) * u
        n2 = _qform(lattice, w, w)
        if not np.isfinite(n2) or n2 <= epsilon * _scale(lattice, v, v):
            raise PlaneError("degenerate or non-positive span (Gram–Schmidt pivot below tolerance)")
        out.append(w / np.sqrt(n2))
    return np.array(out)


def q_gram(lattice: QuadraticLattice, basis: np.ndarray) -> np.ndarray:
    b = np.atleast_2d(basis)
    return b @ lattice.gram_array @ b.T


def _is_symbolic_coords(v) -> bool:
    if isinstance(v, np.ndarray) and v.dtype != object:
        return False
    return all(not isinstance(x, float) for x in v)


# ---------------------------------------------------------------------------
# types


@dataclass(frozen=True, eq=False)
class TwoPlane:
    """Positive oriented 2-plane; ``basis`` rows are q-orthonormal."""

    basis: np.ndarray
    exact: ExactVectors | None = None

    @classmethod
    def from_vectors(cls, lattice: QuadraticLattice, a, b, epsilon: float = EPS) -> "TwoPlane":
        """Oriented plane spanned by ``(a, b)``.

        Integer, Fraction and symbolic (``"sqrt(2)"``) coordinates are kept
        exactly alongside the float basis.
        """
        if len(a) != lattice.rank or len(b) != lattice.rank:
            raise LatticeError("vector length does not match lattice rank")
        ex = None
        if _is_symbolic_coords(a) and _is_symbolic_coords(b):
            ex = ExactVectors.parse([list(a), list(b)])
            num = np.array(ex.evaluate())
        else:
            num = np.array([np.asarray(a, dtype=float), np.asarray(b, dtype=float)])
        return cls(q_orthonormalize(lattice, num, epsilon), ex)

    @classmethod
    def from_exact(cls, lattice: QuadraticLattice, ex: ExactVectors, epsilon: float = EPS) -> "TwoPlane":
        return cls(q_orthonormalize(lattice, np.array(ex.evaluate()), epsilon), ex)

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def check(self, lattice: QuadraticLattice, epsilon: float = EPS) -> None:
        check_orthonormal(lattice, self.basis, epsilon)

    def reversed(self) -> "TwoPlane":
        ex = None
        if self.exact is not None:
            ex = ExactVectors(self.exact.numbers, self.exact.coeffs[::-1])
        return TwoPlane(self.basis[::-1].copy(), ex)


@dataclass(frozen=True, eq=False)
class ThreePlane:
    """Positive oriented 3-plane with q-orthonormal rows ``(w1, w2, w3)``."""

    basis: np.ndarray

    def check(self, lattice: QuadraticLattice, epsilon: float = EPS) -> None:
        check_orthonormal(lattice, self.basis, epsilon)


def check_orthonormal(lattice: QuadraticLattice, basis: np.ndarray, epsilon: float = EPS) -> None:
    g = q_gram(lattice, basis)
    k = basis.shape[0]
    if not np.all(np.isfinite(g)):
        raise PlaneError("basis has non-finite entries")
    scale = max(1.0, float(np.abs(basis).max()) ** 2 * float(np.abs(lattice.gram_array).max()))
    if np.abs(g - np.eye(k)).max() > epsilon * scale:
        raise PlaneError(f"basis is not q-orthonormal (Gram deviation {np.abs(g - np.eye(k)).max():.3g})")


@dataclass(frozen=True, eq=False)
class PeriodPoint:
    """A period line ``l = re + i im``, normalised so ``q(re, re) = 1``."""

    re: np.ndarray
    im: np.ndarray

    @classmethod
    def create(cls, lattice: QuadraticLattice, re, im, epsilon: float = EPS) -> "PeriodPoint":
        re = np.asarray(re, dtype=float)
        im = np.asarray(im, dtype=float)
        if re.shape != (lattice.rank,) or im.shape != (lattice.rank,):
            raise LatticeError("vector length does not match lattice rank")
        rr, ii, ri = _qform(lattice, re, re), _qform(lattice, im, im), _qform(lattice, re, im)
        scale = _scale(lattice, re, re) + _scale(lattice, im, im)
        if not rr > epsilon * scale:
            raise PlaneError("q(l, conj l) must be positive")
        if abs(rr - ii) > epsilon * scale or abs(ri) > epsilon * scale:
            raise PlaneError("q(l, l) must vanish: need q(re,re) = q(im,im) and q(re,im) = 0")
        s = np.sqrt(rr)
        return cls(re / s, im / s)

    @property
    def line(self) -> np.ndarray:
        return self.re + 1j * self.im

    def scaled(self, factor: complex) -> "PeriodPoint":
        l = factor * self.line
        return PeriodPoint(l.real.copy(), l.imag.copy())


def line_distance(p1: PeriodPoint, p2: PeriodPoint) -> float:
    """Projective (Fubini–Study sine) distance between two complex lines."""
    l1 = p1.line / np.linalg.norm(p1.line)
    l2 = p2.line / np.linalg.norm(p2.line)
    resid = l2 - np.vdot(l1, l2) * l1
    return float(np.linalg.norm(resid))


# ---------------------------------------------------------------------------
# quadric <-> Grassmannian


def line_to_plane(lattice: QuadraticLattice, p: PeriodPoint, epsilon: float = EPS) -> TwoPlane:
    """Oriented plane ``<Re l, Im l>``."""
    return TwoPlane(q_orthonormalize(lattice, np.array([p.re, p.im]), epsilon))


def plane_to_line(lattice: QuadraticLattice, plane: TwoPlane, epsilon: float = EPS) -> PeriodPoint:
    """The isotropic line ``x + i y`` picked out by the orientation ``(x, y)``."""
    plane.check(lattice, epsilon)
    x, y = plane.basis
    return PeriodPoint(x.copy(), y.copy())


def extend_to_three_plane(
    lattice: QuadraticLattice, plane: TwoPlane, omega, epsilon: float = EPS
) -> ThreePlane:
    """``plane ⊕ <omega_perp>`` oriented as ``(x, y, omega_perp)``."""
    omega = np.asarray(omega, dtype=float)
    x, y = plane.basis
    perp = omega - _qform(lattice, omega, x) * x - _qform(lattice, omega, y) * y
    n2 = _qform(lattice, perp, perp)
    if not n2 > epsilon * _scale(lattice, omega, omega):
        raise PlaneError("component of omega orthogonal to the plane is not positive")
    w3 = perp / np.sqrt(n2)
    w3 = w3 - _qform(lattice, w3, x) * x - _qform(lattice, w3, y) * y
    return ThreePlane(np.array([x, y, w3 / np.sqrt(_qform(lattice, w3, w3))]))


def sphere_frame(u: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal ``(p, s)`` in R^3 with ``(p, s, u)`` positively oriented."""
    u = np.asarray(u, dtype=float)
    k = int(np.argmax(np.abs(u)))
    e = np.zeros(3)
    e[(k + 1) % 3] = 1.0
    p = e - (e @ u) * u
    p /= np.linalg.norm(p)
    return p, np.cross(u, p)


def twistor_point(W: ThreePlane, u: Sequence[float], epsilon: float = EPS) -> TwoPlane:
    """Oriented 2-plane of ``W`` orthogonal to ``a w1 + b w2 + c w3``.

    Orientation is induced from ``W``: ``(p, s, u)`` is a positive frame.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (3,) or abs(float(u @ u) - 1.0) > epsilon:
        raise PlaneError("twistor parameter must be a unit vector (a, b, c)")
    p, s = sphere_frame(u)
    return TwoPlane(np.array([p @ W.basis, s @ W.basis]))


def twistor_normal(lattice: QuadraticLattice, W: ThreePlane, plane: TwoPlane) -> np.ndarray:
    """The unit ``u`` with ``twistor_point(W, u) == plane`` (plane inside W)."""
    coords = plane.basis @ lattice.gram_array @ W.basis.T
    u = np.cross(coords[0], coords[1])
    return u / np.linalg.norm(u)


def positive_cone_component(
    lattice: QuadraticLattice,
    plane: TwoPlane,
    nu,
    ref,
    epsilon: float = EPS,
) -> str:
    """Which component of ``{q >= 0}`` inside ``plane^⊥`` contains ``nu``.

    Returns ``"plus"``, ``"minus"``, ``"outside"`` or ``"null"``.
    """
    nu = np.asarray(nu, dtype=float)
    ref = np.asarray(ref, dtype=float)
    for name, v in (("nu", nu), ("ref", ref)):
        for b in plane.basis:
            if abs(_qform(lattice, v, b)) > epsilon * _scale(lattice, v, b):
                raise PlaneError(f"{name} is not q-orthogonal to the plane")
    if not _qform(lattice, ref, ref) > epsilon * _scale(lattice, ref, ref):
        raise PlaneError("ref must be a positive vector")
    n2 = _qform(lattice, nu, nu)
    if abs(n2) <= epsilon * _scale(lattice, nu, nu):
        return "null"
    if n2 < 0:
        return "outside"
    return "plus" if _qform(lattice, nu, ref) > 0 else "minus"


# ---------------------------------------------------------------------------
# chart metric


def euclidean_frame(basis: np.ndarray) -> np.ndarray:
    """Columns: a Euclidean-orthonormal basis of the row span."""
    q, _ = np.linalg.qr(np.atleast_2d(basis).T)
    return q


def _principal_angles(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    cos = np.linalg.svd(q1.T @ q2, compute_uv=False)
    sin = np.linalg.svd(q2 - q1 @ (q1.T @ q2), compute_uv=False)
    # cosines come out descending and sines descending; pair largest cos with smallest sin
    return np.arctan2(sin[::-1], np.clip(cos, 0.0, 1.0))


def plane_distance(p1, p2) -> float:
    """Principal-angle distance ``sqrt(sum theta_i^2)`` between unoriented
    planes, in the Euclidean inner product on coordinates (not ``q``)."""
    b1 = p1.basis if hasattr(p1, "basis") else np.asarray(p1, dtype=float)
    b2 = p2.basis if hasattr(p2, "basis") else np.asarray(p2, dtype=float)
    if b1.shape[1] != b2.shape[1]:
        raise LatticeError("planes live in lattices of different rank")
    return float(np.sqrt(np.sum(_principal_angles(euclidean_frame(b1), euclidean_frame(b2)) ** 2)))


def distances_to_frames(frame: np.ndarray, frames: np.ndarray) -> np.ndarray:
    """Principal-angle distances from one Euclidean frame (r×2) to a stack
    of frames (m×r×2)."""
    m = np.einsum("kri,rj->kij", frames, frame)
    cos = np.linalg.svd(m, compute_uv=False)
    resid = frame[None, :, :] - np.einsum("kri,kij->krj", frames, m)
    sin = np.linalg.svd(resid, compute_uv=False)
    ang = np.arctan2(sin[:, ::-1], np.clip(cos, 0.0, 1.0))
    return np.sqrt(np.sum(ang**2, axis=1))


def same_orientation(p1: TwoPlane, p2: TwoPlane) -> bool:
    """Whether ``p2``'s ordered basis has the orientation of ``p1``'s
    (meaningful when the planes coincide)."""
    # coordinates in p1's QR frame; avoids rank truncation for far-out planes
    q = euclidean_frame(p1.basis)
    return bool(np.linalg.det(q.T @ p1.basis.T) * np.linalg.det(q.T @ p2.basis.T) > 0)


def planes_equal(p1: TwoPlane, p2: TwoPlane, tol: float = 1e-8, oriented: bool = True) -> bool:
    if plane_distance(p1, p2) > tol:
        return False
    return same_orientation(p1, p2) if oriented else True


def contains(W: ThreePlane, plane: TwoPlane, tol: float = 1e-8) -> bool:
    """Whether ``plane`` lies in ``W`` (Euclidean residual of the basis)."""
    q = euclidean_frame(W.basis)
    for v in plane.basis:
        r = v - q @ (q.T @ v)
        if np.linalg.norm(r) > tol * max(1.0, np.linalg.norm(v)):
            return False
    return True


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DimensionReport:
    perspace_dim: int
    kahler_cone_dim: int
    teich_h_dim: int

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.perspace_dim, self.kahler_cone_dim, self.teich_h_dim)

    def to_dict(self) -> dict:
        return {"perspace_dim": self.perspace_dim, "kahler_cone_dim": self.kahler_cone_dim,
                "teich_h_dim": self.teich_h_dim}


def dimension_report(b2: int) -> DimensionReport:
    """Real dimensions of the period space, the Kähler cone and the space of
    hyperkähler metrics for second Betti number ``b2``."""
    if b2 < 4:
        raise ValueError("b2 must be >= 4")
    return DimensionReport(2 * (b2 - 2), b2 - 2, b2 * (b2 - 1) * (b2 - 2) // 6)

