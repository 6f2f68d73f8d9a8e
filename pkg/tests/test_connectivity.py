import numpy as np
import pytest

from period_dynamics.connectivity import (
    blocking_vectors,
    check_chain,
    connect,
    geodesic_midpoint,
    ghk_step,
    hop_plan,
    is_generic_three_plane,
)
from period_dynamics.lattice import LatticeError, QuadraticLattice
from period_dynamics.period import (
    ThreePlane,
    TwoPlane,
    contains,
    extend_to_three_plane,
    plane_distance,
    q_orthonormalize,
    twistor_point,
)

L5 = QuadraticLattice.diagonal(1, 1, 1, -1, -1)
E = np.eye(5)


def witness():
    """A plane P1, a generic 3-plane W through it and P2 on the sphere of W."""
    rng = np.random.default_rng(5)
    p1 = TwoPlane(q_orthonormalize(L5, E[:2] + 0.05 * rng.standard_normal((2, 5))))
    W = extend_to_three_plane(L5, p1, E[2] + 0.05 * rng.standard_normal(5))
    u = np.array([0.3, 0.4, 0.8])
    return p1, W, twistor_point(W, u / np.linalg.norm(u))


def test_coordinate_three_plane_not_generic():
    W = ThreePlane(E[:3].copy())
    assert not is_generic_three_plane(L5, W, 10)
    assert (0, 0, 0, 1, 0) in blocking_vectors(L5, W, 1)


def test_tilted_three_plane_blocked_at_height_three():
    W = extend_to_three_plane(L5, TwoPlane(E[:2].copy()), 2 * E[2] + E[3])
    found = blocking_vectors(L5, W, 3)
    assert (0, 0, 1, 2, 0) in found or (0, 0, -1, -2, 0) in found
    assert (0, 0, 0, 0, 1) in found or (0, 0, 0, 0, -1) in found
    assert not is_generic_three_plane(L5, W, 3)


def test_perturbed_three_plane_generic():
    _, W, _ = witness()
    assert is_generic_three_plane(L5, W, 10)


def test_ghk_step_lands_on_sphere_target():
    p1, W, p2 = witness()
    step = ghk_step(L5, p1, p2)
    assert plane_distance(step.to_plane, p2) < 1e-9
    assert contains(step.three_plane, p1) and contains(step.three_plane, step.to_plane)
    assert not step.degenerate


def test_ghk_step_degenerate():
    p1, _, _ = witness()
    step = ghk_step(L5, p1, p1)
    assert step.degenerate and plane_distance(step.to_plane, p1) < 1e-12
    assert is_generic_three_plane(L5, step.three_plane, 10)


def test_connect_identical_endpoints():
    p1, _, _ = witness()
    chain = connect(L5, p1, p1, 0.5, 32, 0)
    assert chain.steps == [] and chain.complete


def test_connect_witness_single_step():
    p1, _, p2 = witness()
    chain = connect(L5, p1, p2, 0.5, 32, 0)
    assert chain.complete and len(chain.steps) == 1
    assert check_chain(L5, chain) == []


def test_connect_budget_zero():
    p1, _, p2 = witness()
    chain = connect(L5, p1, p2, 0.5, 0, 0)
    assert not chain.complete and "budget" in chain.diagnostic


def test_connect_rejects_far_endpoints():
    p1, _, _ = witness()
    far = TwoPlane(q_orthonormalize(L5, np.array([E[1], E[2]])))
    with pytest.raises(LatticeError):
        connect(L5, p1, far, 0.1, 32, 0)


@pytest.mark.parametrize("seed", range(4))
def test_connect_nearby_pairs(seed):
    rng = np.random.default_rng(100 + seed)
    p1 = TwoPlane(q_orthonormalize(L5, E[:2] + 0.2 * rng.standard_normal((2, 5))))
    p2 = TwoPlane(q_orthonormalize(L5, p1.basis + 0.1 * rng.standard_normal((2, 5))))
    chain = connect(L5, p1, p2, 0.5, 32, seed)
    assert chain.complete and len(chain.steps) <= 8
    assert check_chain(L5, chain) == []
    for s in chain.steps:
        assert is_generic_three_plane(L5, s.three_plane, 10)
        assert s.distance_after < s.distance_before


def test_connect_deterministic():
    rng = np.random.default_rng(3)
    p1 = TwoPlane(q_orthonormalize(L5, E[:2] + 0.1 * rng.standard_normal((2, 5))))
    p2 = TwoPlane(q_orthonormalize(L5, p1.basis + 0.05 * rng.standard_normal((2, 5))))
    a = connect(L5, p1, p2, 0.5, 32, 9).to_dict()
    b = connect(L5, p1, p2, 0.5, 32, 9).to_dict()
    assert a == b


def test_hop_plan_consecutive_planes_share_positive_three_plane():
    rng = np.random.default_rng(8)
    p1 = TwoPlane(q_orthonormalize(L5, E[:2] + 0.2 * rng.standard_normal((2, 5))))
    p2 = TwoPlane(q_orthonormalize(L5, p1.basis + 0.15 * rng.standard_normal((2, 5))))
    center = geodesic_midpoint(L5, p1, p2)
    hops = hop_plan(L5, p1, p2, center, 0.5)
    assert hops and plane_distance(hops[-1], p2) < 1e-9
    gram = L5.gram_array
    for a, b in zip([p1] + hops, hops):
        span = np.vstack([a.basis, b.basis])
        # rank 3 and positive definite on the span
        _, s, vt = np.linalg.svd(span)
        assert s[3] < 1e-8 * s[0]
        v = vt[:3]
        assert np.linalg.eigvalsh(v @ gram @ v.T).min() > 0
        assert plane_distance(b, center) <= 0.5 + 1e-12


def test_check_chain_reports_tampering():
    p1, _, p2 = witness()
    chain = connect(L5, p1, p2, 0.5, 32, 0)
    chain.ball_radius = 1e-3
    assert any("outside the ball" in msg for msg in check_chain(L5, chain))
