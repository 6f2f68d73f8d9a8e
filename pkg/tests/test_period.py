import helpers
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from period_dynamics.lattice import QuadraticLattice
from period_dynamics.period import (
    PeriodPoint,
    PlaneError,
    TwoPlane,
    contains,
    dimension_report,
    extend_to_three_plane,
    line_to_plane,
    plane_distance,
    plane_to_line,
    planes_equal,
    positive_cone_component,
    q_gram,
    same_orientation,
    twistor_point,
)

L4 = QuadraticLattice.diagonal(1, 1, 1, -1)
L5 = QuadraticLattice.diagonal(1, 1, 1, -1, -1)
E = np.eye(5)
E4 = np.eye(4)


def projective_distance(l1, l2):
    # sine of the angle between the complex lines
    u = l1 / np.linalg.norm(l1)
    v = l2 / np.linalg.norm(l2)
    return float(np.linalg.norm(v - u * np.vdot(u, v)))


def random_plane(seed, lat=L5, spread=0.6):
    return helpers.random_plane(lat, seed, spread)


seeds = st.integers(0, 2**32 - 1)


def test_line_to_plane_coordinate():
    p = PeriodPoint.create(L4, E4[0], E4[1])
    P = line_to_plane(L4, p)
    assert planes_equal(P, TwoPlane.from_vectors(L4, E4[0], E4[1]))


def test_line_scaling_keeps_orientation():
    p = PeriodPoint.create(L4, E4[0], E4[1]).scaled(2j)
    assert np.allclose(p.re, -2 * E4[1]) and np.allclose(p.im, 2 * E4[0])
    P = line_to_plane(L4, PeriodPoint.create(L4, p.re, p.im))
    assert planes_equal(P, TwoPlane.from_vectors(L4, E4[0], E4[1]))


def test_line_to_plane_sqrt2_gram_identity():
    a = E[0]
    b = np.array([0, np.sqrt(2), 0, 1, 0])
    p = PeriodPoint.create(L5, a, b)
    P = line_to_plane(L5, p)
    assert np.allclose(q_gram(L5, P.basis), np.eye(2), atol=1e-12)


def test_plane_to_line_and_conjugate():
    P = TwoPlane.from_vectors(L4, E4[0], E4[1])
    assert np.allclose(plane_to_line(L4, P).line, E4[0] + 1j * E4[1])
    assert np.allclose(plane_to_line(L4, P.reversed()).line, E4[1] + 1j * E4[0])


def test_period_point_rejects_non_isotropic():
    with pytest.raises(PlaneError):
        PeriodPoint.create(L4, E4[0], 2 * E4[1])
    with pytest.raises(PlaneError):
        PeriodPoint.create(L4, E4[3], E4[3])


def test_two_plane_rejects_degenerate():
    with pytest.raises(PlaneError):
        TwoPlane.from_vectors(L5, E[0], E[3])
    with pytest.raises(PlaneError):
        TwoPlane.from_vectors(L5, E[0], 2 * E[0])


@given(seeds)
def test_round_trip_and_line_invariants(seed):
    P = random_plane(seed)
    l = plane_to_line(L5, P).line
    g = L5.gram_array
    assert abs(l @ g @ l) < 1e-9
    assert (l @ g @ l.conj()).real > 0
    p = PeriodPoint.create(L5, P.basis[0], P.basis[1]).scaled(np.exp(1j * (seed % 7)) * 3)
    back = plane_to_line(L5, line_to_plane(L5, PeriodPoint.create(L5, p.re, p.im)))
    assert projective_distance(back.line, p.line) < 1e-9


def test_extend_to_three_plane_examples():
    P = TwoPlane.from_vectors(L5, E[0], E[1])
    W = extend_to_three_plane(L5, P, E[2])
    assert np.allclose(W.basis, E[:3])
    with pytest.raises(PlaneError):
        extend_to_three_plane(L5, P, E[2] + E[3])
    W = extend_to_three_plane(L5, P, 2 * E[2] + E[3])
    assert np.allclose(W.basis[2], (2 * E[2] + E[3]) / np.sqrt(3))


def test_twistor_point_examples():
    W = extend_to_three_plane(L5, TwoPlane.from_vectors(L5, E[0], E[1]), E[2])
    assert planes_equal(twistor_point(W, (1, 0, 0)), TwoPlane.from_vectors(L5, E[1], E[2]))
    assert planes_equal(twistor_point(W, (0, 1, 0)), TwoPlane.from_vectors(L5, E[2], E[0]))
    assert planes_equal(twistor_point(W, (-1, 0, 0)), TwoPlane.from_vectors(L5, E[2], E[1]))
    with pytest.raises(PlaneError):
        twistor_point(W, (1, 1, 0))


@given(seeds, st.floats(0, np.pi), st.floats(0, 2 * np.pi))
def test_twistor_point_properties(seed, theta, phi):
    P = random_plane(seed, spread=0.2)
    rng = np.random.default_rng(seed + 1)
    W = extend_to_three_plane(L5, P, E[2] + 0.1 * rng.normal(size=5))
    u = np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
    T = twistor_point(W, u)
    T.check(L5)
    assert contains(W, T)
    normal = u @ W.basis
    assert np.allclose(T.basis @ L5.gram_array @ normal, 0, atol=1e-9)
    anti = twistor_point(W, -u)
    assert planes_equal(T, anti, oriented=False)
    assert not same_orientation(T, anti)


def test_positive_cone_component_examples():
    P = TwoPlane.from_vectors(L5, E[0], E[1])
    assert positive_cone_component(L5, P, E[2], E[2]) == "plus"
    assert positive_cone_component(L5, P, -E[2], E[2]) == "minus"
    assert positive_cone_component(L5, P, E[3], E[2]) == "outside"
    assert positive_cone_component(L5, P, E[2] + E[3], E[2]) == "null"
    with pytest.raises(PlaneError):
        positive_cone_component(L5, P, E[0], E[2])


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.floats(0.01, 100))
def test_positive_cone_ray_invariance(c, t):
    P = TwoPlane.from_vectors(L5, E[0], E[1])
    nu = np.array([0, 0, *c])
    if np.linalg.norm(nu) < 1e-3:
        return
    label = positive_cone_component(L5, P, nu, E[2])
    assert positive_cone_component(L5, P, t * nu, E[2]) == label
    swap = {"plus": "minus", "minus": "plus", "outside": "outside", "null": "null"}
    assert positive_cone_component(L5, P, -nu, E[2]) == swap[label]


def test_plane_distance_examples():
    P = TwoPlane.from_vectors(L5, E[0], E[1])
    assert plane_distance(P, P) == 0
    Q = TwoPlane.from_vectors(L5, E[0], E[2])
    assert plane_distance(P, Q) == pytest.approx(np.pi / 2, abs=1e-12)


@given(seeds, seeds, seeds)
def test_plane_distance_metric(s1, s2, s3):
    a, b, c = random_plane(s1), random_plane(s2), random_plane(s3)
    assert plane_distance(a, b) == pytest.approx(plane_distance(b, a), abs=1e-12)
    assert plane_distance(a, c) <= plane_distance(a, b) + plane_distance(b, c) + 1e-8


@pytest.mark.parametrize("b2, expected", [(23, (42, 21, 1771)), (4, (4, 2, 4)), (5, (6, 3, 10))])
def test_dimension_report(b2, expected):
    assert dimension_report(b2).as_tuple() == expected


def test_dimension_report_rejects_small():
    with pytest.raises(ValueError):
        dimension_report(3)
