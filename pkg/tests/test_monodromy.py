from helpers import random_plane
import pytest
from hypothesis import given
from hypothesis import strategies as st

from period_dynamics.lattice import IsometryElement, LatticeError, QuadraticLattice, is_isometry
from period_dynamics.monodromy import (
    EmptyGeneratorSet,
    GeneratorSet,
    act,
    build_generators,
    random_word,
)
from period_dynamics.period import TwoPlane, planes_equal

L5 = QuadraticLattice.diagonal(1, 1, 1, -1, -1)
HYP4 = QuadraticLattice(((0, 1, 0, 0), (1, 0, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)))
GENS = build_generators(L5, 1)


def test_coordinate_reflections_present():
    deltas = {g.delta for g in GENS.elements}
    for i in range(5):
        assert tuple(int(i == j) for j in range(5)) in deltas
    assert all(is_isometry(L5, g) for g in GENS.elements)


def test_hyperbolic_swap_present():
    gens = build_generators(HYP4, 1)
    assert ((0, 1, 0, 0), (1, 0, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)) in {g.matrix for g in gens.elements}


def test_inverse_closed():
    mats = {g.matrix for g in GENS.elements}
    for g in GENS.elements:
        assert g.inverse(L5).matrix in mats


def test_empty_generator_set():
    # found by search: signature (3, 1), no integral reflection at height 1
    lat = QuadraticLattice(((8, 3, 0, 6), (3, 8, -5, -5), (0, -5, 12, -5), (6, -5, -5, -6)))
    with pytest.raises(EmptyGeneratorSet):
        build_generators(lat, 1)


def test_height_bound_validation():
    with pytest.raises(LatticeError):
        build_generators(L5, 0)


def test_random_word_identity_and_determinism():
    assert random_word(GENS, 0, 7).matrix == IsometryElement.identity(5).matrix
    assert random_word(GENS, 50, 7) == random_word(GENS, 50, 7)


def test_generator_set_round_trip():
    again = GeneratorSet.from_dict(L5, GENS.to_dict())
    assert [g.matrix for g in again.elements] == [g.matrix for g in GENS.elements]


@given(st.integers(0, 2**32), st.integers(0, 60))
def test_group_closure(seed, length):
    g = random_word(GENS, length, seed)
    h = random_word(GENS, length // 2 + 1, seed + 1)
    assert is_isometry(L5, g @ h)
    assert is_isometry(L5, g.inverse(L5))
    assert (g @ g.inverse(L5)).matrix == IsometryElement.identity(5).matrix


def test_act_identity_and_fixed_plane():
    P = TwoPlane.from_vectors(L5, [1.0, 0.2, 0, 0.1, 0], [0, 1.0, 0.3, 0, 0.2])
    assert planes_equal(act(L5, IsometryElement.identity(5), P), P)
    swap = IsometryElement(((0, 1, 0, 0), (1, 0, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)))
    Q = TwoPlane.from_vectors(HYP4, [0, 0, 1, 0], [0, 0, 0, 1])
    assert planes_equal(act(HYP4, swap, Q), Q)


@given(st.integers(0, 2**32), st.integers(1, 6), st.integers(1, 6))
def test_act_is_group_action_float(seed, m, n):
    # float planes: words stay short, long words amplify rounding by |g|^2
    P = random_plane(L5, seed, 0.3)
    g = random_word(GENS, m, seed)
    h = random_word(GENS, n, seed + 1)
    assert planes_equal(act(L5, g @ h, P), act(L5, g, act(L5, h, P)), tol=1e-8)


def test_act_exact_plane_stays_exact():
    P = TwoPlane.from_vectors(L5, (1, 0, 0, 0, 0), (0, "sqrt(2)", 0, 1, 0))
    Q = act(L5, random_word(GENS, 300, 3), P)
    assert Q.exact is not None
    Q.check(L5)


@given(st.integers(0, 2**32), st.integers(1, 60), st.integers(1, 60), st.integers(1, 5))
def test_act_is_group_action_exact(seed, m, n, k):
    P = TwoPlane.from_vectors(L5, (1, 0, "1/3", 0, 0), (0, f"sqrt({k + 1})", 0, 1, "1/2"))
    g = random_word(GENS, m, seed)
    h = random_word(GENS, n, seed + 1)
    assert planes_equal(act(L5, g @ h, P), act(L5, g, act(L5, h, P)), tol=1e-8)
