import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bgtkit.errors import ValidationError
from bgtkit.game import Game, check_behavior, permute
from bgtkit.heuristics import (
    HEURISTICS,
    HeuristicKind,
    get_heuristic,
    heuristic_batch,
    is_symmetric,
    max_symmetric,
    maxmax,
    maxmax_fairness,
    maxmax_welfare,
    maxmin,
    minimax_regret,
    uniform,
)

from oracles import brute_heuristic

NAMES = [k.value for k in HeuristicKind]
ints = st.integers(-3, 3).map(float)


@st.composite
def int_games(draw):
    n = draw(st.integers(1, 4))
    m = draw(st.integers(1, 4))
    u1 = draw(arrays(float, (n, m), elements=ints))
    if n == m and draw(st.booleans()):
        return Game(u1, u1.T)
    return Game(u1, draw(arrays(float, (n, m), elements=ints)))


def G(u1, u2=None):
    u1 = np.asarray(u1, float)
    return Game(u1, np.zeros_like(u1) if u2 is None else u2)


class TestExamples:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_uniform(self, n):
        np.testing.assert_allclose(uniform(G(np.eye(n))), np.full(n, 1 / n))

    def test_maxmax(self):
        np.testing.assert_array_equal(maxmax(G([[3, 1], [0, 2]])), [1, 0])
        np.testing.assert_array_equal(maxmax(G([[1, 1], [1, 1]])), [0.5, 0.5])
        np.testing.assert_array_equal(maxmax(G([[0, 5], [5, 0], [1, 1]])), [0.5, 0.5, 0])

    def test_maxmin(self):
        np.testing.assert_array_equal(maxmin(G([[3, 1], [0, 2]])), [1, 0])
        np.testing.assert_array_equal(maxmin(G([[1, 1], [1, 1]])), [0.5, 0.5])
        np.testing.assert_array_equal(maxmin(G([[0, 5], [2, 2]])), [0, 1])

    def test_minimax_regret(self):
        np.testing.assert_array_equal(minimax_regret(G([[1, 1], [1, 1]])), [0.5, 0.5])
        np.testing.assert_array_equal(minimax_regret(G([[10, 0], [9, 1]])), [0.5, 0.5])
        np.testing.assert_array_equal(minimax_regret(G([[10, 0], [9, 5]])), [0, 1])

    def test_max_symmetric(self):
        u = np.array([[2.0, 0.0], [3.0, 1.0]])
        np.testing.assert_array_equal(max_symmetric(Game(u, u.T)), [1, 0])
        np.testing.assert_allclose(max_symmetric(G(np.ones((2, 3)))), [0.5, 0.5])
        u = np.array([[1.0, 4.0], [2.0, 1.0]])
        np.testing.assert_array_equal(max_symmetric(Game(u, u.T)), [0.5, 0.5])

    def test_fairness(self):
        u = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(maxmax_fairness(Game(u, u)), [0.5, 0.5])
        np.testing.assert_array_equal(maxmax_fairness(Game([[1, 0], [5, 5]], [[1, 9], [0, 9]])), [1, 0])
        np.testing.assert_array_equal(maxmax_fairness(Game([[3.0]], [[-1.0]])), [1.0])

    def test_welfare(self):
        np.testing.assert_array_equal(maxmax_welfare(Game([[1, 0]], [[0, 2]])), [1.0])
        np.testing.assert_array_equal(maxmax_welfare(Game([[1, 0], [0, 0]], [[1, 0], [0, 3]])), [0, 1])
        u = np.array([[1.0, 2.0], [3.0, -1.0]])
        np.testing.assert_array_equal(maxmax_welfare(Game(u, 5 - u)), [0.5, 0.5])

    def test_lookup(self):
        assert get_heuristic("maxmin") is maxmin
        with pytest.raises(ValidationError):
            get_heuristic("nope")
        assert set(HEURISTICS) == set(HeuristicKind)

    def test_batch(self, rng):
        u1, u2 = rng.normal(size=(4, 3, 2)), rng.normal(size=(4, 3, 2))
        out = heuristic_batch("maxmax", u1, u2)
        for b in range(4):
            np.testing.assert_array_equal(out[b], maxmax(Game(u1[b], u2[b])))


class TestProperties:
    @pytest.mark.parametrize("name", NAMES)
    @given(g=int_games())
    @settings(max_examples=60, deadline=None)
    def test_matches_oracle(self, name, g):
        np.testing.assert_array_equal(get_heuristic(name)(g), brute_heuristic(name, g.u1, g.u2))

    @pytest.mark.parametrize("name", NAMES)
    @given(g=int_games(), shift=st.floats(-10, 10), scale=st.floats(0.1, 10))
    @settings(max_examples=60, deadline=None)
    def test_affine_invariance(self, name, g, shift, scale):
        f = get_heuristic(name)
        h = Game(g.u1 * scale + shift, g.u2 * scale + shift)
        np.testing.assert_array_equal(f(h), f(g))
        check_behavior(f(h))

    @pytest.mark.parametrize("name", ["maxmax", "maxmin", "minimax_regret"])
    def test_own_payoff_only(self, name, rng):
        f = get_heuristic(name)
        for _ in range(50):
            u1 = rng.normal(size=(3, 4))
            np.testing.assert_array_equal(f(Game(u1, rng.normal(size=(3, 4)))), f(Game(u1, rng.normal(size=(3, 4)))))

    def test_symmetric_own_payoff_only(self, rng):
        u = rng.normal(size=(3, 3))
        np.testing.assert_array_equal(max_symmetric(Game(u, u.T)), max_symmetric(Game(u, u.T.copy())))
        asym = [max_symmetric(Game(u, rng.normal(size=(3, 3)))) for _ in range(5)]
        for a in asym:
            np.testing.assert_allclose(a, np.full(3, 1 / 3))

    def test_transformation_dependence(self, rng):
        for _ in range(50):
            u1, u2, c = rng.normal(size=(3, 3)), rng.normal(size=(3, 3)), rng.normal(size=(3, 3))
            # same u1 - u2, different levels
            np.testing.assert_array_equal(maxmax_fairness(Game(u1, u2)), maxmax_fairness(Game(u1 + c, u2 + c)))
            np.testing.assert_array_equal(maxmax_welfare(Game(u1, u2)), maxmax_welfare(Game(u1 + c, u2 - c)))

    @pytest.mark.parametrize("name", NAMES)
    def test_permutation_equivariance(self, name, rng):
        f = get_heuristic(name)
        for _ in range(50):
            n = int(rng.integers(1, 5))
            u1 = rng.integers(-2, 3, size=(n, n)).astype(float)
            g = Game(u1, u1.T) if rng.random() < 0.5 else Game(u1, rng.normal(size=(n, n)))
            sigma = rng.permutation(n)
            # relabelling rows and columns differently breaks symmetry
            same = name == "max_symmetric" or rng.random() < 0.5
            pi = sigma if same else rng.permutation(n)
            np.testing.assert_array_equal(f(permute(g, sigma, pi)), f(g)[sigma])

    def test_symmetry_tolerance(self):
        u = np.array([[1.0, 2.0], [0.0, 3.0]])
        assert is_symmetric(Game(u, u.T + 1e-12))
        assert not is_symmetric(Game(u, u.T + 1e-6))
