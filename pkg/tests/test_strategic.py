import numpy as np
import pytest

from bgtkit.errors import DimensionMismatch, ValidationError
from bgtkit.game import Game, transpose_for_column
from bgtkit.heuristics import maxmax, uniform
from bgtkit.properties import DominantGameFamily, gen_zeta_dominant, proof_pair_other_responsive, qbr_bound
from bgtkit.strategic import LevelDistribution, QchModel, qbr, qch_levels, qch_predict

from conftest import random_game
from oracles import brute_poisson, brute_qbr, brute_qch


class TestQbr:
    def test_constant_payoffs(self, rng):
        for c in (-3.0, 0.0, 7.5):
            np.testing.assert_allclose(qbr(Game(np.full((2, 2), c), np.eye(2)), rng.dirichlet([1, 1]), 2.0), [0.5, 0.5])

    def test_softmax_value(self):
        p = qbr(Game([[1.0, 0.0], [0.0, 0.0]], np.zeros((2, 2))), [0.5, 0.5], 1.0)
        e = np.exp(0.5)
        np.testing.assert_allclose(p, [e / (e + 1), 1 / (e + 1)], atol=1e-12)
        np.testing.assert_allclose(p, [0.6225, 0.3775], atol=1e-4)

    def test_small_precision(self, rng):
        g = random_game(rng, 4, 3)
        np.testing.assert_allclose(qbr(g, np.full(3, 1 / 3), 1e-8), np.full(4, 0.25), atol=1e-6)

    def test_errors(self):
        g = Game(np.eye(2), np.eye(2))
        with pytest.raises(DimensionMismatch):
            qbr(g, [1.0, 0.0, 0.0], 1.0)
        with pytest.raises(ValidationError):
            qbr(g, [1.0, 0.0], 0.0)

    def test_overflow_safe(self):
        p = qbr(Game([[1000.0], [0.0]], [[0.0], [0.0]]), [1.0], 10.0)
        assert np.all(np.isfinite(p))
        np.testing.assert_allclose(p, [1.0, 0.0])

    def test_matches_oracle_and_positive(self, rng):
        for _ in range(100):
            g = random_game(rng)
            opp = rng.dirichlet(np.ones(g.m))
            lam = float(rng.uniform(0.1, 5))
            p = qbr(g, opp, lam)
            np.testing.assert_allclose(p, brute_qbr(g.u1.tolist(), opp.tolist(), lam), atol=1e-12)
            assert np.all(p > 0)

    def test_column_constant_shift(self, rng):
        for _ in range(50):
            g = random_game(rng)
            c = rng.normal(size=g.m)
            opp = rng.dirichlet(np.ones(g.m))
            shifted = Game(g.u1 + c[None, :], g.u2)
            np.testing.assert_allclose(qbr(shifted, opp, 1.5), qbr(g, opp, 1.5), atol=1e-12)

    @pytest.mark.parametrize("zeta", [0.5, 1.0, 5.0])
    def test_dominance_bound(self, rng, zeta):
        for _ in range(100):
            n = int(rng.integers(2, 5))
            g, a = gen_zeta_dominant(DominantGameFamily(n, int(rng.integers(1, 5)), zeta), rng)
            lam = float(rng.uniform(0.2, 3))
            p = qbr(g, rng.dirichlet(np.ones(g.m)), lam)
            assert p[a] >= qbr_bound(n, lam, zeta) - 1e-12

    def test_other_responsive_pair(self):
        g, g2 = proof_pair_other_responsive()
        opp = lambda game: maxmax(transpose_for_column(game))
        assert qbr(g, opp(g), 1.0)[0] > 0.5
        assert qbr(g2, opp(g2), 1.0)[0] < 0.5


class TestLevelDistribution:
    @pytest.mark.parametrize("rate, K", [(0.5, 2), (1.0, 4), (2.5, 6)])
    def test_poisson(self, rate, K):
        np.testing.assert_allclose(LevelDistribution.poisson(rate, K).probs(), brute_poisson(rate, K), atol=1e-12)

    def test_histogram(self):
        p = LevelDistribution.histogram([0.0, np.log(2.0), np.log(3.0)]).probs()
        np.testing.assert_allclose(p, [1 / 6, 2 / 6, 3 / 6], atol=1e-12)

    def test_bad(self):
        with pytest.raises(ValidationError):
            LevelDistribution.poisson(0.0)
        with pytest.raises(ValidationError):
            LevelDistribution.fixed([0.5, 0.6])


class TestQch:
    def test_point_mass_level0(self, rng):
        g = random_game(rng, 3, 2)
        model = QchModel(maxmax, 0.0, LevelDistribution.fixed([1.0]))
        rows, cols = qch_levels(g, model)
        assert len(rows) == 1
        np.testing.assert_array_equal(qch_predict(g, model), maxmax(g))

    def test_level1_is_qbr_to_level0(self, rng):
        g = random_game(rng, 3, 4)
        model = QchModel(uniform, np.log(2.0), LevelDistribution.fixed([0.5, 0.5]))
        rows, _ = qch_levels(g, model)
        np.testing.assert_allclose(rows[1], qbr(g, np.full(4, 0.25), 2.0), atol=1e-12)

    def test_level2_truncated_mixture(self, rng):
        g = random_game(rng, 2, 2)
        dist = np.array([0.2, 0.3, 0.5])
        model = QchModel(maxmax, np.log(1.7), LevelDistribution.fixed(dist))
        rows, cols = qch_levels(g, model)
        mix = (dist[0] * cols[0] + dist[1] * cols[1]) / (dist[0] + dist[1])
        np.testing.assert_allclose(rows[2], qbr(g, mix, 1.7), atol=1e-12)

    def test_matches_recursive_oracle(self, rng):
        for _ in range(50):
            g = random_game(rng)
            lam = float(rng.uniform(0.1, 4))
            levels = LevelDistribution.poisson(float(rng.uniform(0.3, 3)), int(rng.integers(1, 5)))
            model = QchModel(maxmax, np.log(lam), levels)
            ref = brute_qch(g.u1, g.u2, maxmax(g), maxmax(transpose_for_column(g)), lam, levels.probs().tolist())
            np.testing.assert_allclose(qch_predict(g, model), ref, atol=1e-12)

    def test_identical_levels(self, rng):
        # constant payoffs make every level uniform
        g = Game(np.ones((3, 3)), rng.normal(size=(3, 3)))
        model = QchModel(uniform, 0.0, LevelDistribution.poisson(1.0))
        np.testing.assert_allclose(qch_predict(g, model), np.full(3, 1 / 3), atol=1e-15)

    def test_convexity(self, rng):
        for _ in range(50):
            g = random_game(rng)
            model = QchModel(maxmax, np.log(3.0), LevelDistribution.histogram(rng.normal(size=4)))
            rows, _ = qch_levels(g, model)
            stack = np.stack(rows)
            p = qch_predict(g, model)
            assert np.all(p >= stack.min(axis=0) - 1e-12)
            assert np.all(p <= stack.max(axis=0) + 1e-12)

    def test_dominant_mode_large_precision(self, rng):
        for _ in range(20):
            g, a = gen_zeta_dominant(DominantGameFamily(3, 3, 1.0), rng)
            p = qch_predict(g, QchModel(uniform, np.log(20.0), LevelDistribution.poisson(1.5)))
            assert int(np.argmax(p)) == a
