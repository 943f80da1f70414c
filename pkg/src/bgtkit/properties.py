"""Numerical witnesses for (non-)strategic behavior of behavioral models.

A "model" here is any callable mapping a :class:`Game` to a row-player behavior.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ValidationError
from .game import Game, transpose_for_column
from .gamenet import build_theorem31_certificate, feature_forward
from .heuristics import maxmax
from .strategic import qbr

log = logging.getLogger(__name__)

Model = Callable[[Game], np.ndarray]
PROBE_ATOL = 1e-9


@dataclass(frozen=True)
class DominantGameFamily:
    n: int
    m: int
    zeta: float
    seed: int = 0

    def __post_init__(self):
        if self.zeta <= 0:
            raise ValidationError("dominance margin must be positive")
        if self.n < 1 or self.m < 1:
            raise ValidationError("action counts must be positive")


def gen_zeta_dominant(family: DominantGameFamily, rng: np.random.Generator | None = None) -> tuple[Game, int]:
    """A random game in which one random row beats every other row by more than zeta."""
    rng = rng if rng is not None else np.random.default_rng(family.seed)
    u1 = rng.normal(size=(family.n, family.m))
    dominant = int(rng.integers(family.n))
    others = np.delete(u1, dominant, axis=0)
    if others.size:
        u1[dominant] = others.max(axis=0) + family.zeta + rng.uniform(0.01, 1.0, size=family.m)
    u2 = rng.normal(size=(family.n, family.m))
    return Game(u1, u2), dominant


def is_zeta_dominant(game: Game, action: int, zeta: float) -> bool:
    """Brute-force check over every (alternative row, column) pair."""
    for other in range(game.n):
        if other == action:
            continue
        for col in range(game.m):
            if not game.u1[action, col] > game.u1[other, col] + zeta:
                return False
    return True


def qbr_bound(n: int, precision: float, zeta: float) -> float:
    """Lower bound on QBR's probability of a zeta-dominant action."""
    return 1.0 / (1.0 + (n - 1) * np.exp(-precision * zeta))


def dominance_response_curve(
    model: Model,
    shape: tuple[int, int],
    zetas: Sequence[float],
    trials: int = 100,
    seed: int = 0,
    extra_games: Callable[[float], list[tuple[Game, int]]] | None = None,
) -> np.ndarray:
    """Smallest probability the model puts on the dominant action, per margin.

    ``extra_games`` may add adversarial (game, dominant row) pairs for each margin.
    """
    if list(zetas) != sorted(zetas):
        raise ValidationError("zetas must be ascending")
    rng = np.random.default_rng(seed)
    curve = []
    for zeta in zetas:
        family = DominantGameFamily(shape[0], shape[1], zeta, seed)
        cases = [gen_zeta_dominant(family, rng) for _ in range(trials)]
        if extra_games is not None:
            cases.extend(extra_games(zeta))
        curve.append(min(float(model(g)[a]) for g, a in cases))
    return np.array(curve)


def proof_pair_other_responsive() -> tuple[Game, Game]:
    """Two games with identical row payoffs where the column player's dominant action flips."""
    u1 = [[1.0, 0.0], [0.0, 1.0]]
    return Game(u1, [[1.0, 0.0], [1.0, 0.0]]), Game(u1, [[0.0, 1.0], [0.0, 1.0]])


def other_responsiveness_probe(
    model: Model, trials: int = 20, seed: int = 0, atol: float = PROBE_ATOL
) -> tuple[bool, list[tuple[Game, Game]]]:
    """Does changing only the opponent's payoffs ever change the model's output?"""
    pairs = [proof_pair_other_responsive()]
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        n, m = rng.integers(2, 5, size=2)
        u1 = rng.normal(size=(n, m))
        pairs.append((Game(u1, rng.normal(size=(n, m))), Game(u1, rng.normal(size=(n, m)))))
    witnesses = [
        (g, h) for g, h in pairs if np.max(np.abs(np.asarray(model(g)) - np.asarray(model(h)))) > atol
    ]
    return bool(witnesses), witnesses


def noncoding_points(theta: Sequence[float], b: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Points (0, 0), (2b, -2b tx/ty) and (2b ty/tx, -2b) sharing one potential value."""
    tx, ty = float(theta[0]), float(theta[1])
    if tx == 0.0 or ty == 0.0:
        raise ValidationError("the construction needs both coefficients nonzero")
    return (
        np.zeros(2),
        np.array([2 * b, -2 * b * tx / ty]),
        np.array([2 * b * ty / tx, -2 * b]),
    )


def bottleneck_pair(theta: Sequence[float], b: float) -> tuple[Game, Game]:
    """2x2 games G = [x, x; x', x'] and G' = [x', x'; x, x] with equal potential matrices.

    Row 2 (index 1) beats row 1 by 2b in G; the roles flip in G'.
    """
    x, x_far, _ = noncoding_points(theta, b)

    def game(top, bottom):
        return Game([[top[0]] * 2, [bottom[0]] * 2], [[top[1]] * 2, [bottom[1]] * 2])

    return game(x, x_far), game(x_far, x)


def bottleneck_games(theta: Sequence[float]) -> Callable[[float], list[tuple[Game, int]]]:
    """``extra_games`` hook for :func:`dominance_response_curve`."""

    def make(zeta: float):
        g, g2 = bottleneck_pair(theta, zeta)  # margin 2 zeta > zeta
        return [(g, 1), (g2, 0)]

    return make


def maxmax_column(game: Game) -> np.ndarray:
    return maxmax(transpose_for_column(game))


def qbr_to_maxmax(game: Game) -> np.ndarray:
    return qbr(game, maxmax_column(game), 1.0)


def sample_gap_game(
    rng: np.random.Generator, c_max: float, c_gap: float, negative: bool, shape=None
) -> Game:
    """Rejection-sample a game with payoffs in (0, c_max] (or [-c_max, c_max]) and pairwise gaps >= c_gap."""
    while True:
        n, m = shape if shape is not None else rng.integers(1, 5, size=2)
        lo = -c_max if negative else 0.0
        vals = rng.uniform(lo, c_max, size=2 * n * m)
        if not negative:
            vals = c_max - vals  # (0, c_max]
        srt = np.sort(vals)
        if srt.size < 2 or np.min(np.diff(srt)) >= c_gap:
            return Game(vals[: n * m].reshape(n, m), vals[n * m :].reshape(n, m))


def theorem31_emulation_check(
    trials: int, c_max: float, c_gap: float, negative: bool = False, seed: int = 0
) -> float:
    """Largest gap between the constructed feature network and QBR-to-maxmax."""
    params, config = build_theorem31_certificate(c_max, c_gap, negative)
    if trials == 0:
        log.warning("no trials requested; deviation is 0 by convention")
        return 0.0
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        game = sample_gap_game(rng, c_max, c_gap, negative)
        out = feature_forward(game, params, config)
        worst = max(worst, float(np.max(np.abs(out - qbr_to_maxmax(game)))))
    return worst
