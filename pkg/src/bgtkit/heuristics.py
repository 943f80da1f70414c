"""Parameter-free level-0 heuristics.

Each heuristic scores the row player's actions and returns the uniform
distribution over the best-scoring ones. Scores within ``TIE_ATOL`` of the best
count as tied.
"""

from __future__ import annotations

from enum import Enum
from typing import Callable

import numpy as np

from .errors import ValidationError
from .game import Game

TIE_ATOL = 1e-9
SYMMETRY_ATOL = 1e-9


class HeuristicKind(str, Enum):
    UNIFORM = "uniform"
    MAXMAX = "maxmax"
    MAXMIN = "maxmin"
    MINIMAX_REGRET = "minimax_regret"
    MAX_SYMMETRIC = "max_symmetric"
    MAXMAX_FAIRNESS = "maxmax_fairness"
    MAXMAX_WELFARE = "maxmax_welfare"


def _uniform_over_best(scores: np.ndarray) -> np.ndarray:
    best = scores >= scores.max() - TIE_ATOL
    return best / best.sum()


def uniform(game: Game) -> np.ndarray:
    return np.full(game.n, 1.0 / game.n)


def maxmax(game: Game) -> np.ndarray:
    return _uniform_over_best(game.u1.max(axis=1))


def maxmin(game: Game) -> np.ndarray:
    return _uniform_over_best(game.u1.min(axis=1))


def minimax_regret(game: Game) -> np.ndarray:
    regret = game.u1.max(axis=0, keepdims=True) - game.u1
    return _uniform_over_best(-regret.max(axis=1))


def is_symmetric(game: Game, atol: float = SYMMETRY_ATOL) -> bool:
    return game.n == game.m and np.allclose(game.u1, game.u2.T, rtol=0, atol=atol)


def max_symmetric(game: Game) -> np.ndarray:
    """Best action assuming the opponent mirrors it; uniform for asymmetric games."""
    if not is_symmetric(game):
        return uniform(game)
    return _uniform_over_best(np.diag(game.u1))


def maxmax_fairness(game: Game) -> np.ndarray:
    return _uniform_over_best(-np.abs(game.u1 - game.u2).min(axis=1))


def maxmax_welfare(game: Game) -> np.ndarray:
    return _uniform_over_best((game.u1 + game.u2).max(axis=1))


HEURISTICS: dict[HeuristicKind, Callable[[Game], np.ndarray]] = {
    HeuristicKind.UNIFORM: uniform,
    HeuristicKind.MAXMAX: maxmax,
    HeuristicKind.MAXMIN: maxmin,
    HeuristicKind.MINIMAX_REGRET: minimax_regret,
    HeuristicKind.MAX_SYMMETRIC: max_symmetric,
    HeuristicKind.MAXMAX_FAIRNESS: maxmax_fairness,
    HeuristicKind.MAXMAX_WELFARE: maxmax_welfare,
}


def get_heuristic(name: str) -> Callable[[Game], np.ndarray]:
    try:
        return HEURISTICS[HeuristicKind(name)]
    except ValueError:
        raise ValidationError(
            f"unknown heuristic {name!r}; choose from {[k.value for k in HeuristicKind]}"
        ) from None


def heuristic_batch(name: str, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """Apply a heuristic to a stack of (B, n, m) games, returning (B, n)."""
    fn = get_heuristic(name)
    return np.stack([fn(Game(a, b)) for a, b in zip(u1, u2)])
