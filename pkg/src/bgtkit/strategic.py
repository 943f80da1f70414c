"""Quantal best response and quantal cognitive hierarchy (QCH).

The ``*_graph`` builders work on batches inside the differentiation engine and
are what training uses. :func:`qbr`, :func:`qch_levels` and :func:`qch_predict`
wrap them for single games.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln

from . import autodiff as ad
from .errors import DimensionMismatch, ValidationError
from .game import Game, check_behavior, transpose_for_column

DEFAULT_MAX_LEVEL = 4


def poisson_levels_graph(log_rate, max_level: int) -> ad.Node:
    """Truncated Poisson over levels 0..K, renormalized.

    The ``exp(-rate)`` factor is common to every level and cancels.
    """
    k = np.arange(max_level + 1, dtype=float)
    return ad.softmax(ad.add(ad.mul(log_rate, k), -gammaln(k + 1)))


def histogram_levels_graph(logits) -> ad.Node:
    return ad.softmax(logits)


@dataclass
class LevelDistribution:
    """Distribution over reasoning levels 0..max_level.

    ``kind`` is ``"poisson"`` (uses ``log_rate``), ``"histogram"`` (uses
    ``logits``) or ``"fixed"`` (uses ``logits`` as literal probabilities).
    """

    kind: str
    max_level: int
    log_rate: float = 0.0
    logits: np.ndarray = field(default_factory=lambda: np.zeros(1))

    @classmethod
    def poisson(cls, rate: float, max_level: int = DEFAULT_MAX_LEVEL) -> "LevelDistribution":
        if rate <= 0:
            raise ValidationError("Poisson rate must be positive")
        return cls("poisson", max_level, log_rate=float(np.log(rate)))

    @classmethod
    def histogram(cls, logits) -> "LevelDistribution":
        logits = np.asarray(logits, dtype=float)
        return cls("histogram", logits.size - 1, logits=logits)

    @classmethod
    def fixed(cls, probs) -> "LevelDistribution":
        p = check_behavior(probs)
        return cls("fixed", p.size - 1, logits=p)

    def graph(self) -> ad.Node:
        if self.kind == "poisson":
            return poisson_levels_graph(ad.constant(self.log_rate), self.max_level)
        if self.kind == "histogram":
            return histogram_levels_graph(ad.constant(self.logits))
        if self.kind == "fixed":
            return ad.constant(self.logits)
        raise ValidationError(f"unknown level distribution kind {self.kind!r}")

    def probs(self) -> np.ndarray:
        return self.graph().value


def qbr_graph(u: ad.Node, opponent: ad.Node, precision: ad.Node) -> ad.Node:
    """Softmax over rows of ``precision * u @ opponent``; ``u`` is (B, n, m)."""
    return ad.softmax(ad.mul(precision, ad.matvec(u, opponent)))


def _truncated_mixture(levels_dist: ad.Node, behaviors: list[ad.Node]) -> ad.Node:
    k = len(behaviors)
    weights = ad.take(levels_dist, slice(0, k))
    total = ad.sum_(weights)
    if total.value <= 0.0:
        return behaviors[0]
    mixed = ad.mix(weights, ad.stack(behaviors, axis=1))
    return ad.div(mixed, total)


def qch_levels_graph(
    u1,
    u2,
    row0: ad.Node,
    col0: ad.Node,
    precision: ad.Node,
    levels_dist: ad.Node,
    all_column_levels: bool = False,
) -> tuple[list[ad.Node], list[ad.Node]]:
    """Per-level behaviors for both roles.

    ``u1``/``u2`` are (B, n, m) payoff arrays; ``row0``/``col0`` are level-0
    behaviors of the row player and of the column player (on the transposed game).
    The column player's top level is only needed for display, so it is skipped
    unless ``all_column_levels`` is set.
    """
    max_level = levels_dist.shape[0] - 1
    u_row = ad.constant(u1)
    u_col = ad.constant(np.asarray(u2).transpose(0, 2, 1))
    rows, cols = [row0], [col0]
    for k in range(1, max_level + 1):
        opp_col = _truncated_mixture(levels_dist, cols)
        opp_row = _truncated_mixture(levels_dist, rows)
        rows.append(qbr_graph(u_row, opp_col, precision))
        if k < max_level or all_column_levels:
            cols.append(qbr_graph(u_col, opp_row, precision))
    return rows, cols


def qch_graph(u1, u2, row0, col0, precision, levels_dist) -> ad.Node:
    rows, _ = qch_levels_graph(u1, u2, row0, col0, precision, levels_dist)
    if len(rows) == 1:
        return rows[0]
    return ad.mix(levels_dist, ad.stack(rows, axis=1))


# single-game API -----------------------------------------------------------------


def qbr(game: Game, opponent, precision: float) -> np.ndarray:
    """Logit quantal best response of the row player to a column behavior."""
    opp = np.asarray(opponent, dtype=float)
    if opp.shape != (game.m,):
        raise DimensionMismatch(f"opponent behavior has {opp.size} entries, game has {game.m} columns")
    if precision <= 0:
        raise ValidationError("precision must be positive")
    out = qbr_graph(ad.constant(game.u1[None]), ad.constant(opp[None]), ad.constant(precision))
    return out.value[0]


Level0 = Callable[[Game], np.ndarray]


@dataclass
class QchModel:
    level0: Level0
    log_precision: float
    levels: LevelDistribution

    @property
    def precision(self) -> float:
        return float(np.exp(self.log_precision))


def qch_levels(game: Game, model: QchModel) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Row-player and column-player behaviors at every level."""
    col_game = transpose_for_column(game)
    row0 = check_behavior(model.level0(game), game.n)
    col0 = check_behavior(model.level0(col_game), game.m)
    rows, cols = qch_levels_graph(
        game.u1[None],
        game.u2[None],
        ad.constant(row0[None]),
        ad.constant(col0[None]),
        ad.constant(model.precision),
        model.levels.graph(),
        all_column_levels=True,
    )
    return [r.value[0] for r in rows], [c.value[0] for c in cols]


def qch_predict(game: Game, model: QchModel) -> np.ndarray:
    rows, _ = qch_levels(game, model)
    dist = model.levels.probs()
    return np.einsum("k,kn->n", dist, np.stack(rows))
