"""GameNet's permutation-equivariant feature layers used as a level-0 model.

Also builds the explicit parameter setting under which a three-layer network
computes the row player's quantal best response (precision 1) to the column
player's maxmax action.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import BadConstants, ShapeMismatch, ValidationError
from .game import Game, transpose_for_column


@dataclass(frozen=True)
class FeatureLayerConfig:
    widths: tuple[int, ...]
    dropout: float = 0.0
    l1: float = 0.0
    in_channels: int = 2

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if not self.widths or min(self.widths) < 1:
            raise ValidationError(f"need at least one layer of positive width, got {self.widths}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValidationError("dropout must lie in [0, 1)")
        if self.l1 < 0:
            raise ValidationError("L1 coefficient must be non-negative")


@dataclass
class FeatureLayerParams:
    weights: list[np.ndarray]  # layer l: (C_l, 3 C_{l-1})
    biases: list[np.ndarray]  # layer l: (C_l,)
    mix: np.ndarray = field(default_factory=lambda: np.ones(1))  # (C_L,), on the simplex

    def to_flat(self, prefix: str = "") -> dict[str, np.ndarray]:
        flat = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            flat[f"{prefix}W{i}"] = w
            flat[f"{prefix}b{i}"] = b
        flat[f"{prefix}mix"] = self.mix
        return flat

    @classmethod
    def from_flat(cls, flat, n_layers: int, prefix: str = "") -> "FeatureLayerParams":
        return cls(
            [np.asarray(flat[f"{prefix}W{i}"]) for i in range(n_layers)],
            [np.asarray(flat[f"{prefix}b{i}"]) for i in range(n_layers)],
            np.asarray(flat[f"{prefix}mix"]),
        )


def init_params(config: FeatureLayerConfig, rng: np.random.Generator) -> FeatureLayerParams:
    """Gaussian weights with std 1/sqrt(fan-in), zero biases, uniform output mix."""
    weights, biases = [], []
    prev = config.in_channels
    for width in config.widths:
        weights.append(rng.normal(0.0, 1.0 / np.sqrt(3 * prev), size=(width, 3 * prev)))
        biases.append(np.zeros(width))
        prev = width
    return FeatureLayerParams(weights, biases, np.full(prev, 1.0 / prev))


def pool(channels: ad.Node) -> ad.Node:
    """Identity, row-max and column-max copies of a (B, C, n, m) stack, in that order."""
    return ad.concat([channels, ad.rowmax(channels), ad.colmax(channels)], axis=1)


def pool_list(channels: list) -> list[np.ndarray]:
    """List version of :func:`pool` for single matrices."""
    mats = [np.asarray(c, dtype=float) for c in channels]
    if not mats:
        raise ShapeMismatch("need at least one channel")
    if len({m.shape for m in mats}) != 1 or mats[0].ndim != 2:
        raise ShapeMismatch("channels must be matrices of one shape")
    pooled = pool(ad.constant(np.stack(mats)[None]))
    return list(pooled.value[0])


def features_graph(
    inputs: ad.Node,
    layers: list[tuple[ad.Node, ad.Node]],
    mix: ad.Node,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
) -> ad.Node:
    """Feature layers on a (B, C0, n, m) stack, returning (B, n) row behaviors."""
    hidden = inputs
    for w, b in layers:
        if w.shape[1] != 3 * hidden.shape[1]:
            raise ShapeMismatch(
                f"layer expects {w.shape[1] // 3} input channels, got {hidden.shape[1]}"
            )
        hidden = ad.relu(ad.channel_mix(w, pool(hidden), b))
        if dropout > 0.0 and rng is not None:
            # whole channels are dropped per game; inverted scaling keeps the mean
            keep = rng.random((hidden.shape[0], hidden.shape[1], 1, 1)) >= dropout
            hidden = ad.mul(hidden, keep / (1.0 - dropout))
    per_channel = ad.softmax(ad.rowsum(hidden))
    return ad.mix(mix, per_channel)


def gamenet_graph(u1, u2, nodes: dict, prefix: str, n_layers: int, dropout=0.0, rng=None) -> ad.Node:
    inputs = ad.constant(np.stack([u1, u2], axis=1))
    layers = [(nodes[f"{prefix}W{i}"], nodes[f"{prefix}b{i}"]) for i in range(n_layers)]
    return features_graph(inputs, layers, nodes[f"{prefix}mix"], dropout, rng)


def feature_forward(
    game: Game,
    params: FeatureLayerParams,
    config: FeatureLayerConfig | None = None,
    training: bool = False,
    rng: np.random.Generator | None = None,
    role: str = "row",
) -> np.ndarray:
    """Predicted behavior of one player in one game."""
    if role == "column":
        game = transpose_for_column(game)
    dropout = config.dropout if (config is not None and training) else 0.0
    if dropout > 0 and rng is None:
        rng = np.random.default_rng()
    inputs = ad.constant(np.stack([game.u1, game.u2])[None])
    layers = [(ad.constant(w), ad.constant(b)) for w, b in zip(params.weights, params.biases)]
    return features_graph(inputs, layers, ad.constant(params.mix), dropout, rng).value[0]


def build_theorem31_certificate(
    c_max: float, c_gap: float, allow_negative: bool = False
) -> tuple[FeatureLayerParams, FeatureLayerConfig]:
    """Weights for a (2, 2, 1) network computing QBR(maxmax of column player; 1).

    Pooled channel order per layer is identity, row-max, column-max, so with two
    input channels index 1 is U2's column max (0-based). Valid on games whose
    payoffs lie in (0, c_max] (or [-c_max, c_max] with ``allow_negative``) and
    differ pairwise by at least ``c_gap``.
    """
    if not (c_max > 0 and c_gap > 0):
        raise BadConstants(f"constants must be positive, got c_max={c_max}, c_gap={c_gap}")
    w1, b1 = np.zeros((2, 6)), np.zeros(2)
    w2, b2 = np.zeros((2, 6)), np.zeros(2)
    w3, b3 = np.zeros((1, 6)), np.zeros(1)

    w1[0, 0] = 1.0  # H1_1 = U1
    w1[1, 5] = 1.0  # H1_2 = colmax(U2)
    w2[0, 0] = 1.0  # H2_1 = H1_1
    w2[1, 1] = 1.0 / c_gap  # H2_2 = 1 in the maxmax column, 0 elsewhere
    w2[1, 3] = -1.0 / c_gap
    b2[1] = 1.0
    w3[0, 0] = 1.0
    if allow_negative:
        b1[:] = c_max
        w3[0, 1] = 2.0 * c_max
        b3[0] = -2.0 * c_max
    else:
        w3[0, 1] = c_max
        b3[0] = -c_max
    params = FeatureLayerParams([w1, w2, w3], [b1, b2, b3], np.ones(1))
    return params, FeatureLayerConfig((2, 2, 1))
