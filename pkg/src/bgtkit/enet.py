"""ElementaryNet: a convex mix of response networks, each fed one potential matrix.

Each component squeezes the payoff pair of every outcome into a single scalar
(the potential) before any further computation, which is what keeps the model
from representing best-response reasoning.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ValidationError, ZeroCoefficients
from .game import Game, transpose_for_column
from .gamenet import FeatureLayerConfig, FeatureLayerParams, features_graph, init_params

FIXED_KINDS = ("own", "opp", "sum", "diff")
_FIXED_COEFFS = {"own": (1.0, 0.0), "opp": (0.0, 1.0), "sum": (1.0, 1.0), "diff": (1.0, -1.0)}
REPERTURB = 1e-6


@dataclass
class PotentialFunction:
    """``kind`` is ``"learned"`` (normalized ``theta``) or one of :data:`FIXED_KINDS`."""

    kind: str
    theta: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "learned":
            if self.theta is None:
                raise ValidationError("learned potential needs coefficients")
            self.theta = np.asarray(self.theta, dtype=float)
            if self.theta.shape != (2,):
                raise ValidationError("learned potential needs exactly two coefficients")
        elif self.kind not in FIXED_KINDS:
            raise ValidationError(f"unknown potential kind {self.kind!r}")

    @property
    def trainable(self) -> bool:
        return self.kind == "learned"

    def coefficients(self) -> tuple[float, float]:
        """Coefficients actually applied to (own, opponent) payoffs."""
        if self.kind == "learned":
            r = np.hypot(*self.theta)
            if r == 0.0:
                raise ZeroCoefficients("both potential coefficients are zero")
            return float(self.theta[0] / r), float(self.theta[1] / r)
        return _FIXED_COEFFS[self.kind]


def potential_matrix(game: Game, phi: PotentialFunction) -> np.ndarray:
    cx, cy = phi.coefficients()
    return cx * game.u1 + cy * game.u2


def potential_graph(kind: str, u1, u2, theta: ad.Node | None = None) -> ad.Node:
    """(B, 1, n, m) potential stack for one component."""
    if kind == "learned":
        if float(np.hypot(*theta.value)) == 0.0:
            raise ZeroCoefficients("both potential coefficients are zero")
        phi = ad.linear_potential(theta, ad.constant(u1), ad.constant(u2))
    else:
        cx, cy = _FIXED_COEFFS[kind]
        phi = ad.constant(cx * np.asarray(u1) + cy * np.asarray(u2))
    return ad.reshape(phi, (phi.shape[0], 1) + phi.shape[1:])


def guard_theta(theta: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
    """Nudge a (0, 0) coefficient pair off the origin."""
    if np.hypot(*theta) > 0.0:
        return theta
    rng = rng or np.random.default_rng(0)
    angle = rng.uniform(0, 2 * np.pi)
    return REPERTURB * np.array([np.cos(angle), np.sin(angle)])


@dataclass
class ElementaryNetModel:
    potentials: list[PotentialFunction]
    responses: list[FeatureLayerParams]
    config: FeatureLayerConfig
    mix: np.ndarray = field(default_factory=lambda: np.ones(1))

    def __post_init__(self):
        if len(self.potentials) != len(self.responses) or len(self.potentials) == 0:
            raise ValidationError("need one response network per potential")
        self.mix = np.asarray(self.mix, dtype=float)
        if self.mix.shape != (len(self.potentials),):
            raise ValidationError("mixing weights must have one entry per potential")
        if self.config.in_channels != 1:
            raise ValidationError("response networks take a single potential channel")


def response_config(widths, dropout: float = 0.0, l1: float = 0.0) -> FeatureLayerConfig:
    return FeatureLayerConfig(tuple(widths), dropout, l1, in_channels=1)


def random_theta(rng: np.random.Generator) -> np.ndarray:
    angle = rng.uniform(0, 2 * np.pi)
    return np.array([np.cos(angle), np.sin(angle)])


def make_model(
    kinds, config: FeatureLayerConfig, rng: np.random.Generator
) -> ElementaryNetModel:
    potentials = [
        PotentialFunction("learned", random_theta(rng)) if k == "learned" else PotentialFunction(k)
        for k in kinds
    ]
    responses = [init_params(config, rng) for _ in potentials]
    return ElementaryNetModel(potentials, responses, config, np.full(len(kinds), 1.0 / len(kinds)))


def make_fixed_potential_model(
    config: FeatureLayerConfig, rng: np.random.Generator | None = None
) -> ElementaryNetModel:
    """Four fixed potentials (own, opp, sum, diff) with fresh responses, equal weights."""
    return make_model(FIXED_KINDS, config, rng or np.random.default_rng())


def enet_graph(
    u1,
    u2,
    kinds: list[str],
    thetas: list[ad.Node | None],
    responses: list[tuple[list[tuple[ad.Node, ad.Node]], ad.Node]],
    mix: ad.Node,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
) -> ad.Node:
    outputs = []
    for kind, theta, (layers, out_mix) in zip(kinds, thetas, responses):
        phi = potential_graph(kind, u1, u2, theta)
        outputs.append(features_graph(phi, layers, out_mix, dropout, rng))
    return ad.mix(mix, ad.stack(outputs, axis=1))


def enet_forward(
    game: Game,
    model: ElementaryNetModel,
    training: bool = False,
    rng: np.random.Generator | None = None,
    role: str = "row",
    components: bool = False,
):
    """Predicted behavior; with ``components`` also each response's own output."""
    if role == "column":
        game = transpose_for_column(game)
    dropout = model.config.dropout if training else 0.0
    if dropout > 0 and rng is None:
        rng = np.random.default_rng()
    kinds = [p.kind for p in model.potentials]
    thetas = [ad.constant(p.theta) if p.trainable else None for p in model.potentials]
    responses = [
        ([(ad.constant(w), ad.constant(b)) for w, b in zip(r.weights, r.biases)], ad.constant(r.mix))
        for r in model.responses
    ]
    outputs = []
    for kind, theta, (layers, out_mix) in zip(kinds, thetas, responses):
        phi = potential_graph(kind, game.u1[None], game.u2[None], theta)
        outputs.append(features_graph(phi, layers, out_mix, dropout, rng).value[0])
    total = np.einsum("p,pn->n", model.mix, np.stack(outputs))
    return (total, outputs) if components else total
