"""Synthetic datasets: sample games, then multinomial play from a known teacher model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .game import Game, dataset_document, standardize, transpose_for_column
from .models import ComposedModel, ModelSpec

PAYOFF_DISTRIBUTIONS = ("normal", "uniform_int")


@dataclass
class SynthSpec:
    model: ModelSpec = field(default_factory=ModelSpec)
    games: int = 50
    n: int = 3
    m: int = 3
    observations: int = 500
    payoffs: str = "normal"
    roles: tuple[str, ...] = ("row",)
    precision: float | None = None
    poisson_rate: float | None = None
    level_logits: list[float] | None = None
    potential_weights: list[float] | None = None
    weight_scale: float = 1.0
    source: str = "synthetic"

    def __post_init__(self):
        if isinstance(self.model, dict):
            self.model = ModelSpec.from_dict(self.model)
        self.roles = tuple(self.roles)
        if self.observations < 1:
            raise ValidationError("need at least one observation per game")
        if self.games < 1 or self.n < 1 or self.m < 1:
            raise ValidationError("games, n and m must be positive")
        if self.payoffs not in PAYOFF_DISTRIBUTIONS:
            raise ValidationError(f"payoffs must be one of {PAYOFF_DISTRIBUTIONS}")
        if not self.roles or set(self.roles) - {"row", "column"}:
            raise ValidationError("roles must be a non-empty subset of row, column")

    @classmethod
    def from_dict(cls, doc: dict) -> "SynthSpec":
        extra = set(doc) - set(cls.__dataclass_fields__)
        if extra:
            raise ValidationError(f"unknown synth fields {sorted(extra)}")
        return cls(**doc)


def build_teacher(spec: SynthSpec, rng: np.random.Generator) -> ComposedModel:
    teacher = ComposedModel.initialize(spec.model, rng)
    ps = teacher.params
    wanted = {
        "qch.log_precision": spec.precision,
        "qch.log_rate": spec.poisson_rate,
        "qch.logits": spec.level_logits,
        "l0.mix": spec.potential_weights,
    }
    for key, value in wanted.items():
        if value is not None and key not in ps:
            raise ValidationError(f"teacher model {spec.model.label} has no parameter {key}")
    if spec.precision is not None:
        ps["qch.log_precision"] = np.log(spec.precision)
    if spec.poisson_rate is not None:
        ps["qch.log_rate"] = np.log(spec.poisson_rate)
    if spec.level_logits is not None:
        ps["qch.logits"] = spec.level_logits
    if spec.potential_weights is not None:
        ps["l0.mix"] = spec.potential_weights
    if spec.weight_scale != 1.0:
        for k in ps:
            if ps.meta(k).l1:
                ps[k] = ps[k] * spec.weight_scale
    ps.check()
    return teacher


def sample_game(rng: np.random.Generator, n: int, m: int, payoffs: str = "normal") -> Game:
    """A random game, standardized; resampled until it is non-degenerate."""
    while True:
        if payoffs == "normal":
            raw = rng.normal(size=(2, n, m))
        else:
            raw = rng.integers(0, 101, size=(2, n, m)).astype(float)
        if raw.std() > 0:
            return standardize(Game(raw[0], raw[1]))


def generate(spec: SynthSpec, seed: int) -> tuple[dict, ComposedModel]:
    """Dataset document plus the teacher that generated it."""
    rng = np.random.default_rng(seed)
    teacher = build_teacher(spec, rng)
    records = []
    for g in range(spec.games):
        game = sample_game(rng, spec.n, spec.m, spec.payoffs)
        for role in spec.roles:
            view = game if role == "row" else transpose_for_column(game)
            probs = teacher.predict(view)
            probs = np.clip(probs, 0.0, None)
            counts = rng.multinomial(spec.observations, probs / probs.sum())
            records.append(
                {
                    "game_id": f"g{g:04d}",
                    "role": role,
                    "u1": game.u1.tolist(),
                    "u2": game.u2.tolist(),
                    "counts": counts.tolist(),
                    "source": spec.source,
                }
            )
    return dataset_document(records), teacher
