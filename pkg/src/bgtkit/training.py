"""Loss, constrained Adam training, hyperparameter sweeps and split replication."""

from __future__ import annotations

import itertools
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .enet import guard_theta
from .errors import DimensionMismatch, EmptySplit, NonFiniteLoss, ValidationError
from .game import Dataset, GameBatch, Observation, make_batches, random_split
from .models import ComposedModel, ModelSpec, ParameterSet

log = logging.getLogger(__name__)

PAPER_EPOCHS = 50_000
DESK_EPOCHS = 5_000

# L1 and dropout values per family; every combination runs `replicates` times
GRIDS = {
    "enet": {"l1": [1e-4, 1e-5, 1e-6], "dropout": [0.0, 0.01, 0.02, 0.05], "replicates": 2},
    "gamenet": {"l1": [1e-3, 1e-4, 1e-5], "dropout": [0.0, 0.01, 0.02, 0.05, 0.1], "replicates": 2},
}


@dataclass
class TrainConfig:
    lr: float = 3e-4
    epochs: int = DESK_EPOCHS
    l1: float = 0.0
    dropout: float = 0.0
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr <= 0:
            raise ValidationError("learning rate must be positive")
        if self.epochs < 0:
            raise ValidationError("epochs must be non-negative")
        if self.l1 < 0:
            raise ValidationError("L1 coefficient must be non-negative")
        if not 0.0 <= self.dropout < 1.0:
            raise ValidationError("dropout must lie in [0, 1)")

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        extra = set(doc) - set(cls.__dataclass_fields__)
        if extra:
            raise ValidationError(f"unknown training options {sorted(extra)}")
        return cls(**doc)


@dataclass
class TrainResult:
    spec: ModelSpec
    config: TrainConfig
    params: ParameterSet
    loss_trace: list[float]
    train_loss: float
    val_loss: float | None
    test_loss: float | None
    split_id: int | None = None
    sweep: list[dict] = field(default_factory=list)

    @property
    def model(self) -> ComposedModel:
        return ComposedModel(self.spec, self.params)

    def to_dict(self) -> dict:
        return {
            "model": self.spec.label,
            "spec": self.spec.to_dict(),
            "config": asdict(self.config),
            "params": self.params.to_dict(),
            "loss_trace": list(self.loss_trace),
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
            "test_loss": self.test_loss,
            "split_id": self.split_id,
            "summary": self.model.summary(),
            "sweep": self.sweep,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainResult":
        return cls(
            spec=ModelSpec.from_dict(doc["spec"]),
            config=TrainConfig.from_dict(doc["config"]),
            params=ParameterSet.from_dict(doc["params"]),
            loss_trace=list(doc.get("loss_trace", [])),
            train_loss=doc["train_loss"],
            val_loss=doc.get("val_loss"),
            test_loss=doc.get("test_loss"),
            split_id=doc.get("split_id"),
            sweep=list(doc.get("sweep", [])),
        )


# losses -------------------------------------------------------------------------


def l2_loss(pred, empirical) -> float:
    p, e = np.asarray(pred, float), np.asarray(empirical, float)
    if p.shape != e.shape:
        raise DimensionMismatch(f"prediction {p.shape} vs empirical {e.shape}")
    return float(np.sum((p - e) ** 2))


def _batch_loss_graph(model, batch: GameBatch, nodes, dropout=0.0, rng=None, u_col=None) -> ad.Node:
    """Sum over games of observation-count times squared error."""
    pred = model.graph(batch.u1, batch.u2, nodes, dropout, rng, u_col)
    per_game = ad.sum_(ad.square(ad.sub(pred, batch.empirical)), axis=-1)
    return ad.sum_(ad.mul(per_game, batch.counts))


def loss_graph(model, batches, nodes, dropout=0.0, rng=None, transposes=None) -> ad.Node:
    total_obs = sum(float(b.counts.sum()) for b in batches)
    terms = [
        _batch_loss_graph(model, b, nodes, dropout, rng, None if transposes is None else transposes[i])
        for i, b in enumerate(batches)
    ]
    total = terms[0]
    for t in terms[1:]:
        total = ad.add(total, t)
    return ad.div(total, total_obs)


def dataset_loss(model: ComposedModel, observations: Sequence[Observation]) -> float:
    """Observation-weighted mean squared L2 error over a split."""
    if not observations:
        raise EmptySplit("cannot evaluate an empty split")
    return float(loss_graph(model, make_batches(observations), model.constants()).value)


def l1_penalty_graph(params: ParameterSet, nodes, coefficient: float) -> ad.Node | None:
    terms = [ad.sum_(ad.abs_(nodes[k])) for k in params if params.meta(k).l1]
    if coefficient == 0.0 or not terms:
        return None
    total = terms[0]
    for t in terms[1:]:
        total = ad.add(total, t)
    return ad.mul(total, coefficient)


# simplex projection and optimizer -----------------------------------------------------


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort and threshold)."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValidationError("project_simplex needs a non-empty vector")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ranks = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ranks > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


class Adam:
    def __init__(self, params: ParameterSet, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(params[k]) for k in params}
        self.v = {k: np.zeros_like(params[k]) for k in params}
        self.t = 0

    def step(self, params: ParameterSet, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k in params:
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            update = self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)
            params[k] = params[k] - update


def enforce_constraints(params: ParameterSet) -> None:
    for k in params:
        meta = params.meta(k)
        if meta.constraint == "simplex":
            params[k] = project_simplex(meta.value)
        elif k.endswith(".theta"):
            params[k] = guard_theta(meta.value)


# training ----------------------------------------------------------------------------


def _objective(model, batches, nodes, config, rng, transposes):
    data = loss_graph(model, batches, nodes, config.dropout, rng, transposes)
    penalty = l1_penalty_graph(model.params, nodes, config.l1)
    return data if penalty is None else ad.add(data, penalty)


def fit(model: ComposedModel, train_obs: Sequence[Observation], config: TrainConfig, rng) -> list[float]:
    """Full-batch Adam on ``model.params`` in place; returns the objective trace.

    The trace holds the objective before each step plus the final value, so it
    has ``epochs + 1`` entries.
    """
    if not train_obs:
        raise EmptySplit("training split is empty")
    batches = make_batches(train_obs)
    transposes = [tuple(np.ascontiguousarray(a) for a in b.transposed) for b in batches]
    params = model.params
    enforce_constraints(params)
    opt = Adam(params, config.lr, config.beta1, config.beta2, config.eps)
    trace = []
    for epoch in range(config.epochs + 1):
        nodes = model.variables()
        obj = _objective(model, batches, nodes, config, rng, transposes)
        value = float(obj.value)
        if not np.isfinite(value):
            raise NonFiniteLoss(f"objective became {value} at epoch {epoch} ({model.spec.label})")
        trace.append(value)
        if epoch == config.epochs:
            break
        grads = ad.gradients(obj, nodes)
        opt.step(params, grads)
        enforce_constraints(params)
    return trace


def train(
    spec: ModelSpec,
    dataset: Dataset,
    config: TrainConfig | None = None,
    split_id: int | None = None,
) -> TrainResult:
    """Train on the dataset's train split and score the validation and test splits."""
    config = config or TrainConfig()
    rng = np.random.default_rng(config.seed)
    model = ComposedModel.initialize(spec, rng)
    train_obs = dataset.split("train")
    trace = fit(model, train_obs, config, rng)
    if config.epochs > 0 and trace[-1] > trace[0]:
        log.warning("%s: final training objective %.6g exceeds initial %.6g", spec.label, trace[-1], trace[0])
    val_obs, test_obs = dataset.split("val"), dataset.split("test")
    return TrainResult(
        spec=spec,
        config=config,
        params=model.params,
        loss_trace=trace,
        train_loss=dataset_loss(model, train_obs),
        val_loss=dataset_loss(model, val_obs) if val_obs else None,
        test_loss=dataset_loss(model, test_obs) if test_obs else None,
        split_id=split_id,
    )


def grid_configs(grid: dict, base: TrainConfig) -> list[TrainConfig]:
    """One config per (L1, dropout, replicate), each with its own derived seed."""
    combos = list(itertools.product(grid["l1"], grid["dropout"], range(grid.get("replicates", 1))))
    if not combos:
        raise ValidationError("hyperparameter grid is empty")
    seeds = np.random.SeedSequence(base.seed).generate_state(len(combos))
    return [
        replace(base, l1=float(l1), dropout=float(dr), seed=int(s))
        for (l1, dr, _), s in zip(combos, seeds)
    ]


def select_best(results: Sequence[TrainResult]) -> TrainResult:
    """Lowest validation loss; the first one wins ties."""
    best = results[0]
    for r in results[1:]:
        if r.val_loss < best.val_loss:
            best = r
    return best


def _run_all(fn, jobs_args, jobs: int):
    if jobs == 1 or len(jobs_args) <= 1:
        return [fn(*a) for a in jobs_args]
    from joblib import Parallel, delayed

    return Parallel(n_jobs=jobs)(delayed(fn)(*a) for a in jobs_args)


def sweep(
    spec: ModelSpec,
    dataset: Dataset,
    grid: dict | str,
    base: TrainConfig | None = None,
    split_id: int | None = None,
    jobs: int = 1,
) -> TrainResult:
    """Train every grid configuration and keep the best on validation loss."""
    grid = GRIDS[grid] if isinstance(grid, str) else grid
    configs = grid_configs(grid, base or TrainConfig())
    if not dataset.split("val"):
        raise EmptySplit("sweeps select on the validation split, which is empty")
    results = _run_all(train, [(spec, dataset, c, split_id) for c in configs], jobs)
    best = select_best(results)
    best.sweep = [
        {"l1": r.config.l1, "dropout": r.config.dropout, "seed": r.config.seed, "val_loss": r.val_loss}
        for r in results
    ]
    return best


def replicate_splits(
    spec: ModelSpec,
    dataset: Dataset,
    n_splits: int,
    split_seed: int = 0,
    config: TrainConfig | None = None,
    grid: dict | str | None = None,
    fractions=(0.6, 0.2, 0.2),
    jobs: int = 1,
) -> list[TrainResult]:
    """Train (or sweep) once per random game split; split ``i`` uses seed ``split_seed + i``."""
    config = config or TrainConfig()
    out = []
    for i in range(n_splits):
        ds = dataset.with_splits(random_split(dataset.game_ids(), split_seed + i, fractions))
        cfg = replace(config, seed=config.seed + i)
        if grid is None:
            out.append(train(spec, ds, cfg, split_id=split_seed + i))
        else:
            out.append(sweep(spec, ds, grid, cfg, split_id=split_seed + i, jobs=jobs))
    return out
