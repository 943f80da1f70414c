"""Two-player normal-form games, observations, datasets and their preprocessing.

Every model in the package predicts for the row player only; observations of the
column player are converted with :func:`transpose_for_column` at ingestion time.
"""

from __future__ import annotations

import json
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    BadPermutation,
    DegenerateGame,
    DimensionMismatch,
    EmptyObservation,
    ValidationError,
)

BEHAVIOR_ATOL = 1e-9
SPLIT_LABELS = ("train", "val", "test")
DEFAULT_FRACTIONS = (0.6, 0.2, 0.2)


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Game:
    """Payoff matrices ``u1`` (row player) and ``u2`` (column player), both n x m."""

    u1: np.ndarray
    u2: np.ndarray

    def __post_init__(self):
        u1 = _frozen(self.u1)
        u2 = _frozen(self.u2)
        if u1.ndim != 2 or u2.ndim != 2:
            raise ValidationError("utility matrices must be 2-dimensional")
        if u1.shape != u2.shape:
            raise DimensionMismatch(f"u1 shape {u1.shape} != u2 shape {u2.shape}")
        if u1.shape[0] < 1 or u1.shape[1] < 1:
            raise ValidationError("games need at least one action per player")
        if not (np.all(np.isfinite(u1)) and np.all(np.isfinite(u2))):
            raise ValidationError("payoffs must be finite")
        object.__setattr__(self, "u1", u1)
        object.__setattr__(self, "u2", u2)

    @property
    def n(self) -> int:
        return self.u1.shape[0]

    @property
    def m(self) -> int:
        return self.u1.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.u1.shape

    def allclose(self, other: "Game", atol: float = 1e-9) -> bool:
        return (
            self.shape == other.shape
            and np.allclose(self.u1, other.u1, rtol=0, atol=atol)
            and np.allclose(self.u2, other.u2, rtol=0, atol=atol)
        )

    def to_dict(self) -> dict:
        return {"u1": self.u1.tolist(), "u2": self.u2.tolist()}


def check_behavior(probs, n: int | None = None, atol: float = BEHAVIOR_ATOL) -> np.ndarray:
    """Validate a probability vector and return it as a float array."""
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValidationError("a behavior is a non-empty vector")
    if n is not None and p.size != n:
        raise ValidationError(f"behavior has {p.size} entries, expected {n}")
    if np.any(p < -atol) or np.any(p > 1 + atol) or abs(p.sum() - 1.0) > atol:
        raise ValidationError(f"not a probability vector: {p}")
    return p


def standardize(game: Game, pooled: bool = True) -> Game:
    """Shift and scale payoffs to zero mean and unit population standard deviation.

    With ``pooled`` (the default) both matrices share one mean and scale, which
    keeps cross-player quantities such as ``u1 - u2`` comparable. Otherwise each
    matrix is standardized on its own.
    """
    if pooled:
        entries = np.concatenate([game.u1.ravel(), game.u2.ravel()])
        mu, sd = entries.mean(), entries.std()
        if sd == 0.0:
            raise DegenerateGame("all payoffs are equal")
        return Game((game.u1 - mu) / sd, (game.u2 - mu) / sd)
    out = []
    for u in (game.u1, game.u2):
        sd = u.std()
        if sd == 0.0:
            raise DegenerateGame("a payoff matrix is constant")
        out.append((u - u.mean()) / sd)
    return Game(*out)


def transpose_for_column(game: Game) -> Game:
    """View the game from the column player's seat: (u2^T, u1^T)."""
    return Game(game.u2.T, game.u1.T)


def _check_perm(perm, size: int) -> np.ndarray:
    p = np.asarray(perm)
    if p.shape != (size,) or not np.issubdtype(p.dtype, np.integer):
        raise BadPermutation(f"expected an integer permutation of length {size}")
    if not np.array_equal(np.sort(p), np.arange(size)):
        raise BadPermutation(f"{p.tolist()} is not a bijection on 0..{size - 1}")
    return p


def permute(game: Game, row_perm, col_perm) -> Game:
    """Reorder actions; output row ``i`` is input row ``row_perm[i]`` (0-based)."""
    r = _check_perm(row_perm, game.n)
    c = _check_perm(col_perm, game.m)
    return Game(game.u1[np.ix_(r, c)], game.u2[np.ix_(r, c)])


def inverse_permutation(perm) -> np.ndarray:
    p = np.asarray(perm)
    inv = np.empty_like(p)
    inv[p] = np.arange(p.size)
    return inv


@dataclass(frozen=True, eq=False)
class Observation:
    """Action counts of subjects playing the row role of ``game``."""

    game: Game
    counts: np.ndarray
    source_tag: str = ""
    game_id: str = ""

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.shape != (self.game.n,):
            raise DimensionMismatch(
                f"game {self.game_id!r}: counts length {counts.size} != {self.game.n} actions"
            )
        if np.any(counts < 0) or not np.all(np.equal(np.mod(counts, 1), 0)):
            raise ValidationError(f"game {self.game_id!r}: counts must be non-negative integers")
        if counts.sum() < 1:
            raise EmptyObservation(f"game {self.game_id!r}: total count must be at least 1")
        object.__setattr__(self, "counts", _frozen(counts))

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def empirical_distribution(obs: Observation) -> np.ndarray:
    total = obs.counts.sum()
    if total < 1:
        raise EmptyObservation(f"game {obs.game_id!r} has no observations")
    return obs.counts / total


@dataclass
class Dataset:
    observations: list[Observation]
    splits: dict[str, str] | None = None

    def game_ids(self) -> list[str]:
        return list(OrderedDict.fromkeys(o.game_id for o in self.observations))

    def with_splits(self, splits: Mapping[str, str]) -> "Dataset":
        missing = set(self.game_ids()) - set(splits)
        if missing:
            raise ValidationError(f"no split label for games {sorted(missing)[:5]}")
        bad = {v for v in splits.values()} - set(SPLIT_LABELS)
        if bad:
            raise ValidationError(f"unknown split labels {sorted(bad)}")
        return Dataset(self.observations, dict(splits))

    def split(self, label: str) -> list[Observation]:
        if self.splits is None:
            raise ValidationError("dataset has no split assignment")
        return [o for o in self.observations if self.splits[o.game_id] == label]

    def summary(self) -> dict:
        by_source: dict[str, dict] = OrderedDict()
        for o in self.observations:
            s = by_source.setdefault(o.source_tag, {"games": set(), "observations": 0})
            s["games"].add(o.game_id)
            s["observations"] += o.total
        rows = [
            {"source": k, "games": len(v["games"]), "observations": v["observations"]}
            for k, v in by_source.items()
        ]
        return {
            "sources": rows,
            "games": len(self.game_ids()),
            "observations": int(sum(o.total for o in self.observations)),
            "records": len(self.observations),
        }


def random_split(
    game_ids: Sequence[str], seed: int, fractions: Sequence[float] = DEFAULT_FRACTIONS
) -> dict[str, str]:
    """Assign whole games to train/val/test at random."""
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1) > 1e-9:
        raise ValidationError(f"fractions must be three non-negative numbers summing to 1: {fractions}")
    ids = list(game_ids)
    order = np.random.default_rng(seed).permutation(len(ids))
    n_val = int(round(fractions[1] * len(ids)))
    n_test = int(round(fractions[2] * len(ids)))
    labels = {}
    for rank, idx in enumerate(order):
        if rank < n_val:
            labels[ids[idx]] = "val"
        elif rank < n_val + n_test:
            labels[ids[idx]] = "test"
        else:
            labels[ids[idx]] = "train"
    return labels


def parse_record(rec: Mapping, index: int, standardize_payoffs: bool = True, pooled: bool = True) -> Observation:
    """Turn one JSON record into a row-normalized, standardized Observation."""
    gid = rec.get("game_id", f"#{index}") if isinstance(rec, Mapping) else f"#{index}"
    where = f"record {index} (game_id {gid!r})"
    if not isinstance(rec, Mapping):
        raise ValidationError(f"{where}: expected an object")
    for key in ("game_id", "u1", "u2", "counts"):
        if key not in rec:
            raise ValidationError(f"{where}: missing field {key!r}")
    role = rec.get("role", "row")
    if role not in ("row", "column"):
        raise ValidationError(f"{where}: role must be 'row' or 'column', got {role!r}")
    try:
        game = Game(rec["u1"], rec["u2"])
    except (ValidationError, ValueError, TypeError) as exc:
        raise ValidationError(f"{where}: {exc}") from exc
    if role == "column":
        game = transpose_for_column(game)
    if standardize_payoffs:
        try:
            game = standardize(game, pooled=pooled)
        except DegenerateGame as exc:
            raise DegenerateGame(f"{where}: {exc}") from exc
    try:
        return Observation(game, rec["counts"], str(rec.get("source", "")), str(rec["game_id"]))
    except ValidationError as exc:
        raise type(exc)(f"{where}: {exc}") from exc
    except (ValueError, TypeError) as exc:
        raise ValidationError(f"{where}: {exc}") from exc


def load_dataset(
    path_or_doc,
    standardize_payoffs: bool = True,
    pooled: bool = True,
    split_seed: int | None = None,
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
) -> Dataset:
    """Read a dataset JSON document (path or already-parsed dict).

    Records keyed by the same ``game_id`` and role describe the same game.
    A ``splits`` map in the document wins over ``split_seed``.
    """
    if isinstance(path_or_doc, (str, Path)):
        with open(path_or_doc) as fh:
            doc = json.load(fh)
    else:
        doc = path_or_doc
    if not isinstance(doc, Mapping) or not isinstance(doc.get("observations"), list):
        raise ValidationError("dataset must be an object with an 'observations' list")
    obs = [
        parse_record(rec, i, standardize_payoffs, pooled) for i, rec in enumerate(doc["observations"])
    ]
    ds = Dataset(obs)
    if doc.get("splits") is not None:
        return ds.with_splits(doc["splits"])
    if split_seed is not None:
        return ds.with_splits(random_split(ds.game_ids(), split_seed, fractions))
    return ds


def dataset_document(records: Iterable[Mapping], splits: Mapping[str, str] | None = None) -> dict:
    doc: dict = {"observations": list(records)}
    if splits is not None:
        doc["splits"] = dict(splits)
    return doc


@dataclass
class GameBatch:
    """Observations of one game shape stacked for vectorized evaluation."""

    u1: np.ndarray  # (B, n, m)
    u2: np.ndarray
    empirical: np.ndarray  # (B, n)
    counts: np.ndarray  # (B,) total observations per record
    game_ids: list[str] = field(default_factory=list)

    @property
    def size(self) -> int:
        return self.u1.shape[0]

    @property
    def transposed(self) -> tuple[np.ndarray, np.ndarray]:
        """Column player's view of every game: (u2^T, u1^T)."""
        return self.u2.transpose(0, 2, 1), self.u1.transpose(0, 2, 1)


def make_batches(observations: Sequence[Observation]) -> list[GameBatch]:
    groups: dict[tuple[int, int], list[Observation]] = OrderedDict()
    for o in observations:
        groups.setdefault(o.game.shape, []).append(o)
    batches = []
    for group in groups.values():
        batches.append(
            GameBatch(
                u1=np.stack([o.game.u1 for o in group]),
                u2=np.stack([o.game.u2 for o in group]),
                empirical=np.stack([empirical_distribution(o) for o in group]),
                counts=np.array([o.total for o in group], dtype=float),
                game_ids=[o.game_id for o in group],
            )
        )
    return batches
