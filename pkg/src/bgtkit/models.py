"""Declarative model specs and the composed (level-0 + strategic) models they describe."""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field
from typing import Iterator

import numpy as np

from . import autodiff as ad
from .enet import FIXED_KINDS, ElementaryNetModel, PotentialFunction, enet_graph, random_theta
from .errors import ValidationError
from .game import Game, transpose_for_column
from .gamenet import FeatureLayerConfig, FeatureLayerParams, features_graph, init_params
from .heuristics import HeuristicKind, heuristic_batch
from .strategic import DEFAULT_MAX_LEVEL, histogram_levels_graph, poisson_levels_graph, qch_graph

LEVEL0_KINDS = ("gamenet", "enet") + tuple(k.value for k in HeuristicKind)
STRATEGIC_KINDS = ("none", "qch_poisson", "qch_hist")
CONSTRAINTS = ("free", "simplex", "log")

PRECISION_RANGE = (0.03, 0.3)
RATE_RANGE = (0.5, 1.5)


def parse_potentials(text: str) -> list[str]:
    """``"learned:K"``, ``"fixed4"``, or a comma list of kinds (``"own"``, ``"own,sum"``)."""
    text = text.strip()
    if text == "fixed4":
        return list(FIXED_KINDS)
    if text.startswith("learned:"):
        count = text.partition(":")[2] or "1"
        if not count.isdigit() or int(count) < 1:
            raise ValidationError(f"bad potential count in {text!r}")
        return ["learned"] * int(count)
    kinds = [k.strip() for k in text.split(",") if k.strip()]
    bad = [k for k in kinds if k not in FIXED_KINDS + ("learned",)]
    if not kinds or bad:
        raise ValidationError(f"unknown potentials {text!r}")
    return kinds


@dataclass
class ModelSpec:
    level0: str = "uniform"
    strategic: str = "qch_poisson"
    max_level: int = DEFAULT_MAX_LEVEL
    layers: tuple[int, ...] = (50,)
    potentials: str = "learned:1"
    train: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        self.layers = tuple(int(w) for w in self.layers)
        if self.level0 not in LEVEL0_KINDS:
            raise ValidationError(f"unknown level0 {self.level0!r}; choose from {LEVEL0_KINDS}")
        if self.strategic not in STRATEGIC_KINDS:
            raise ValidationError(f"unknown strategic model {self.strategic!r}")
        if self.max_level < 0 or (self.strategic != "none" and self.max_level < 1):
            raise ValidationError("max_level must be at least 1 for a strategic model")
        if self.level0 in ("gamenet", "enet") and (not self.layers or min(self.layers) < 1):
            raise ValidationError("layers must be positive widths")
        if self.level0 == "enet":
            parse_potentials(self.potentials)

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        base = self.level0
        if self.level0 in ("gamenet", "enet"):
            base += "[" + ",".join(map(str, self.layers)) + "]"
        if self.level0 == "enet":
            base += f"<{self.potentials}>"
        return base if self.strategic == "none" else f"{base}+{self.strategic}{self.max_level}"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["layers"] = list(self.layers)
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelSpec":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(doc) - known
        if extra:
            raise ValidationError(f"unknown model spec fields {sorted(extra)}")
        return cls(**{k: (tuple(v) if k == "layers" else v) for k, v in doc.items()})


@dataclass
class Param:
    value: np.ndarray
    constraint: str = "free"
    l1: bool = False

    def __post_init__(self):
        self.value = np.array(self.value, dtype=float)
        if self.constraint not in CONSTRAINTS:
            raise ValidationError(f"unknown constraint {self.constraint!r}")


class ParameterSet:
    """Named trainable arrays with constraint annotations, in insertion order."""

    def __init__(self, params: dict[str, Param] | None = None):
        self._params: dict[str, Param] = dict(params or {})

    def add(self, name: str, value, constraint: str = "free", l1: bool = False) -> None:
        self._params[name] = Param(value, constraint, l1)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._params[name].value

    def __setitem__(self, name: str, value) -> None:
        self._params[name].value = np.array(value, dtype=float)

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def meta(self, name: str) -> Param:
        return self._params[name]

    def values(self) -> dict[str, np.ndarray]:
        return {k: p.value for k, p in self._params.items()}

    def copy(self) -> "ParameterSet":
        return ParameterSet({k: copy.deepcopy(p) for k, p in self._params.items()})

    def size(self) -> int:
        return int(sum(p.value.size for p in self._params.values()))

    def to_dict(self) -> dict:
        return {
            k: {"value": p.value.tolist(), "constraint": p.constraint, "l1": p.l1}
            for k, p in self._params.items()
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ParameterSet":
        return cls(
            {k: Param(v["value"], v.get("constraint", "free"), v.get("l1", False)) for k, v in doc.items()}
        )

    def check(self, atol: float = 1e-9) -> None:
        """Raise if a simplex parameter left the simplex or anything is non-finite."""
        for k, p in self._params.items():
            if not np.all(np.isfinite(p.value)):
                raise ValidationError(f"parameter {k} is not finite")
            if p.constraint == "simplex":
                if np.any(p.value < -atol) or abs(p.value.sum() - 1.0) > atol:
                    raise ValidationError(f"parameter {k} left the simplex: {p.value}")


def _add_feature_params(ps: ParameterSet, prefix: str, fp: FeatureLayerParams) -> None:
    for i, (w, b) in enumerate(zip(fp.weights, fp.biases)):
        ps.add(f"{prefix}W{i}", w, l1=True)
        ps.add(f"{prefix}b{i}", b)
    ps.add(f"{prefix}mix", fp.mix, "simplex")


class ComposedModel:
    """A level-0 model, optionally wrapped in quantal cognitive hierarchy."""

    def __init__(self, spec: ModelSpec, params: ParameterSet):
        self.spec = spec
        self.params = params
        self._kinds = parse_potentials(spec.potentials) if spec.level0 == "enet" else []
        self._heuristic_cache: dict = {}

    # construction -----------------------------------------------------------------

    @classmethod
    def initialize(cls, spec: ModelSpec, rng: np.random.Generator) -> "ComposedModel":
        ps = ParameterSet()
        if spec.level0 == "gamenet":
            _add_feature_params(ps, "l0.", init_params(FeatureLayerConfig(spec.layers), rng))
        elif spec.level0 == "enet":
            kinds = parse_potentials(spec.potentials)
            config = FeatureLayerConfig(spec.layers, in_channels=1)
            for p, kind in enumerate(kinds):
                if kind == "learned":
                    ps.add(f"l0.p{p}.theta", random_theta(rng))
                _add_feature_params(ps, f"l0.p{p}.", init_params(config, rng))
            ps.add("l0.mix", np.full(len(kinds), 1.0 / len(kinds)), "simplex")
        model = cls(spec, ps)
        model.init_strategic(rng)
        return model

    def init_strategic(self, rng: np.random.Generator) -> None:
        """Draw fresh QCH starting values (precision, rate or level logits)."""
        spec, ps = self.spec, self.params
        if spec.strategic == "none":
            return
        lo, hi = PRECISION_RANGE
        ps.add("qch.log_precision", rng.uniform(np.log(lo), np.log(hi)), "log")
        if spec.strategic == "qch_poisson":
            ps.add("qch.log_rate", np.log(rng.uniform(*RATE_RANGE)), "log")
        else:
            ps.add("qch.logits", rng.normal(size=spec.max_level + 1))

    def copy(self) -> "ComposedModel":
        return ComposedModel(self.spec, self.params.copy())

    # graph building -----------------------------------------------------------------

    def variables(self) -> dict[str, ad.Node]:
        return {k: ad.variable(v, k) for k, v in self.params.values().items()}

    def constants(self) -> dict[str, ad.Node]:
        return {k: ad.constant(v) for k, v in self.params.values().items()}

    def _feature_layers(self, nodes, prefix):
        n_layers = len(self.spec.layers)
        return [(nodes[f"{prefix}W{i}"], nodes[f"{prefix}b{i}"]) for i in range(n_layers)], nodes[
            f"{prefix}mix"
        ]

    def level0_graph(self, u1, u2, nodes, dropout=0.0, rng=None) -> ad.Node:
        """Row-player level-0 behaviors (B, n) for payoff stacks u1, u2 (B, n, m)."""
        kind = self.spec.level0
        if kind == "gamenet":
            layers, mix = self._feature_layers(nodes, "l0.")
            inputs = ad.constant(np.stack([u1, u2], axis=1))
            return features_graph(inputs, layers, mix, dropout, rng)
        if kind == "enet":
            thetas, responses = [], []
            for p, k in enumerate(self._kinds):
                thetas.append(nodes[f"l0.p{p}.theta"] if k == "learned" else None)
                responses.append(self._feature_layers(nodes, f"l0.p{p}."))
            return enet_graph(u1, u2, self._kinds, thetas, responses, nodes["l0.mix"], dropout, rng)
        return ad.constant(self._heuristic(kind, u1, u2))

    def _heuristic(self, kind, u1, u2) -> np.ndarray:
        key = id(u1)
        hit = self._heuristic_cache.get(key)
        if hit is not None and hit[0] is u1 and hit[1] is u2:
            return hit[2]
        out = heuristic_batch(kind, u1, u2)
        if len(self._heuristic_cache) >= 16:
            # training reuses a handful of batch arrays; one-off predictions should not pile up
            self._heuristic_cache.clear()
        self._heuristic_cache[key] = (u1, u2, out)
        return out

    def levels_graph(self, nodes) -> ad.Node | None:
        if self.spec.strategic == "qch_poisson":
            return poisson_levels_graph(nodes["qch.log_rate"], self.spec.max_level)
        if self.spec.strategic == "qch_hist":
            return histogram_levels_graph(nodes["qch.logits"])
        return None

    def graph(self, u1, u2, nodes, dropout=0.0, rng=None, u_col=None) -> ad.Node:
        """Row-player predictions (B, n). ``u_col`` may pass precomputed transposes."""
        row0 = self.level0_graph(u1, u2, nodes, dropout, rng)
        if self.spec.strategic == "none":
            return row0
        c1, c2 = u_col if u_col is not None else (u2.transpose(0, 2, 1), u1.transpose(0, 2, 1))
        col0 = self.level0_graph(c1, c2, nodes, dropout, rng)
        precision = ad.exp(nodes["qch.log_precision"])
        return qch_graph(u1, u2, row0, col0, precision, self.levels_graph(nodes))

    # evaluation ----------------------------------------------------------------------

    def predict_batch(self, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
        return self.graph(np.asarray(u1, float), np.asarray(u2, float), self.constants()).value

    def predict(self, game: Game, role: str = "row") -> np.ndarray:
        if role == "column":
            game = transpose_for_column(game)
        return self.predict_batch(game.u1[None], game.u2[None])[0]

    __call__ = predict

    def level0_predict(self, game: Game) -> np.ndarray:
        return self.level0_graph(game.u1[None], game.u2[None], self.constants()).value[0]

    # introspection -------------------------------------------------------------------

    @property
    def precision(self) -> float | None:
        if "qch.log_precision" not in self.params:
            return None
        return float(np.exp(self.params["qch.log_precision"]))

    @property
    def poisson_rate(self) -> float | None:
        if "qch.log_rate" not in self.params:
            return None
        return float(np.exp(self.params["qch.log_rate"]))

    def level_distribution(self) -> np.ndarray | None:
        node = self.levels_graph(self.constants())
        return None if node is None else node.value

    def enet(self) -> ElementaryNetModel | None:
        """The level-0 ElementaryNet as a standalone model object."""
        if self.spec.level0 != "enet":
            return None
        potentials, responses = [], []
        for p, kind in enumerate(self._kinds):
            theta = self.params[f"l0.p{p}.theta"] if kind == "learned" else None
            potentials.append(PotentialFunction(kind, theta))
            responses.append(FeatureLayerParams.from_flat(self.params.values(), len(self.spec.layers), f"l0.p{p}."))
        config = FeatureLayerConfig(self.spec.layers, in_channels=1)
        return ElementaryNetModel(potentials, responses, config, self.params["l0.mix"])

    def summary(self) -> dict:
        out: dict = {"label": self.spec.label, "n_params": self.params.size()}
        if self.precision is not None:
            out["precision"] = self.precision
        if self.poisson_rate is not None:
            out["poisson_rate"] = self.poisson_rate
        dist = self.level_distribution()
        if dist is not None:
            out["level_distribution"] = dist.tolist()
        if self.spec.level0 == "enet":
            out["potential_weights"] = self.params["l0.mix"].tolist()
            out["potentials"] = [
                {"kind": p.kind, "coefficients": list(p.coefficients())} for p in self.enet().potentials
            ]
        return out
