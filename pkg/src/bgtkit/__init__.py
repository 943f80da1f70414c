"""Behavioral game theory models: heuristics, quantal cognitive hierarchy, GameNet and ElementaryNet."""

from .errors import BGTError, NonFiniteLoss, NumericalError, ValidationError
from .game import Dataset, Game, Observation, load_dataset, permute, standardize, transpose_for_column
from .models import ComposedModel, ModelSpec, ParameterSet
from .strategic import qbr
from .training import TrainConfig, TrainResult, sweep, train

__all__ = [
    "BGTError",
    "ComposedModel",
    "Dataset",
    "Game",
    "ModelSpec",
    "NonFiniteLoss",
    "NumericalError",
    "Observation",
    "ParameterSet",
    "TrainConfig",
    "TrainResult",
    "ValidationError",
    "load_dataset",
    "permute",
    "qbr",
    "standardize",
    "sweep",
    "train",
    "transpose_for_column",
]
__version__ = "0.1.0"
