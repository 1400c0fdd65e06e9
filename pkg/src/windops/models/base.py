"""Shared model-family types: specs, the fitted-regressor interface, errors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

FAMILIES = ("elastic_net", "decision_tree", "random_forest",
            "gbt_leafwise", "gbt_depthwise")
TARGETS = ("speed", "dir_cos", "dir_sin")


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class RegressorSpec:
    family: str
    params: Mapping
    seed: int = 0

    def to_dict(self) -> dict:
        return {"family": self.family, "params": dict(self.params),
                "seed": self.seed}

    @staticmethod
    def from_dict(payload: dict) -> "RegressorSpec":
        return RegressorSpec(family=payload["family"],
                             params=dict(payload["params"]),
                             seed=int(payload.get("seed", 0)))


class Regressor:
    """A fitted regressor; predict() only accepts the trained width."""

    family: str = ""
    n_features: int = 0

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise ValueError(
                f"{self.family} model trained on {self.n_features} features, "
                f"got {X.shape[1]}")
        if not np.isfinite(X).all():
            raise ValueError("non-finite values in prediction input")
        return X

    def predict(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


def validate_training_data(X: np.ndarray, y: np.ndarray) -> tuple:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] == 0:
        raise TrainingError("empty training dataset")
    if X.shape[0] != y.shape[0]:
        raise TrainingError(
            f"{X.shape[0]} feature rows but {y.shape[0]} targets")
    if not np.isfinite(X).all() or not np.isfinite(y).all():
        raise TrainingError("NaN or infinite values in training data")
    return X, y


_REGISTRY: dict = {}


def register_model(kind: str):
    def wrap(cls):
        _REGISTRY[kind] = cls
        cls.kind = kind
        return cls
    return wrap


def model_from_dict(payload: dict) -> Regressor:
    kind = payload["kind"]
    if kind not in _REGISTRY:
        raise ValueError(f"unknown model kind {kind!r}")
    return _REGISTRY[kind].from_dict(payload)
