"""Hyperparameter grids, validation-set grid search, and per-lead model banks.

The searched grids mirror the published tuning table per family; FAST_GRIDS
is a documented single-point subset for desk-scale runs where exhaustive
search is not the goal.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .base import FAMILIES, TARGETS, Regressor, RegressorSpec, TrainingError
from .elastic_net import train_elastic_net
from .trees import bin_matrix, train_cart, train_forest, train_gbt

# Leafwise boosting has no searched estimator count; it runs the customary
# 100 stages.
LEAFWISE_N_ESTIMATORS = 100

TABLE_GRIDS: dict = {
    "elastic_net": {
        "alpha": [0.2, 0.4, 0.6, 0.8, 1.0],
        "l1_ratio": [0.5, 0.7],
    },
    "decision_tree": {
        "max_depth": [5, 6, 7, 8, 9, 10],
        "min_samples_split": [3, 5, 7],
        "min_samples_leaf": [4, 6],
    },
    "random_forest": {
        "bootstrap": [True, False],
        "n_estimators": [100, 150],
        "max_depth": [5, 6],
        "min_samples_split": [4, 6],
    },
    "gbt_leafwise": {
        "num_leaves": [31, 60],
        "max_depth": [4, 6],
        "learning_rate": [0.1, 0.3],
        "lambda_l1": [0.0, 1.0],
    },
    "gbt_depthwise": {
        "n_estimators": [100, 150],
        "max_depth": [4, 6],
        "learning_rate": [0.1, 0.3],
    },
}

ENSEMBLE_GRID: dict = {
    "alpha": [0.2, 0.4, 0.6, 0.8, 1.0],
    "l1_ratio": [0.0, 0.25, 0.5, 0.75, 1.0],
}

FAST_GRIDS: dict = {
    "elastic_net": {"alpha": [0.2], "l1_ratio": [0.5]},
    "decision_tree": {"max_depth": [8], "min_samples_split": [3],
                      "min_samples_leaf": [4]},
    "random_forest": {"bootstrap": [True], "n_estimators": [100],
                      "max_depth": [6], "min_samples_split": [4]},
    "gbt_leafwise": {"num_leaves": [31], "max_depth": [6],
                     "learning_rate": [0.1], "lambda_l1": [0.0]},
    "gbt_depthwise": {"n_estimators": [100], "max_depth": [4],
                      "learning_rate": [0.1]},
}


def _mae_metric(predicted: np.ndarray, actual: np.ndarray) -> float:
    return float(np.mean(np.abs(predicted - actual)))


def _train_one(family: str, X: np.ndarray, y: np.ndarray, params: Mapping,
               seed: int, binned=None) -> Regressor:
    if family == "elastic_net":
        return train_elastic_net(X, y, **params)
    if family == "decision_tree":
        return train_cart(X, y, binned=binned, **params)
    if family == "random_forest":
        return train_forest(X, y, seed=seed, binned=binned, **params)
    if family == "gbt_leafwise":
        return train_gbt(X, y, policy="leafwise", seed=seed, binned=binned,
                         n_estimators=params.get("n_estimators",
                                                 LEAFWISE_N_ESTIMATORS),
                         **{k: v for k, v in params.items()
                            if k != "n_estimators"})
    if family == "gbt_depthwise":
        return train_gbt(X, y, policy="depthwise", seed=seed, binned=binned,
                         **params)
    raise TrainingError(f"unknown model family {family!r}; "
                        f"expected one of {FAMILIES}")


def enumerate_grid(grid: Mapping) -> list:
    """All grid combinations, in declared key order (ties in search resolve
    to the first enumerated)."""
    keys = list(grid)
    return [dict(zip(keys, combo))
            for combo in itertools.product(*(grid[k] for k in keys))]


def grid_search(family: str, X_train: np.ndarray, y_train: np.ndarray,
                X_val: np.ndarray, y_val: np.ndarray,
                grid: Optional[Mapping] = None,
                metric: Optional[Callable] = None,
                seed: int = 0) -> tuple:
    """Exhaustive search returning (spec, fitted model, validation score).

    Trains every combination on the train arrays and scores on validation;
    the default metric is MAE and the default grid is the family's published
    table. Ties keep the first combination in enumeration order.
    """
    grid = TABLE_GRIDS[family] if grid is None else grid
    metric = metric or _mae_metric
    combos = enumerate_grid(grid)
    if not combos:
        raise TrainingError("empty hyperparameter grid")
    binned = None
    if family != "elastic_net" and len(combos) > 1:
        binned = bin_matrix(np.asarray(X_train, dtype=np.float64))
    best = None
    for params in combos:
        model = _train_one(family, X_train, y_train, params, seed, binned)
        score = metric(model.predict(X_val), y_val)
        if best is None or score < best[2]:
            best = (RegressorSpec(family=family, params=params, seed=seed),
                    model, score)
    return best


@dataclass
class LeadTimeModelBank:
    """Grid-searched regressors keyed by (lead hour, target name)."""

    family: str
    models: dict = field(default_factory=dict)   # (lead, target) -> Regressor
    specs: dict = field(default_factory=dict)    # (lead, target) -> RegressorSpec
    scores: dict = field(default_factory=dict)   # (lead, target) -> val metric

    @property
    def leads(self) -> tuple:
        return tuple(sorted({lead for lead, _ in self.models}))

    def model(self, lead: int, target: str) -> Regressor:
        key = (lead, target)
        if key not in self.models:
            raise KeyError(
                f"{self.family} bank has no model for lead {lead}, "
                f"target {target!r}")
        return self.models[key]

    def predict(self, lead: int, target: str, X: np.ndarray) -> np.ndarray:
        out = self.model(lead, target).predict(X)
        if target == "speed":
            out = np.maximum(out, 0.0)  # physical target is nonnegative
        return out

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "entries": [
                {"lead": lead, "target": target,
                 "spec": self.specs[(lead, target)].to_dict(),
                 "score": self.scores.get((lead, target)),
                 "model": model.to_dict()}
                for (lead, target), model in sorted(self.models.items())
            ],
        }

    @staticmethod
    def from_dict(payload: dict) -> "LeadTimeModelBank":
        from .base import model_from_dict
        bank = LeadTimeModelBank(family=payload["family"])
        for entry in payload["entries"]:
            key = (int(entry["lead"]), entry["target"])
            bank.models[key] = model_from_dict(entry["model"])
            bank.specs[key] = RegressorSpec.from_dict(entry["spec"])
            if entry.get("score") is not None:
                bank.scores[key] = float(entry["score"])
        return bank


def train_bank(train_by_lead: Mapping, val_by_lead: Mapping, family: str,
               grid: Optional[Mapping] = None, seed: int = 0,
               leads: Optional[Sequence[int]] = None) -> LeadTimeModelBank:
    """Grid-searched model per (lead, target); targets train independently."""
    if leads is None:
        leads = sorted(train_by_lead)
    bank = LeadTimeModelBank(family=family)
    for lead in leads:
        if lead not in train_by_lead or lead not in val_by_lead:
            raise TrainingError(f"no dataset for lead time {lead}")
        train = train_by_lead[lead]
        val = val_by_lead[lead]
        combos = enumerate_grid(TABLE_GRIDS[family] if grid is None else grid)
        binned = None
        if family != "elastic_net":
            binned = bin_matrix(np.asarray(train.X, dtype=np.float64))
        for t_idx, target in enumerate(TARGETS):
            best = None
            job_seed = _job_seed(seed, lead, t_idx)
            for params in combos:
                model = _train_one(family, train.X, train.y[:, t_idx],
                                   params, job_seed, binned)
                score = _mae_metric(model.predict(val.X), val.y[:, t_idx])
                if best is None or score < best[2]:
                    best = (RegressorSpec(family=family, params=params,
                                          seed=job_seed), model, score)
            bank.specs[(lead, target)] = best[0]
            bank.models[(lead, target)] = best[1]
            bank.scores[(lead, target)] = best[2]
    return bank


def _job_seed(seed: int, lead: int, target_index: int) -> int:
    return int(np.random.SeedSequence([seed, lead, target_index])
               .generate_state(1)[0])
