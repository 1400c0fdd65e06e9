"""Stacked ensembling of the per-family model banks plus the official
baseline.

Six members (five learned families and the official forecast) times three
targets give the 18 prediction values per hour; the same rows feed both the
elastic-net combiners here and the prescriptive policy features downstream.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .features import Dataset, FEATURE_NAMES
from .models.base import FAMILIES, TARGETS
from .models.elastic_net import ElasticNetRegressor
from .models.search import ENSEMBLE_GRID, LeadTimeModelBank, enumerate_grid

__all__ = [
    "MEMBERS", "POLICY_FEATURE_NAMES", "MemberPredictions", "StackedEnsemble",
    "collect_member_predictions", "train_stacker", "predict_ensemble",
    "ensemble_predictions",
]

MEMBERS = FAMILIES + ("official_baseline",)
POLICY_FEATURE_NAMES = tuple(
    f"{member}_{target}" for member in MEMBERS for target in TARGETS)

_BASELINE_COLS = tuple(FEATURE_NAMES.index(name) for name in (
    "forecast_wind_speed", "forecast_wind_dir_cos", "forecast_wind_dir_sin"))


class MemberPredictionError(KeyError):
    pass


@dataclass
class MemberPredictions:
    """Per-hour member predictions and realized targets for one lead time."""

    lead_time: int
    base_times: np.ndarray  # (n,) epoch hours
    values: np.ndarray      # (n, 6 members, 3 targets)
    actuals: np.ndarray     # (n, 3 targets)

    def __len__(self) -> int:
        return self.values.shape[0]

    def flatten(self) -> np.ndarray:
        """(n, 18) matrix ordered per POLICY_FEATURE_NAMES (member-major)."""
        return self.values.reshape(len(self), len(MEMBERS) * len(TARGETS))

    def member_column(self, member: str, target: str) -> np.ndarray:
        return self.values[:, MEMBERS.index(member), TARGETS.index(target)]

    def slice(self, lo: int, hi: int) -> "MemberPredictions":
        return MemberPredictions(self.lead_time, self.base_times[lo:hi],
                                 self.values[lo:hi], self.actuals[lo:hi])

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["base_time", "lead_time", *POLICY_FEATURE_NAMES,
                             *("actual_" + t for t in TARGETS)])
            flat = self.flatten()
            for i in range(len(self)):
                writer.writerow([int(self.base_times[i]), self.lead_time,
                                 *[repr(v) for v in flat[i].tolist()],
                                 *[repr(v) for v in self.actuals[i].tolist()]])

    @staticmethod
    def from_csv(path: str) -> "MemberPredictions":
        with open(path, newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader)
            expected = ["base_time", "lead_time", *POLICY_FEATURE_NAMES,
                        *("actual_" + t for t in TARGETS)]
            if header != expected:
                raise ValueError(f"unexpected member-prediction header in {path}")
            times, lead, vals, acts = [], 0, [], []
            for row in reader:
                times.append(int(row[0]))
                lead = int(row[1])
                vals.append([float(v) for v in row[2:2 + 18]])
                acts.append([float(v) for v in row[2 + 18:]])
        n = len(times)
        return MemberPredictions(
            lead_time=lead,
            base_times=np.array(times, dtype=np.int64),
            values=np.array(vals).reshape(n, len(MEMBERS), len(TARGETS)),
            actuals=np.array(acts))


def collect_member_predictions(banks: Mapping[str, LeadTimeModelBank],
                               dataset: Dataset) -> MemberPredictions:
    """One row per dataset row: every member's (speed, cos, sin) plus actuals.

    The official-baseline member reuses the forecast features already in the
    row, so stacker and policy inputs share a single source of truth.
    """
    n = len(dataset)
    values = np.empty((n, len(MEMBERS), len(TARGETS)))
    for m, member in enumerate(MEMBERS):
        if member == "official_baseline":
            for t, col in enumerate(_BASELINE_COLS):
                values[:, m, t] = dataset.X[:, col]
            values[:, m, 0] = np.maximum(values[:, m, 0], 0.0)
            continue
        if member not in banks:
            raise MemberPredictionError(
                f"no model bank for member {member!r} at lead "
                f"{dataset.lead_time}")
        bank = banks[member]
        for t, target in enumerate(TARGETS):
            try:
                values[:, m, t] = bank.predict(dataset.lead_time, target,
                                               dataset.X)
            except KeyError as exc:
                raise MemberPredictionError(
                    f"member {member!r} missing lead {dataset.lead_time} "
                    f"target {target!r}") from exc
    return MemberPredictions(lead_time=dataset.lead_time,
                             base_times=dataset.base_times.copy(),
                             values=values, actuals=dataset.y.copy())


@dataclass
class StackedEnsemble:
    """Elastic-net combiner per (lead, target) over member predictions."""

    combiners: dict = field(default_factory=dict)  # (lead, target) -> EN model
    cv_info: dict = field(default_factory=dict)    # (lead, target) -> dict

    @property
    def leads(self) -> tuple:
        return tuple(sorted({lead for lead, _ in self.combiners}))

    def combine(self, lead: int, target: str,
                member_values: np.ndarray) -> np.ndarray:
        """Apply the (lead, target) combiner to (n, 6) member predictions."""
        out = self.combiners[(lead, target)].predict(member_values)
        if target == "speed":
            out = np.maximum(out, 0.0)
        return out

    def to_dict(self) -> dict:
        return {"entries": [
            {"lead": lead, "target": target,
             "cv": self.cv_info.get((lead, target)),
             "model": model.to_dict()}
            for (lead, target), model in sorted(self.combiners.items())]}

    @staticmethod
    def from_dict(payload: dict) -> "StackedEnsemble":
        stacked = StackedEnsemble()
        for entry in payload["entries"]:
            key = (int(entry["lead"]), entry["target"])
            stacked.combiners[key] = ElasticNetRegressor.from_dict(entry["model"])
            stacked.cv_info[key] = entry.get("cv")
        return stacked


def _contiguous_folds(n: int, k: int) -> list:
    return [fold for fold in np.array_split(np.arange(n), k)]


def train_stacker(rows_by_lead: Mapping[int, MemberPredictions],
                  k: int = 5, grid: Optional[Mapping] = None) -> StackedEnsemble:
    """Fit combiners on validation-split member predictions.

    Hyperparameters come from contiguous-block k-fold cross-validation (time
    blocks, not random shuffles) over the provided rows; the winning pair is
    refit on all rows. Constant member columns trigger a warning and are
    dropped by the combiner's internal standardization.
    """
    grid = ENSEMBLE_GRID if grid is None else grid
    combos = enumerate_grid(grid)
    stacked = StackedEnsemble()
    for lead in sorted(rows_by_lead):
        rows = rows_by_lead[lead]
        n = len(rows)
        if n < k:
            raise ValueError(
                f"need at least k={k} rows for cross-validation, got {n}")
        folds = _contiguous_folds(n, k)
        for t_idx, target in enumerate(TARGETS):
            M = rows.values[:, :, t_idx]
            y = rows.actuals[:, t_idx]
            constant = M.std(axis=0) == 0.0
            if constant.any():
                names = [MEMBERS[i] for i in np.nonzero(constant)[0]]
                warnings.warn(
                    f"constant member columns dropped for lead {lead} "
                    f"target {target!r}: {names}")
            best = None
            for params in combos:
                fold_maes = []
                for fold in folds:
                    mask = np.ones(n, dtype=bool)
                    mask[fold] = False
                    model = ElasticNetRegressor(**params).fit(M[mask], y[mask])
                    fold_maes.append(
                        float(np.mean(np.abs(model.predict(M[fold]) - y[fold]))))
                cv_mae = float(np.mean(fold_maes))
                if best is None or cv_mae < best[1]:
                    best = (params, cv_mae)
            final = ElasticNetRegressor(**best[0]).fit(M, y)
            stacked.combiners[(lead, target)] = final
            stacked.cv_info[(lead, target)] = {
                "params": dict(best[0]), "cv_mae": best[1], "folds": k,
                "rows": n}
    return stacked


def ensemble_predictions(stacked: StackedEnsemble,
                         rows: MemberPredictions) -> tuple:
    """(speeds, directions) arrays for a batch of member-prediction rows."""
    lead = rows.lead_time
    speeds = stacked.combine(lead, "speed", rows.values[:, :, 0])
    cos = stacked.combine(lead, "dir_cos", rows.values[:, :, 1])
    sin = stacked.combine(lead, "dir_sin", rows.values[:, :, 2])
    if np.any((np.abs(cos) < 1e-12) & (np.abs(sin) < 1e-12)):
        raise ValueError("direction undefined for near-zero (cos, sin) pair")
    directions = np.degrees(np.arctan2(sin, cos)) % 360.0
    directions[directions == 360.0] = 0.0
    return speeds, directions


def predict_ensemble(stacked: StackedEnsemble, lead: int,
                     member_values: np.ndarray) -> tuple:
    """(speed, direction) for one hour's (6, 3) member prediction block."""
    member_values = np.asarray(member_values, dtype=np.float64)
    if member_values.shape == (len(MEMBERS) * len(TARGETS),):
        member_values = member_values.reshape(len(MEMBERS), len(TARGETS))
    if member_values.shape != (len(MEMBERS), len(TARGETS)):
        raise ValueError(
            f"expected ({len(MEMBERS)}, {len(TARGETS)}) member values, "
            f"got {member_values.shape}")
    rows = MemberPredictions(
        lead_time=lead,
        base_times=np.zeros(1, dtype=np.int64),
        values=member_values[None, :, :],
        actuals=np.zeros((1, 3)))
    speeds, directions = ensemble_predictions(stacked, rows)
    return float(speeds[0]), float(directions[0])
