"""Tabular training rows from hourly weather plus official forecasts.

A row at base time t for lead h concatenates the present and past 48 hours
of measurements (direction as cos/sin), calendar phase encodings of t, and
the freshest official forecast available at t for the hour t+h: 304 features
total. Targets are the realized wind speed and direction components at t+h.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Mapping, Optional, Sequence

import numpy as np

from .ingest import HourlyWeather, OfficialForecast

__all__ = [
    "FEATURE_NAMES", "TARGET_NAMES", "N_FEATURES", "LOOKBACK_HOURS",
    "DEFAULT_LEAD_TIMES", "RowNotConstructible", "FeatureBuilder",
    "Dataset", "build_feature_vector", "build_dataset",
    "chronological_split", "dataset_to_csv", "dataset_from_csv",
    "epoch_hour", "hour_to_datetime",
]

LOOKBACK_HOURS = 48
DEFAULT_LEAD_TIMES = (1, 2, 3, 6, 12, 24, 36, 48)
TARGET_NAMES = ("target_wind_speed", "target_dir_cos", "target_dir_sin")


def _feature_names() -> tuple:
    names = []
    lags = range(LOOKBACK_HOURS, -1, -1)  # t-48 first, t last
    names += [f"wind_speed_lag{k}" for k in lags]
    for k in lags:
        names += [f"wind_dir_cos_lag{k}", f"wind_dir_sin_lag{k}"]
    names += [f"solar_irradiance_lag{k}" for k in lags]
    names += [f"temperature_lag{k}" for k in lags]
    names += [f"pluviometry_lag{k}" for k in lags]
    names += ["day_of_year_cos", "day_of_year_sin",
              "hour_of_day_cos", "hour_of_day_sin"]
    names += ["forecast_wind_speed", "forecast_wind_dir_cos",
              "forecast_wind_dir_sin", "forecast_pluviometry",
              "forecast_solar_irradiance", "forecast_temperature"]
    return tuple(names)


FEATURE_NAMES = _feature_names()
N_FEATURES = len(FEATURE_NAMES)
assert N_FEATURES == 304

BASELINE_FEATURES = ("forecast_wind_speed", "forecast_wind_dir_cos",
                     "forecast_wind_dir_sin")


class RowNotConstructible(ValueError):
    """Raised when a (t, h) row cannot be built; carries the reason tag."""

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        super().__init__(f"row not constructible: {reason}"
                         + (f" ({detail})" if detail else ""))


def epoch_hour(ts: datetime) -> int:
    return int(ts.timestamp() // 3600)


def hour_to_datetime(hour: int) -> datetime:
    return datetime.fromtimestamp(hour * 3600, tz=timezone.utc)


@dataclass
class Dataset:
    """Time-ordered labeled rows for one lead time."""

    lead_time: int
    X: np.ndarray            # (n, 304) float64
    y: np.ndarray            # (n, 3): speed, dir cos, dir sin at t+h
    base_times: np.ndarray   # (n,) int64 epoch hours, strictly increasing
    split: str = ""
    skipped: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.X.shape[0]

    def base_datetimes(self) -> list:
        return [hour_to_datetime(int(t)) for t in self.base_times]

    def slice(self, lo: int, hi: int, split: str = "") -> "Dataset":
        return Dataset(lead_time=self.lead_time, X=self.X[lo:hi],
                       y=self.y[lo:hi], base_times=self.base_times[lo:hi],
                       split=split or self.split)


class FeatureBuilder:
    """Prepares array views of an hourly series + forecast stream.

    Single-row and whole-dataset construction share this code path, so an
    online consumer rebuilding one row gets bit-identical values to the
    offline pipeline.
    """

    def __init__(self, hourly: Sequence[HourlyWeather],
                 forecasts: Sequence[OfficialForecast]):
        if not hourly:
            raise ValueError("empty hourly series")
        hours = [epoch_hour(rec.timestamp) for rec in hourly]
        self.h0 = min(hours)
        self.h1 = max(hours)
        n = self.h1 - self.h0 + 1
        speed = np.full(n, np.nan)
        direction = np.full(n, np.nan)
        irr = np.full(n, np.nan)
        temp = np.full(n, np.nan)
        plu = np.full(n, np.nan)
        for rec, h in zip(hourly, hours):
            i = h - self.h0
            if rec.wind_speed is not None:
                speed[i] = rec.wind_speed
            if rec.wind_direction is not None:
                direction[i] = rec.wind_direction
            if rec.solar_irradiance is not None:
                irr[i] = rec.solar_irradiance
            if rec.temperature is not None:
                temp[i] = rec.temperature
            if rec.pluviometry is not None:
                plu[i] = rec.pluviometry
        rad = np.radians(direction)
        self.speed = speed
        self.dir_cos = np.cos(rad)
        self.dir_sin = np.sin(rad)
        self.irr = irr
        self.temp = temp
        self.plu = plu
        self.complete = ~(np.isnan(speed) | np.isnan(direction) | np.isnan(irr)
                          | np.isnan(temp) | np.isnan(plu))
        self.target_ok = ~(np.isnan(speed) | np.isnan(direction))

        issues = sorted(forecasts, key=lambda f: f.issue_time)
        self.issue_hours = np.array(
            [epoch_hour(f.issue_time) for f in issues], dtype=np.int64)
        if len(issues):
            self.fc_speed = np.array([f.wind_speed for f in issues])
            fc_dir = np.array([f.wind_direction for f in issues])
            fc_rad = np.radians(fc_dir)
            self.fc_dir_cos = np.cos(fc_rad)
            self.fc_dir_sin = np.sin(fc_rad)
            self.fc_plu = np.array([f.pluviometry for f in issues])
            self.fc_irr = np.array([f.solar_irradiance for f in issues])
            self.fc_temp = np.array([f.temperature for f in issues])

    def _issue_index(self, t: np.ndarray, h: int) -> np.ndarray:
        """Freshest issuance at or before t covering t+h; -1 if none."""
        if len(self.issue_hours) == 0:
            return np.full(t.shape, -1, dtype=np.int64)
        idx = np.searchsorted(self.issue_hours, t, side="right") - 1
        valid = idx >= 0
        safe = np.maximum(idx, 0)
        horizon = t + h - self.issue_hours[safe]
        valid &= (horizon >= 1) & (horizon <= 48)
        return np.where(valid, idx, -1)

    def candidate_times(self, h: int) -> tuple:
        """(epoch hours of constructible rows, skip counts by reason)."""
        n = len(self.speed)
        window = np.convolve(self.complete.astype(np.int64),
                             np.ones(LOOKBACK_HOURS + 1, dtype=np.int64),
                             mode="valid") == LOOKBACK_HOURS + 1
        t_all = np.arange(self.h0 + LOOKBACK_HOURS, self.h0 + n, dtype=np.int64)
        history_ok = window
        tgt_idx = t_all + h - self.h0
        in_range = tgt_idx < n
        target = np.zeros(t_all.shape, dtype=bool)
        target[in_range] = self.target_ok[tgt_idx[in_range]]
        forecast = self._issue_index(t_all, h) >= 0
        ok = history_ok & target & forecast
        skipped = {
            "insufficient_history": int(np.sum(~history_ok)),
            "missing_target": int(np.sum(history_ok & ~target)),
            "no_forecast": int(np.sum(history_ok & target & ~forecast)),
        }
        return t_all[ok], skipped

    def matrix(self, t: np.ndarray, h: int) -> np.ndarray:
        """Feature matrix for the given base hours, ordered per FEATURE_NAMES."""
        t = np.asarray(t, dtype=np.int64)
        rows = len(t)
        base = t - self.h0
        lag_idx = base[:, None] + np.arange(-LOOKBACK_HOURS, 1)[None, :]
        X = np.empty((rows, N_FEATURES))
        X[:, 0:49] = self.speed[lag_idx]
        X[:, 49:147:2] = self.dir_cos[lag_idx]
        X[:, 50:147:2] = self.dir_sin[lag_idx]
        X[:, 147:196] = self.irr[lag_idx]
        X[:, 196:245] = self.temp[lag_idx]
        X[:, 245:294] = self.plu[lag_idx]

        dt64 = (t * 3600).astype("datetime64[s]")
        day = ((dt64.astype("datetime64[D]")
                - dt64.astype("datetime64[Y]")).astype(np.int64) + 1)
        day = np.minimum(day, 365)  # leap day shares the day-365 phase
        hod = t % 24
        X[:, 294] = np.cos(2.0 * np.pi * day / 365.0)
        X[:, 295] = np.sin(2.0 * np.pi * day / 365.0)
        X[:, 296] = np.cos(2.0 * np.pi * hod / 24.0)
        X[:, 297] = np.sin(2.0 * np.pi * hod / 24.0)

        issue = self._issue_index(t, h)
        if np.any(issue < 0):
            bad = t[issue < 0][0]
            raise RowNotConstructible(
                "no_forecast", f"no issuance at or before hour covering "
                f"{hour_to_datetime(int(bad) + h).isoformat()}")
        k = t + h - self.issue_hours[issue] - 1
        X[:, 298] = self.fc_speed[issue, k]
        X[:, 299] = self.fc_dir_cos[issue, k]
        X[:, 300] = self.fc_dir_sin[issue, k]
        X[:, 301] = self.fc_plu[issue, k]
        X[:, 302] = self.fc_irr[issue, k]
        X[:, 303] = self.fc_temp[issue, k]
        return X

    def targets(self, t: np.ndarray, h: int) -> np.ndarray:
        idx = np.asarray(t, dtype=np.int64) + h - self.h0
        return np.column_stack([self.speed[idx], self.dir_cos[idx],
                                self.dir_sin[idx]])

    def row(self, t: int, h: int) -> np.ndarray:
        """One feature vector; raises RowNotConstructible with the reason."""
        lo = t - LOOKBACK_HOURS - self.h0
        hi = t - self.h0
        if lo < 0 or hi >= len(self.speed) or not self.complete[lo:hi + 1].all():
            raise RowNotConstructible(
                "insufficient_history",
                f"need {LOOKBACK_HOURS + 1} complete hours ending "
                f"{hour_to_datetime(t).isoformat()}")
        return self.matrix(np.array([t], dtype=np.int64), h)[0]


def build_feature_vector(hourly: Sequence[HourlyWeather],
                         forecasts: Sequence[OfficialForecast],
                         t: datetime, h: int) -> np.ndarray:
    """Feature vector at base time t for lead h (convenience single-row path)."""
    return FeatureBuilder(hourly, forecasts).row(epoch_hour(t), h)


def build_dataset(hourly: Sequence[HourlyWeather],
                  forecasts: Sequence[OfficialForecast],
                  lead_times: Sequence[int]) -> dict:
    """One Dataset per requested lead time, rows time-ordered.

    Rows whose 49-hour window, target hour, or forecast coverage is
    unavailable are skipped and counted in Dataset.skipped. An empty lead
    warns rather than failing.
    """
    builder = FeatureBuilder(hourly, forecasts)
    out = {}
    for h in sorted(set(int(x) for x in lead_times)):
        if h < 1:
            raise ValueError(f"lead time must be >= 1 hour, got {h}")
        times, skipped = builder.candidate_times(h)
        if len(times) == 0:
            warnings.warn(f"no constructible rows for lead time {h}")
            X = np.empty((0, N_FEATURES))
            y = np.empty((0, 3))
        else:
            X = builder.matrix(times, h)
            y = builder.targets(times, h)
        out[h] = Dataset(lead_time=h, X=X, y=y, base_times=times,
                         skipped=skipped)
    return out


def chronological_split(dataset: Dataset,
                        fractions: tuple = (0.6, 0.2, 0.2)) -> tuple:
    """Split by time into (train, validation, test) at floor-index cuts."""
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise ValueError("fractions must be three positive values")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {sum(fractions)!r}")
    n = len(dataset)
    if n < 5:
        raise ValueError(f"dataset too small to split ({n} rows, need >= 5)")
    cut1 = int(n * fractions[0])
    cut2 = cut1 + int(n * fractions[1])
    return (dataset.slice(0, cut1, "train"),
            dataset.slice(cut1, cut2, "validation"),
            dataset.slice(cut2, n, "test"))


def dataset_to_csv(dataset: Dataset, path: str) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["base_time", "lead_time", *FEATURE_NAMES, *TARGET_NAMES])
        for i in range(len(dataset)):
            writer.writerow([
                int(dataset.base_times[i]), dataset.lead_time,
                *[repr(v) for v in dataset.X[i].tolist()],
                *[repr(v) for v in dataset.y[i].tolist()],
            ])


def dataset_from_csv(path: str) -> Dataset:
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        expected = ["base_time", "lead_time", *FEATURE_NAMES, *TARGET_NAMES]
        if header != expected:
            raise ValueError(f"unexpected dataset header in {path}")
        base, lead, xs, ys = [], None, [], []
        for row in reader:
            base.append(int(row[0]))
            lead = int(row[1])
            xs.append([float(v) for v in row[2:2 + N_FEATURES]])
            ys.append([float(v) for v in row[2 + N_FEATURES:]])
    return Dataset(lead_time=lead if lead is not None else 0,
                   X=np.array(xs) if xs else np.empty((0, N_FEATURES)),
                   y=np.array(ys) if ys else np.empty((0, 3)),
                   base_times=np.array(base, dtype=np.int64))
