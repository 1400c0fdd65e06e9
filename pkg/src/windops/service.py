"""JSON-over-HTTP service for the operator console.

A single writer (sensor ingestion / recompute) builds immutable snapshots
and swaps them atomically; request handlers only ever read one snapshot, so
concurrent reads during a recompute see either the old or the new state,
never a torn one. Forecast values are produced by the same feature-builder
and model code as the offline pipeline.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from typing import List, Optional

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .ensemble import MEMBERS, predict_ensemble
from .evalsim import step_mode
from .features import FeatureBuilder, FEATURE_NAMES, hour_to_datetime
from .ingest import (HourlyWeather, RawSensorRecord, aggregate_hourly,
                     format_timestamp, hourly_from_csv, parse_forecast_csv,
                     parse_timestamp, wrap_direction)
from .models.base import TARGETS
from .pipeline import TrainedArtifacts, load_artifacts
from .policy import prescribe_with_path
from .scenario import classify_scenario, is_dangerous

OUT_OF_ORDER_TOLERANCE = timedelta(minutes=5)
HOURLY_TAIL = 400  # hours of context kept in memory

_BASELINE_COLS = tuple(FEATURE_NAMES.index(name) for name in (
    "forecast_wind_speed", "forecast_wind_dir_cos", "forecast_wind_dir_sin"))


class SensorRecordIn(BaseModel):
    timestamp: str
    wind_speed: Optional[float] = None
    wind_direction: Optional[float] = None
    solar_irradiance: Optional[float] = None
    temperature: Optional[float] = None
    pluviometry: Optional[float] = None


class SensorPost(BaseModel):
    records: List[SensorRecordIn]


class OverridePost(BaseModel):
    action: str
    token: Optional[str] = None


@dataclass(frozen=True)
class Snapshot:
    """One immutable view of the live state."""

    hourly: tuple = ()
    pending: tuple = ()              # minute records of the incomplete hour(s)
    base_hour: Optional[int] = None  # last complete hour used for forecasts
    entries: dict = field(default_factory=dict)      # lead -> forecast entry
    member_blocks: dict = field(default_factory=dict)  # lead -> (6, 3) array
    mode: str = "normal"
    override: Optional[dict] = None
    override_ledger: tuple = ()
    history: dict = field(default_factory=dict)      # valid hour -> forecasts
    warm: bool = False


def _forecast_entry(speed: float, direction: float) -> dict:
    scenario = classify_scenario(max(speed, 0.0), direction)
    return {"speed": speed, "direction": direction,
            "scenario": scenario.value,
            "dangerous": is_dangerous(scenario)}


class LiveService:
    """Holds artifacts, applies sensor updates, and recomputes snapshots."""

    def __init__(self, artifacts: TrainedArtifacts, hourly, forecasts):
        self.artifacts = artifacts
        self.config = artifacts.config
        self.forecasts = list(forecasts)
        self.lock = threading.Lock()
        self.snapshot = Snapshot()
        with self.lock:
            self._rebuild(tuple(hourly[-HOURLY_TAIL:]), (), Snapshot())

    # -- writer side ------------------------------------------------------

    def _member_block(self, builder: FeatureBuilder, t: int,
                      lead: int) -> np.ndarray:
        row = builder.matrix(np.array([t], dtype=np.int64), lead)
        values = np.empty((len(MEMBERS), len(TARGETS)))
        for m, member in enumerate(MEMBERS):
            if member == "official_baseline":
                for k, col in enumerate(_BASELINE_COLS):
                    values[m, k] = row[0, col]
                values[m, 0] = max(values[m, 0], 0.0)
                continue
            bank = self.artifacts.banks[member]
            for k, target in enumerate(TARGETS):
                values[m, k] = bank.predict(lead, target, row)[0]
        return values

    def _rebuild(self, hourly: tuple, pending: tuple, prev: Snapshot) -> None:
        """Recompute forecasts and mode for the newest complete hour."""
        entries = {}
        blocks = {}
        base_hour = None
        history = dict(prev.history)
        if hourly:
            builder = FeatureBuilder(list(hourly), self.forecasts)
            t = max(int(h.timestamp.timestamp() // 3600) for h in hourly
                    if h.is_complete)
            base_hour = t
            for lead in self.config.leads:
                try:
                    builder.row(t, lead)
                except Exception:
                    continue
                block = self._member_block(builder, t, lead)
                speed, direction = predict_ensemble(
                    self.artifacts.stacker, lead, block)
                entry = _forecast_entry(speed, direction)
                entry["lead"] = lead
                entry["valid_time"] = format_timestamp(
                    hour_to_datetime(t + lead))
                base_speed = max(float(block[MEMBERS.index("official_baseline"), 0]), 0.0)
                base_dir = wrap_direction(float(np.degrees(np.arctan2(
                    block[MEMBERS.index("official_baseline"), 2],
                    block[MEMBERS.index("official_baseline"), 1]))))
                entry["baseline"] = _forecast_entry(base_speed, base_dir)
                entries[lead] = entry
                blocks[lead] = block
                record = {"lead": lead, "made_at": format_timestamp(
                    hour_to_datetime(t)), "speed": entry["speed"],
                    "direction": entry["direction"],
                    "scenario": entry["scenario"]}
                history.setdefault(t + lead, [])
                history[t + lead] = [r for r in history[t + lead]
                                     if r["lead"] != lead] + [record]
        mode = prev.mode
        override = prev.override
        if base_hour is not None and base_hour != prev.base_hour:
            lookahead = any(entries[lead]["dangerous"]
                            for lead in (1, 2, 3) if lead in entries)
            current = next((h for h in reversed(hourly)
                            if h.is_complete), None)
            actual_danger = bool(current and is_dangerous(classify_scenario(
                current.wind_speed, current.wind_direction)))
            mode, _, after = step_mode(prev.mode, lookahead, actual_danger)
            mode = after
            if override is not None and mode != override.get("mode_at_set"):
                override = None  # the machine moved on; override expires
        cutoff = (base_hour - HOURLY_TAIL) if base_hour else 0
        history = {h: v for h, v in history.items() if h >= cutoff}
        self.snapshot = Snapshot(
            hourly=hourly, pending=pending, base_hour=base_hour,
            entries=entries, member_blocks=blocks, mode=mode,
            override=override, override_ledger=prev.override_ledger,
            history=history, warm=bool(entries))

    def apply_sensor(self, records: List[RawSensorRecord]) -> dict:
        with self.lock:
            prev = self.snapshot
            last_seen = None
            if prev.pending:
                last_seen = prev.pending[-1].timestamp
            elif prev.hourly:
                last_seen = prev.hourly[-1].timestamp + timedelta(minutes=59)
            for rec in records:
                if last_seen and rec.timestamp < last_seen - OUT_OF_ORDER_TOLERANCE:
                    raise HTTPException(
                        status_code=409,
                        detail=f"timestamp {format_timestamp(rec.timestamp)} "
                               f"out of order beyond tolerance")
            by_minute = {r.timestamp: r for r in prev.pending}
            for rec in records:
                by_minute[rec.timestamp] = rec  # replays replace identically
            pending = sorted(by_minute.values(), key=lambda r: r.timestamp)
            if not pending:
                return {"accepted": 0, "completed_hours": 0}
            latest_hour = max(r.timestamp.replace(minute=0, second=0,
                                                  microsecond=0)
                              for r in pending)
            complete = [r for r in pending
                        if r.timestamp.replace(minute=0, second=0,
                                               microsecond=0) < latest_hour]
            still_pending = tuple(r for r in pending
                                  if r.timestamp.replace(minute=0, second=0,
                                                         microsecond=0)
                                  >= latest_hour)
            hourly = prev.hourly
            n_new = 0
            if complete:
                known = {int(h.timestamp.timestamp() // 3600)
                         for h in hourly}
                new_hours = [h for h in aggregate_hourly(complete)
                             if int(h.timestamp.timestamp() // 3600)
                             not in known]
                if new_hours:
                    hourly = tuple(list(hourly) + new_hours)[-HOURLY_TAIL:]
                    n_new = len(new_hours)
            if n_new:
                self._rebuild(hourly, still_pending, prev)
            else:
                self.snapshot = replace(prev, pending=still_pending,
                                        hourly=hourly)
            return {"accepted": len(records), "completed_hours": n_new}

    def record_override(self, action: str, token: Optional[str]) -> dict:
        with self.lock:
            prev = self.snapshot
            if token and any(e["token"] == token
                             for e in prev.override_ledger):
                return {"recorded": False, "current_mode": self.current_mode()}
            entry = {"action": action, "token": token,
                     "at_hour": prev.base_hour}
            override = {"action": action, "mode_at_set": prev.mode}
            self.snapshot = replace(
                prev, override=override,
                override_ledger=prev.override_ledger + (entry,))
            return {"recorded": True, "current_mode": self.current_mode()}

    # -- reader side ------------------------------------------------------

    def current_mode(self, snap: Optional[Snapshot] = None) -> str:
        snap = snap or self.snapshot
        if snap.override is not None:
            return ("reduced" if snap.override["action"] == "reduce"
                    else "normal")
        return snap.mode

    def recommendation(self, health_cost: Optional[float]) -> dict:
        snap = self.snapshot
        if not snap.warm or self.config.policy_lead not in snap.member_blocks:
            raise HTTPException(status_code=503,
                                detail="forecasts not ready yet")
        requested = (health_cost if health_cost is not None
                     else self.config.health_cost)
        tree, used = self.artifacts.policy_tree_for(requested)
        x = snap.member_blocks[self.config.policy_lead].reshape(-1)
        action, path = prescribe_with_path(tree, x)
        return {"action": action, "tree_path": path,
                "current_mode": self.current_mode(snap),
                "override_active": snap.override is not None,
                "health_cost_requested": requested,
                "health_cost_used": used,
                "lead_time": self.config.policy_lead,
                "base_hour": format_timestamp(hour_to_datetime(snap.base_hour))}


def create_app(models_dir: str, hourly_path: str,
               forecasts_path: str) -> FastAPI:
    artifacts = load_artifacts(models_dir)
    hourly = hourly_from_csv(hourly_path)
    forecasts = parse_forecast_csv(forecasts_path)
    service = LiveService(artifacts, hourly, forecasts)
    app = FastAPI(title="windops operator service")
    app.state.service = service

    @app.exception_handler(RequestValidationError)
    async def bad_payload(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"detail": exc.errors()})

    @app.get("/api/forecast")
    def forecast(leads: str = "1,2,3"):
        snap = service.snapshot
        if not snap.warm:
            raise HTTPException(status_code=503,
                                detail="forecasts not ready yet")
        try:
            wanted = [int(part) for part in leads.split(",") if part]
        except ValueError:
            raise HTTPException(status_code=400,
                                detail=f"bad leads parameter {leads!r}")
        out = []
        for lead in wanted:
            if lead not in snap.entries:
                raise HTTPException(status_code=400,
                                    detail=f"lead {lead} not available")
            out.append(snap.entries[lead])
        return {"base_hour": format_timestamp(hour_to_datetime(snap.base_hour)),
                "entries": out}

    @app.get("/api/recommendation")
    def recommendation(health_cost: Optional[float] = None):
        return service.recommendation(health_cost)

    @app.get("/api/whatif")
    def whatif(health_cost: float):
        result = service.recommendation(health_cost)
        # a what-if never touches live state; expose the hypothetical only
        return {"action": result["action"], "tree_path": result["tree_path"],
                "health_cost_requested": result["health_cost_requested"],
                "health_cost_used": result["health_cost_used"]}

    @app.get("/api/history")
    def history(hours: int = 48):
        snap = service.snapshot
        if not snap.warm:
            raise HTTPException(status_code=503, detail="no data yet")
        complete = [h for h in snap.hourly if h.is_complete]
        out = []
        for rec in complete[-max(hours, 1):]:
            hour = int(rec.timestamp.timestamp() // 3600)
            scenario = classify_scenario(rec.wind_speed, rec.wind_direction)
            out.append({
                "timestamp": format_timestamp(rec.timestamp),
                "actual": {"speed": rec.wind_speed,
                           "direction": rec.wind_direction,
                           "scenario": scenario.value,
                           "dangerous": is_dangerous(scenario)},
                "forecasts": snap.history.get(hour, []),
            })
        return {"hours": out}

    @app.post("/api/sensor")
    def sensor(post: SensorPost):
        records = []
        for item in post.records:
            try:
                ts = parse_timestamp(item.timestamp)
            except ValueError:
                raise HTTPException(status_code=400,
                                    detail=f"bad timestamp {item.timestamp!r}")
            records.append(RawSensorRecord(
                timestamp=ts, wind_speed=item.wind_speed,
                wind_direction=item.wind_direction,
                solar_irradiance=item.solar_irradiance,
                temperature=item.temperature,
                pluviometry=item.pluviometry))
        return service.apply_sensor(records)

    @app.post("/api/override")
    def override(post: OverridePost):
        if post.action not in ("maintain", "reduce"):
            raise HTTPException(status_code=400,
                                detail=f"unknown action {post.action!r}")
        return service.record_override(post.action, post.token)

    return app
