"""Sensor and forecast ingestion: CSV parsing, gap imputation, hourly aggregation.

Wind is aggregated with the vector-average technique (Cartesian components),
everything else with plain arithmetic means. All timestamps are UTC.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone
from typing import IO, Iterable, Optional, Sequence, Union

__all__ = [
    "IngestError",
    "RawSensorRecord",
    "OfficialForecast",
    "HourlyWeather",
    "ImputationResult",
    "Gap",
    "parse_sensor_csv",
    "parse_forecast_csv",
    "impute_linear",
    "vector_average",
    "aggregate_hourly",
    "impute_hourly",
    "encode_cyclical",
    "decode_direction",
    "parse_timestamp",
    "format_timestamp",
]

SENSOR_HEADER = ["timestamp", "wind_speed", "wind_direction",
                 "solar_irradiance", "temperature", "pluviometry"]
FORECAST_HEADER = ["issue_time", "valid_time", "wind_speed", "wind_direction",
                   "pluviometry", "solar_irradiance", "temperature"]
FORECAST_HORIZON = 48

# Speed below this is treated as a zero resultant; the direction of a zero
# vector is meaningless and canonicalized to 0.0.
ZERO_SPEED_EPS = 1e-9


class IngestError(ValueError):
    """Structured ingest failure; carries the offending line when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)


def wrap_direction(degrees: float) -> float:
    """Reduce to [0, 360); tiny negative inputs would otherwise come out as
    exactly 360.0 under Python's modulo."""
    degrees %= 360.0
    return 0.0 if degrees == 360.0 else degrees


def parse_timestamp(text: str) -> datetime:
    """Parse an ISO-8601 UTC timestamp into an aware datetime."""
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class RawSensorRecord:
    """One minute-level sensor reading; None marks a missing measurement."""

    timestamp: datetime
    wind_speed: Optional[float] = None
    wind_direction: Optional[float] = None
    solar_irradiance: Optional[float] = None
    temperature: Optional[float] = None
    pluviometry: Optional[float] = None


@dataclass(frozen=True)
class OfficialForecast:
    """One twice-daily issuance covering the 48 hours after issue_time.

    Entry k (0-based) is the forecast valid at issue_time + (k+1) hours.
    """

    issue_time: datetime
    wind_speed: tuple
    wind_direction: tuple
    pluviometry: tuple
    solar_irradiance: tuple
    temperature: tuple

    def __post_init__(self):
        for name in ("wind_speed", "wind_direction", "pluviometry",
                     "solar_irradiance", "temperature"):
            if len(getattr(self, name)) != FORECAST_HORIZON:
                raise IngestError(
                    f"forecast issued {format_timestamp(self.issue_time)} has "
                    f"{len(getattr(self, name))} {name} entries, expected {FORECAST_HORIZON}")

    def valid_time(self, k: int) -> datetime:
        return self.issue_time + timedelta(hours=k + 1)

    def covers(self, valid: datetime) -> bool:
        delta = (valid - self.issue_time).total_seconds() / 3600.0
        return 1.0 <= delta <= FORECAST_HORIZON and delta == int(delta)

    def at(self, valid: datetime) -> dict:
        """Forecast values valid at the given hour; raises if not covered."""
        delta = (valid - self.issue_time).total_seconds() / 3600.0
        if not self.covers(valid):
            raise IngestError(
                f"forecast issued {format_timestamp(self.issue_time)} does not "
                f"cover {format_timestamp(valid)}")
        k = int(delta) - 1
        return {
            "wind_speed": self.wind_speed[k],
            "wind_direction": self.wind_direction[k],
            "pluviometry": self.pluviometry[k],
            "solar_irradiance": self.solar_irradiance[k],
            "temperature": self.temperature[k],
        }


@dataclass(frozen=True)
class HourlyWeather:
    """One hour of aggregated weather; None marks an unfilled gap.

    When wind_speed is ~0 the direction is the canonical 0.0 and must not be
    interpreted as a bearing.
    """

    timestamp: datetime
    wind_speed: Optional[float] = None
    wind_direction: Optional[float] = None
    solar_irradiance: Optional[float] = None
    temperature: Optional[float] = None
    pluviometry: Optional[float] = None
    imputed: bool = False

    @property
    def is_complete(self) -> bool:
        return None not in (self.wind_speed, self.wind_direction,
                            self.solar_irradiance, self.temperature,
                            self.pluviometry)


def _parse_cell(text: str, *, is_direction: bool = False) -> Optional[float]:
    """Numeric cell -> value; empty/NaN/malformed/out-of-domain -> None."""
    text = text.strip()
    if not text:
        return None
    try:
        value = float(text)
    except ValueError:
        return None
    if math.isnan(value) or math.isinf(value):
        return None
    if is_direction:
        if value == 360.0:
            return 0.0
        if not 0.0 <= value < 360.0:
            return None
        return value
    if value < 0.0:
        return None
    return value


def parse_sensor_csv(source: Union[str, IO[str]],
                     max_out_of_order_minutes: float = 5.0,
                     ) -> list[RawSensorRecord]:
    """Parse a minute-level sensor CSV into time-sorted records.

    Malformed numeric cells become missing values rather than failures.
    Duplicate timestamps keep the last row. Timestamps running backwards by
    more than ``max_out_of_order_minutes`` raise an IngestError naming the
    line; smaller wobbles are re-sorted silently.
    """
    close = False
    if isinstance(source, str):
        handle = open(source, newline="")
        close = True
    else:
        handle = source
    try:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError("empty sensor file, missing header", line=1)
        if [c.strip() for c in header] != SENSOR_HEADER:
            raise IngestError(
                f"bad sensor header {header!r}, expected {SENSOR_HEADER}", line=1)
        tolerance = timedelta(minutes=max_out_of_order_minutes)
        by_time: dict[datetime, RawSensorRecord] = {}
        latest: Optional[datetime] = None
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(SENSOR_HEADER):
                raise IngestError(
                    f"expected {len(SENSOR_HEADER)} cells, found {len(row)}",
                    line=lineno)
            try:
                ts = parse_timestamp(row[0])
            except ValueError:
                raise IngestError(f"unparseable timestamp {row[0]!r}", line=lineno)
            if latest is not None and ts < latest - tolerance:
                raise IngestError(
                    f"timestamp {format_timestamp(ts)} out of order by more than "
                    f"{max_out_of_order_minutes:g} minutes", line=lineno)
            latest = max(latest, ts) if latest is not None else ts
            # last row wins on duplicate timestamps
            by_time[ts] = RawSensorRecord(
                timestamp=ts,
                wind_speed=_parse_cell(row[1]),
                wind_direction=_parse_cell(row[2], is_direction=True),
                solar_irradiance=_parse_cell(row[3]),
                temperature=_parse_cell(row[4]),
                pluviometry=_parse_cell(row[5]),
            )
        return [by_time[ts] for ts in sorted(by_time)]
    finally:
        if close:
            handle.close()


def parse_forecast_csv(source: Union[str, IO[str]]) -> list[OfficialForecast]:
    """Parse the official-forecast CSV (48 hourly rows per issuance)."""
    close = False
    if isinstance(source, str):
        handle = open(source, newline="")
        close = True
    else:
        handle = source
    try:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError("empty forecast file, missing header", line=1)
        if [c.strip() for c in header] != FORECAST_HEADER:
            raise IngestError(
                f"bad forecast header {header!r}, expected {FORECAST_HEADER}", line=1)
        groups: dict[datetime, dict[int, list[float]]] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(FORECAST_HEADER):
                raise IngestError(
                    f"expected {len(FORECAST_HEADER)} cells, found {len(row)}",
                    line=lineno)
            try:
                issue = parse_timestamp(row[0])
                valid = parse_timestamp(row[1])
            except ValueError:
                raise IngestError(f"unparseable timestamp in {row[:2]!r}", line=lineno)
            delta = (valid - issue).total_seconds() / 3600.0
            if delta != int(delta) or not 1 <= delta <= FORECAST_HORIZON:
                raise IngestError(
                    f"valid_time must be 1..{FORECAST_HORIZON} whole hours after "
                    f"issue_time, got {delta:g}", line=lineno)
            values = [float(c) for c in row[2:]]
            groups.setdefault(issue, {})[int(delta)] = values
        forecasts = []
        for issue in sorted(groups):
            rows = groups[issue]
            if sorted(rows) != list(range(1, FORECAST_HORIZON + 1)):
                raise IngestError(
                    f"forecast issued {format_timestamp(issue)} has "
                    f"{len(rows)} hourly rows, expected {FORECAST_HORIZON}")
            cols = list(zip(*[rows[k] for k in range(1, FORECAST_HORIZON + 1)]))
            forecasts.append(OfficialForecast(
                issue_time=issue,
                wind_speed=tuple(cols[0]),
                wind_direction=tuple(cols[1]),
                pluviometry=tuple(cols[2]),
                solar_irradiance=tuple(cols[3]),
                temperature=tuple(cols[4]),
            ))
        return forecasts
    finally:
        if close:
            handle.close()


@dataclass(frozen=True)
class Gap:
    """A run of missing values left unfilled, with its reason."""

    start: datetime
    end: datetime
    n_missing: int
    reason: str  # "too_long" | "boundary"


@dataclass(frozen=True)
class ImputationResult:
    series: list  # (timestamp, value-or-None, imputed_flag) triples
    gaps: list    # unfilled Gap descriptors


def impute_linear(series: Sequence[tuple], max_gap_hours: float) -> ImputationResult:
    """Fill interior gaps up to max_gap_hours by linear interpolation in time.

    ``series`` is time-sorted (timestamp, optional value) pairs. Longer gaps
    and boundary gaps stay missing and are reported. A gap's length is the
    missing time span between its two present anchors, i.e. anchor distance
    minus one nominal step.
    """
    if not series:
        raise IngestError("empty series, nothing to anchor interpolation")
    present = [i for i, (_, v) in enumerate(series) if v is not None]
    if not present:
        raise IngestError("all values missing, nothing to anchor interpolation")

    deltas = sorted((series[i + 1][0] - series[i][0]).total_seconds()
                    for i in range(len(series) - 1))
    step_hours = (deltas[len(deltas) // 2] / 3600.0) if deltas else 1.0

    out = [(ts, value, False) for ts, value in series]
    gaps = []

    def record_gap(lo: int, hi: int, reason: str) -> None:
        gaps.append(Gap(start=series[lo][0], end=series[hi][0],
                        n_missing=hi - lo + 1, reason=reason))

    if present[0] > 0:
        record_gap(0, present[0] - 1, "boundary")
    if present[-1] < len(series) - 1:
        record_gap(present[-1] + 1, len(series) - 1, "boundary")

    for a, b in zip(present, present[1:]):
        if b == a + 1:
            continue
        t_a, v_a = series[a]
        t_b, v_b = series[b]
        span_hours = (t_b - t_a).total_seconds() / 3600.0 - step_hours
        if span_hours > max_gap_hours:
            record_gap(a + 1, b - 1, "too_long")
            continue
        for i in range(a + 1, b):
            frac = ((series[i][0] - t_a).total_seconds()
                    / (t_b - t_a).total_seconds())
            out[i] = (series[i][0], v_a + frac * (v_b - v_a), True)
    return ImputationResult(series=out, gaps=gaps)


def vector_average(samples: Sequence[tuple]) -> tuple:
    """Average (speed, direction) samples by Cartesian components.

    Components are u = s*sin(theta), v = s*cos(theta); opposing winds cancel.
    Returns (speed, direction degrees in [0, 360)); a near-zero resultant
    gets the canonical direction 0.0.
    """
    if not samples:
        raise IngestError("vector_average of empty sample set")
    u = v = 0.0
    for speed, direction in samples:
        rad = math.radians(direction)
        u += speed * math.sin(rad)
        v += speed * math.cos(rad)
    u /= len(samples)
    v /= len(samples)
    speed = math.hypot(u, v)
    if speed < ZERO_SPEED_EPS:
        return speed, 0.0
    return speed, wrap_direction(math.degrees(math.atan2(u, v)))


def encode_cyclical(value: float, period: float) -> tuple:
    """(cos, sin) of a periodic quantity; removes the wraparound seam."""
    if period <= 0:
        raise ValueError("period must be positive")
    phase = 2.0 * math.pi * value / period
    return math.cos(phase), math.sin(phase)


def decode_direction(cos_component: float, sin_component: float) -> float:
    """Angle in degrees [0, 360) from a (cos, sin) pair.

    The pair need not be normalized; regression outputs drift off the unit
    circle and atan2 is scale-invariant along a ray.
    """
    if abs(cos_component) < 1e-12 and abs(sin_component) < 1e-12:
        raise ValueError("direction undefined for near-zero (cos, sin) pair")
    return wrap_direction(math.degrees(math.atan2(sin_component, cos_component)))


def _floor_hour(ts: datetime) -> datetime:
    return ts.replace(minute=0, second=0, microsecond=0)


def _mean_or_none(values: list) -> Optional[float]:
    return sum(values) / len(values) if values else None


def aggregate_hourly(records: Sequence[RawSensorRecord]) -> list[HourlyWeather]:
    """Collapse minute records into one HourlyWeather per clock hour.

    Wind uses the vector average over minutes where both speed and direction
    are present; the other fields use arithmetic means of present values.
    Hours inside the record span with no contributing minutes are emitted
    with missing fields so impute_hourly can fill them later.
    """
    if not records:
        return []
    buckets: dict[datetime, list[RawSensorRecord]] = {}
    for rec in records:
        buckets.setdefault(_floor_hour(rec.timestamp), []).append(rec)
    first = min(buckets)
    last = max(buckets)
    out = []
    hour = first
    while hour <= last:
        group = buckets.get(hour, [])
        wind = [(r.wind_speed, r.wind_direction) for r in group
                if r.wind_speed is not None and r.wind_direction is not None]
        if wind:
            speed, direction = vector_average(wind)
        else:
            speed = direction = None
        out.append(HourlyWeather(
            timestamp=hour,
            wind_speed=speed,
            wind_direction=direction,
            solar_irradiance=_mean_or_none(
                [r.solar_irradiance for r in group if r.solar_irradiance is not None]),
            temperature=_mean_or_none(
                [r.temperature for r in group if r.temperature is not None]),
            pluviometry=_mean_or_none(
                [r.pluviometry for r in group if r.pluviometry is not None]),
        ))
        hour += timedelta(hours=1)
    return out


def impute_hourly(hours: Sequence[HourlyWeather],
                  max_gap_hours: float = 6.0) -> list[HourlyWeather]:
    """Fill hourly gaps per field; wind is interpolated in component space.

    Scalar fields interpolate linearly. Wind interpolates the (u, v)
    components so that direction wraps correctly, then converts back to
    (speed, direction). Gaps longer than max_gap_hours stay missing.
    """
    if not hours:
        return []
    timestamps = [h.timestamp for h in hours]

    def fill_scalar(values):
        if all(v is None for v in values):
            return values, [False] * len(values)
        result = impute_linear(list(zip(timestamps, values)), max_gap_hours)
        return ([v for _, v, _ in result.series],
                [flag for _, _, flag in result.series])

    def component(h: HourlyWeather, fn) -> Optional[float]:
        if h.wind_speed is None or h.wind_direction is None:
            return None
        return h.wind_speed * fn(math.radians(h.wind_direction))

    u_vals, u_flags = fill_scalar([component(h, math.sin) for h in hours])
    v_vals, _ = fill_scalar([component(h, math.cos) for h in hours])
    irr, irr_flags = fill_scalar([h.solar_irradiance for h in hours])
    temp, temp_flags = fill_scalar([h.temperature for h in hours])
    plu, plu_flags = fill_scalar([h.pluviometry for h in hours])

    out = []
    for i, h in enumerate(hours):
        speed, direction = h.wind_speed, h.wind_direction
        if speed is None and u_flags[i]:
            speed = math.hypot(u_vals[i], v_vals[i])
            direction = (0.0 if speed < ZERO_SPEED_EPS
                         else wrap_direction(
                             math.degrees(math.atan2(u_vals[i], v_vals[i]))))
        out.append(HourlyWeather(
            timestamp=h.timestamp,
            wind_speed=speed,
            wind_direction=direction,
            solar_irradiance=irr[i],
            temperature=temp[i],
            pluviometry=plu[i],
            imputed=h.imputed or u_flags[i] or irr_flags[i]
            or temp_flags[i] or plu_flags[i],
        ))
    return out


def hourly_to_csv(hours: Iterable[HourlyWeather], path: str) -> None:
    """Write hourly records; unfilled gaps serialize as empty cells."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(SENSOR_HEADER + ["imputed"])
        for h in hours:
            writer.writerow([
                format_timestamp(h.timestamp),
                "" if h.wind_speed is None else repr(float(h.wind_speed)),
                "" if h.wind_direction is None else repr(float(h.wind_direction)),
                "" if h.solar_irradiance is None else repr(float(h.solar_irradiance)),
                "" if h.temperature is None else repr(float(h.temperature)),
                "" if h.pluviometry is None else repr(float(h.pluviometry)),
                "1" if h.imputed else "0",
            ])


def hourly_from_csv(path: str) -> list[HourlyWeather]:
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if header != SENSOR_HEADER + ["imputed"]:
            raise IngestError(f"bad hourly header {header!r}", line=1)
        out = []
        for row in reader:
            out.append(HourlyWeather(
                timestamp=parse_timestamp(row[0]),
                wind_speed=float(row[1]) if row[1] else None,
                wind_direction=float(row[2]) if row[2] else None,
                solar_irradiance=float(row[3]) if row[3] else None,
                temperature=float(row[4]) if row[4] else None,
                pluviometry=float(row[5]) if row[5] else None,
                imputed=row[6] == "1",
            ))
        return out
