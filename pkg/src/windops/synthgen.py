"""Synthetic minute-level weather and lagged noisy official forecasts.

The weather process is a regime-switching AR(1): a prevailing northerly
regime and occasional calm southerly spells that produce temporally
clustered dangerous hours (the interesting case for a three-hour-lookahead
operation). The official forecast emulator degrades the truth with an issue
lag plus bias and horizon-growing noise, so a fresh on-site model can beat
it at short leads, which is the premise the whole pipeline tests.

All draws come from seeded generators in a fixed order; identical configs
produce identical worlds.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Optional, Sequence

import numpy as np

from .ingest import (FORECAST_HORIZON, HourlyWeather, OfficialForecast,
                     RawSensorRecord)
from .scenario import classify_scenario, is_dangerous

__all__ = ["GeneratorConfig", "generate_weather", "generate_hourly_truth",
           "generate_official_forecast", "DangerRateError"]

_START_DEFAULT = datetime(2021, 1, 1, tzinfo=timezone.utc)
_TUNE_ATTEMPTS = 12


class DangerRateError(RuntimeError):
    def __init__(self, target: float, achieved: float):
        self.target = target
        self.achieved = achieved
        super().__init__(
            f"could not reach dangerous-hour rate {target:g} "
            f"(achieved {achieved:g} after {_TUNE_ATTEMPTS} attempts)")


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 0
    duration_hours: int = 2000
    dangerous_rate: float = 0.02

    # hourly speed process
    speed_mean: float = 3.2
    speed_phi: float = 0.92
    speed_noise_sd: float = 0.3
    diurnal_amplitude: float = 0.8

    # hourly direction process
    favorable_direction: float = 20.0
    calm_direction: float = 180.0
    direction_concentration: float = 0.3   # per-hour pull toward regime mean
    direction_noise_sd: float = 6.0        # degrees per hour

    # calm-southerly regime
    calm_speed_mean: float = 0.7
    calm_dwell_hours: float = 8.0
    calm_enter_prob: Optional[float] = None  # None: tuned to dangerous_rate

    # official-forecast emulation
    forecast_issue_lag_hours: int = 6
    forecast_speed_bias: float = 0.4
    forecast_speed_noise_sd: tuple = (0.65, 1.3)      # effective horizons 1, 48
    forecast_direction_bias: float = 8.0
    forecast_direction_noise_sd: tuple = (25.0, 60.0)

    # minute elaboration
    minute_speed_noise_sd: float = 0.12
    minute_direction_noise_sd: float = 3.0
    minute_dropout_rate: float = 0.0

    start_time: datetime = _START_DEFAULT

    def __post_init__(self):
        if not 0.0 < self.dangerous_rate < 0.1:
            raise ValueError(
                f"dangerous_rate must be in (0, 0.1), got {self.dangerous_rate!r}")
        if self.duration_hours < 200:
            raise ValueError(
                f"duration_hours must be >= 200, got {self.duration_hours}")
        if self.start_time.minute or self.start_time.second:
            raise ValueError("start_time must be hour-aligned")


@dataclass
class _HourlyArrays:
    hours: np.ndarray      # epoch hours int64
    speed: np.ndarray
    direction: np.ndarray
    irradiance: np.ndarray
    temperature: np.ndarray
    pluviometry: np.ndarray


def _wrap_degrees(values: np.ndarray) -> np.ndarray:
    out = np.mod(values, 360.0)
    out[out == 360.0] = 0.0
    return out


def _season(day_of_year: np.ndarray) -> np.ndarray:
    # peaks near the June solstice
    return 1.0 - 0.35 * (np.cos(2.0 * np.pi * (day_of_year - 172) / 365.0) + 1.0) / 2.0


def _solar_elevation(hour_frac: np.ndarray) -> np.ndarray:
    return np.sin(np.pi * (hour_frac - 6.0) / 12.0) * ((hour_frac > 6.0)
                                                       & (hour_frac < 18.0))


def _simulate_hourly(config: GeneratorConfig, enter_prob: float,
                     rng: np.random.Generator) -> _HourlyArrays:
    n = config.duration_hours
    start_hour = int(config.start_time.timestamp() // 3600)
    hours = start_hour + np.arange(n, dtype=np.int64)
    hod = (hours % 24).astype(np.float64)
    dt64 = (hours * 3600).astype("datetime64[s]")
    doy = ((dt64.astype("datetime64[D]")
            - dt64.astype("datetime64[Y]")).astype(np.int64) + 1)
    doy = np.minimum(doy, 365).astype(np.float64)
    season = _season(doy)

    exit_prob = 1.0 / max(config.calm_dwell_hours, 1.0)
    # draw order: regime uniforms, speed noise, direction noise, cloud noise,
    # temperature noise, rain uniforms, rain intensities
    regime_u = rng.uniform(size=n)
    speed_eps = rng.normal(size=n)
    dir_eps = rng.normal(size=n)
    cloud_eps = rng.normal(size=n)
    temp_eps = rng.normal(size=n)
    rain_u = rng.uniform(size=n)
    rain_gamma = rng.gamma(shape=1.6, scale=1.2, size=n)

    calm = np.zeros(n, dtype=bool)
    state = False
    for i in range(n):
        if state:
            if regime_u[i] < exit_prob:
                state = False
        else:
            if regime_u[i] < enter_prob:
                state = True
        calm[i] = state

    diurnal = config.diurnal_amplitude * np.sin(2.0 * np.pi * (hod - 3.0) / 24.0)
    mean = np.where(calm, config.calm_speed_mean, config.speed_mean) + diurnal
    speed = np.empty(n)
    speed[0] = max(mean[0] + config.speed_noise_sd * speed_eps[0], 0.0)
    for i in range(1, n):
        step = (mean[i] + config.speed_phi * (speed[i - 1] - mean[i - 1])
                + config.speed_noise_sd * speed_eps[i])
        speed[i] = max(step, 0.0)

    target_dir = np.where(calm, config.calm_direction,
                          config.favorable_direction)
    direction = np.empty(n)
    direction[0] = target_dir[0]
    pull = config.direction_concentration
    for i in range(1, n):
        delta = (target_dir[i] - direction[i - 1] + 180.0) % 360.0 - 180.0
        step = (direction[i - 1] + pull * delta
                + config.direction_noise_sd * dir_eps[i]) % 360.0
        direction[i] = 0.0 if step == 360.0 else step

    cloud = np.empty(n)
    cloud[0] = 0.45
    for i in range(1, n):
        cloud[i] = min(max(0.45 + 0.85 * (cloud[i - 1] - 0.45)
                           + 0.18 * cloud_eps[i], 0.0), 1.0)
    irradiance = (950.0 * season * _solar_elevation(hod)
                  * (1.0 - 0.65 * cloud))
    irradiance = np.maximum(irradiance, 0.0)

    temp_base = 17.0 + 8.0 * (season - 0.65) / 0.35
    drift = temp_base + 4.5 * np.sin(2.0 * np.pi * (hod - 9.0) / 24.0)
    temperature = np.empty(n)
    temperature[0] = drift[0]
    for i in range(1, n):
        temperature[i] = (drift[i] + 0.75 * (temperature[i - 1] - drift[i - 1])
                          + 0.6 * temp_eps[i])

    raining = np.zeros(n, dtype=bool)
    wet = False
    for i in range(n):
        if wet:
            if rain_u[i] < 0.25:
                wet = False
        else:
            if rain_u[i] < 0.008:
                wet = True
        raining[i] = wet
    pluviometry = np.where(raining, rain_gamma, 0.0)

    return _HourlyArrays(hours=hours, speed=speed, direction=direction,
                         irradiance=irradiance, temperature=temperature,
                         pluviometry=pluviometry)


def _dangerous_fraction(arrays: _HourlyArrays) -> float:
    flags = [is_dangerous(classify_scenario(float(s), float(d)))
             for s, d in zip(arrays.speed, arrays.direction)]
    return sum(flags) / len(flags)


def _tuned_hourly(config: GeneratorConfig) -> _HourlyArrays:
    if config.calm_enter_prob is not None:
        rng = np.random.default_rng([config.seed, 1000])
        return _simulate_hourly(config, config.calm_enter_prob, rng)
    # initial guess: stationary calm share ~ rate / P(danger | calm)
    enter = config.dangerous_rate / 0.65 / config.calm_dwell_hours
    achieved = 0.0
    for attempt in range(_TUNE_ATTEMPTS):
        rng = np.random.default_rng([config.seed, 1000 + attempt])
        arrays = _simulate_hourly(config, enter, rng)
        achieved = _dangerous_fraction(arrays)
        if abs(achieved - config.dangerous_rate) <= 0.5 * config.dangerous_rate:
            return arrays
        if achieved == 0.0:
            ratio = 3.0
        else:
            # damped multiplicative step so short noisy samples cannot throw
            # the dwell tuning into oscillation
            ratio = min(max(config.dangerous_rate / achieved, 0.3), 3.0)
        enter = min(max(enter * ratio, 1e-7), 0.25)
    raise DangerRateError(config.dangerous_rate, achieved)


def _arrays_to_hourly(arrays: _HourlyArrays) -> list:
    out = []
    for i in range(len(arrays.hours)):
        out.append(HourlyWeather(
            timestamp=datetime.fromtimestamp(int(arrays.hours[i]) * 3600,
                                             tz=timezone.utc),
            wind_speed=float(arrays.speed[i]),
            wind_direction=float(arrays.direction[i]),
            solar_irradiance=float(arrays.irradiance[i]),
            temperature=float(arrays.temperature[i]),
            pluviometry=float(arrays.pluviometry[i]),
        ))
    return out


def generate_hourly_truth(config: GeneratorConfig) -> list:
    """The latent hourly world (HourlyWeather records), before minute noise."""
    return _arrays_to_hourly(_tuned_hourly(config))


def generate_weather(config: GeneratorConfig) -> list:
    """Minute-level RawSensorRecord stream for the configured world."""
    arrays = _tuned_hourly(config)
    rng = np.random.default_rng([config.seed, 3000])
    n = len(arrays.hours)
    minutes = np.arange(60, dtype=np.float64)
    n_total = n * 60

    # draw order: speed, direction, irradiance, temperature, dropout
    speed_eps = rng.normal(size=n_total).reshape(n, 60)
    dir_eps = rng.normal(size=n_total).reshape(n, 60)
    irr_eps = rng.normal(size=n_total).reshape(n, 60)
    temp_eps = rng.normal(size=n_total).reshape(n, 60)
    dropout = (rng.uniform(size=n_total).reshape(n, 60)
               < config.minute_dropout_rate)

    speed = np.maximum(arrays.speed[:, None]
                       + config.minute_speed_noise_sd * speed_eps, 0.0)
    direction = _wrap_degrees(arrays.direction[:, None]
                              + config.minute_direction_noise_sd * dir_eps)

    hod = (arrays.hours % 24).astype(np.float64)
    hour_frac = hod[:, None] + minutes[None, :] / 60.0
    dt64 = (arrays.hours * 3600).astype("datetime64[s]")
    doy = ((dt64.astype("datetime64[D]")
            - dt64.astype("datetime64[Y]")).astype(np.int64) + 1)
    doy = np.minimum(doy, 365).astype(np.float64)
    elev = _solar_elevation(hour_frac)
    with np.errstate(divide="ignore", invalid="ignore"):
        cloud_factor = np.where(
            _solar_elevation(hod) > 0.0,
            arrays.irradiance / np.maximum(950.0 * _season(doy)
                                           * _solar_elevation(hod), 1e-9),
            0.35)
    irradiance = 950.0 * _season(doy)[:, None] * elev * cloud_factor[:, None]
    irradiance = np.maximum(irradiance * (1.0 + 0.02 * irr_eps), 0.0)
    irradiance[elev <= 0.0] = 0.0

    temperature = arrays.temperature[:, None] + 0.15 * temp_eps
    pluviometry = np.repeat(arrays.pluviometry[:, None] / 60.0, 60, axis=1)

    base_minute = int(arrays.hours[0]) * 60
    out = []
    for i in range(n):
        for m in range(60):
            ts = datetime.fromtimestamp((base_minute + i * 60 + m) * 60,
                                        tz=timezone.utc)
            if dropout[i, m]:
                out.append(RawSensorRecord(timestamp=ts))
                continue
            out.append(RawSensorRecord(
                timestamp=ts,
                wind_speed=float(speed[i, m]),
                wind_direction=float(direction[i, m]),
                solar_irradiance=float(irradiance[i, m]),
                temperature=float(temperature[i, m]),
                pluviometry=float(pluviometry[i, m]),
            ))
    return out


def generate_official_forecast(truth: Sequence[HourlyWeather],
                               config: GeneratorConfig) -> list:
    """Twice-daily 48-hour issuances degraded by lag, bias, and noise.

    The forecast for valid time T+k behaves like a dynamical model started
    at T - lag: its noise grows with the effective horizon k + lag. With all
    noise, bias, and lag at zero the output equals the truth. Issuances
    whose 48-hour window would run past the truth are dropped (the stream's
    coverage truncates early).
    """
    if not truth:
        return []
    rng = np.random.default_rng([config.seed, 2000])
    by_hour = {int(rec.timestamp.timestamp() // 3600): rec for rec in truth}
    first = min(by_hour)
    last = max(by_hour)

    sd1_s, sd48_s = config.forecast_speed_noise_sd
    sd1_d, sd48_d = config.forecast_direction_noise_sd
    lag = config.forecast_issue_lag_hours

    issues = []
    hour = first
    while hour <= last - FORECAST_HORIZON:
        if hour % 24 in (6, 18):
            issues.append(hour)
        hour += 1

    out = []
    for issue in issues:
        speeds, dirs, plus, irrs, temps = [], [], [], [], []
        for k in range(1, FORECAST_HORIZON + 1):
            rec = by_hour[issue + k]
            k_eff = min(k + lag, FORECAST_HORIZON)
            frac = (k_eff - 1) / (FORECAST_HORIZON - 1)
            sd_s = sd1_s + (sd48_s - sd1_s) * frac
            sd_d = sd1_d + (sd48_d - sd1_d) * frac
            # draw order per entry: speed, direction, pluviometry,
            # irradiance, temperature; all sds scale with the speed noise so
            # a zero-noise config reproduces the truth exactly
            eps = rng.normal(size=5)
            speeds.append(float(max(rec.wind_speed + config.forecast_speed_bias
                                    + sd_s * eps[0], 0.0)))
            fc_dir = (rec.wind_direction + config.forecast_direction_bias
                      + sd_d * eps[1]) % 360.0
            dirs.append(0.0 if fc_dir == 360.0 else float(fc_dir))
            plus.append(float(max(rec.pluviometry + 0.15 * sd_s * eps[2], 0.0)))
            irrs.append(float(max(rec.solar_irradiance
                                  + 40.0 * sd_s * frac * eps[3], 0.0)))
            temps.append(float(rec.temperature
                               + 1.2 * sd_s * (0.4 + frac) * eps[4]))
        out.append(OfficialForecast(
            issue_time=datetime.fromtimestamp(issue * 3600, tz=timezone.utc),
            wind_speed=tuple(speeds), wind_direction=tuple(dirs),
            pluviometry=tuple(plus), solar_irradiance=tuple(irrs),
            temperature=tuple(temps)))
    return out
