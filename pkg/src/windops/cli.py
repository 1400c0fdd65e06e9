"""Command-line entry points for the full pipeline.

Typical flow: synth -> ingest -> train -> policy train -> evaluate ->
backtest -> serve. Every command is deterministic under a fixed --seed.
"""

from __future__ import annotations

import csv
import json
import os
import sys

import click

from .ingest import (SENSOR_HEADER, FORECAST_HEADER, format_timestamp,
                     hourly_from_csv, hourly_to_csv, parse_forecast_csv,
                     parse_sensor_csv)
from .pipeline import (PipelineConfig, evaluate_models, load_artifacts,
                       prepare_hourly, run_backtest, save_artifacts,
                       train_pipeline, train_policy_grid)
from .synthgen import (GeneratorConfig, generate_hourly_truth,
                       generate_official_forecast, generate_weather)


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def write_sensor_csv(records, path: str) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(SENSOR_HEADER)
        for r in records:
            writer.writerow([format_timestamp(r.timestamp),
                             _fmt(r.wind_speed), _fmt(r.wind_direction),
                             _fmt(r.solar_irradiance), _fmt(r.temperature),
                             _fmt(r.pluviometry)])


def write_forecast_csv(forecasts, path: str) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(FORECAST_HEADER)
        for fc in forecasts:
            for k in range(len(fc.wind_speed)):
                writer.writerow([
                    format_timestamp(fc.issue_time),
                    format_timestamp(fc.valid_time(k)),
                    repr(float(fc.wind_speed[k])),
                    repr(float(fc.wind_direction[k])),
                    repr(float(fc.pluviometry[k])),
                    repr(float(fc.solar_irradiance[k])),
                    repr(float(fc.temperature[k]))])


def _parse_leads(text: str) -> tuple:
    try:
        leads = tuple(sorted({int(part) for part in text.split(",") if part}))
    except ValueError:
        raise click.BadParameter(f"bad lead list {text!r}")
    if not leads:
        raise click.BadParameter("empty lead list")
    return leads


@click.group()
def main():
    """Pollution-aware plant operations toolkit."""


@main.command()
@click.option("--hours", type=int, default=2000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--dangerous-rate", type=float, default=0.02, show_default=True)
@click.option("--out", "out_dir", required=True,
              type=click.Path(file_okay=False))
def synth(hours, seed, dangerous_rate, out_dir):
    """Generate synthetic sensor and official-forecast CSVs."""
    config = GeneratorConfig(seed=seed, duration_hours=hours,
                             dangerous_rate=dangerous_rate)
    os.makedirs(out_dir, exist_ok=True)
    records = generate_weather(config)
    truth = generate_hourly_truth(config)
    forecasts = generate_official_forecast(truth, config)
    write_sensor_csv(records, os.path.join(out_dir, "sensors.csv"))
    write_forecast_csv(forecasts, os.path.join(out_dir, "forecasts.csv"))
    click.echo(f"wrote {len(records)} minute records and "
               f"{len(forecasts)} forecast issuances to {out_dir}")


@main.command()
@click.option("--sensors", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--minute-max-gap-hours", type=float, default=2.0,
              show_default=True)
@click.option("--hourly-max-gap-hours", type=float, default=6.0,
              show_default=True)
def ingest(sensors, out_path, minute_max_gap_hours, hourly_max_gap_hours):
    """Parse minute sensor data, impute gaps, aggregate to hourly CSV."""
    records = parse_sensor_csv(sensors)
    hourly = prepare_hourly(records, minute_max_gap_hours,
                            hourly_max_gap_hours)
    hourly_to_csv(hourly, out_path)
    n_imputed = sum(1 for h in hourly if h.imputed)
    n_holes = sum(1 for h in hourly if not h.is_complete)
    click.echo(f"wrote {len(hourly)} hourly rows to {out_path} "
               f"({n_imputed} imputed, {n_holes} with unfilled gaps)")


@main.command()
@click.option("--hourly", "hourly_path", required=True,
              type=click.Path(exists=True))
@click.option("--forecasts", "forecasts_path", required=True,
              type=click.Path(exists=True))
@click.option("--out", "models_dir", required=True,
              type=click.Path(file_okay=False))
@click.option("--leads", default="1,2,3", show_default=True)
@click.option("--grid", type=click.Choice(["fast", "table"]), default="fast",
              show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--policy-lead", type=int, default=3, show_default=True)
def train(hourly_path, forecasts_path, models_dir, leads, grid, seed,
          policy_lead):
    """Train per-family model banks and the stacked ensemble."""
    hourly = hourly_from_csv(hourly_path)
    forecasts = parse_forecast_csv(forecasts_path)
    config = PipelineConfig(leads=_parse_leads(leads), grid=grid, seed=seed,
                            policy_lead=policy_lead)
    artifacts = train_pipeline(hourly, forecasts, config)
    save_artifacts(artifacts, models_dir)
    n_models = sum(len(bank.models) for bank in artifacts.banks.values())
    click.echo(f"trained {n_models} models "
               f"({len(artifacts.banks)} families x {len(config.leads)} leads "
               f"x 3 targets) into {models_dir}")


@main.command()
@click.option("--models", "models_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--split", type=click.Choice(["test", "validation"]),
              default="test", show_default=True)
def evaluate(models_dir, out_path, split):
    """Per-lead MAE and expected-shortfall tables for all members."""
    artifacts = load_artifacts(models_dir)
    rows = evaluate_models(artifacts, split=split)
    fields = ["lead_time", "model", "speed_mae", "speed_es85",
              "direction_mae", "direction_es85", "rows"]
    with open(out_path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v)
                             for k, v in row.items()})
    click.echo(f"wrote {len(rows)} metric rows to {out_path}")


@main.group()
def policy():
    """Prescriptive policy-tree commands."""


@policy.command("train")
@click.option("--models", "models_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--health-cost", type=float, default=None,
              help="Extra health cost to train beyond the standard grid.")
@click.option("--tune/--no-tune", default=True, show_default=True,
              help="Cross-validate depth and leaf size before the final fit.")
def policy_train(models_dir, health_cost, tune):
    """Train reward-driven policy trees over the health-cost grid."""
    artifacts = load_artifacts(models_dir)
    costs = list(artifacts.config.health_cost_grid)
    if health_cost is not None and health_cost not in costs:
        costs.append(health_cost)
    train_policy_grid(artifacts, sorted(costs), tune=tune)
    save_artifacts(artifacts, models_dir)
    click.echo(f"trained policy trees for health costs "
               f"{sorted(int(c) for c in artifacts.policy_trees)}")


@main.command()
@click.option("--models", "models_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--hourly", "hourly_path", required=True,
              type=click.Path(exists=True))
@click.option("--health-cost", type=float, default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
def backtest(models_dir, hourly_path, health_cost, out_path):
    """Backtest the operational state machine on the test split."""
    artifacts = load_artifacts(models_dir)
    hourly = hourly_from_csv(hourly_path)
    report = run_backtest(artifacts, hourly, health_cost)
    with open(out_path, "w") as handle:
        json.dump(report, handle, indent=2, sort_keys=True)
    sm = report["state_machine"]["ensemble"]
    click.echo(f"ensemble backtest: {sm['false_positives']} FP hours, "
               f"{sm['false_negatives']} FN hours, "
               f"total cost {sm['total_cost']:.0f} USD "
               f"over {sm['simulated_hours']} hours -> {out_path}")


@main.command()
@click.option("--models", "models_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--hourly", "hourly_path", required=True,
              type=click.Path(exists=True))
@click.option("--forecasts", "forecasts_path", required=True,
              type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=None,
              help="Defaults to $WINDOPS_PORT or 8000.")
def serve(models_dir, hourly_path, forecasts_path, host, port):
    """Serve live forecasts, scenarios, and prescriptions over HTTP."""
    import uvicorn

    from .service import create_app

    if port is None:
        port = int(os.environ.get("WINDOPS_PORT", "8000"))
    app = create_app(models_dir, hourly_path, forecasts_path)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
