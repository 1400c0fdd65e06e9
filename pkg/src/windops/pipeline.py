"""End-to-end orchestration: ingest chain, training, evaluation, backtest,
and artifact (de)serialization shared by the CLI, the HTTP service, and the
test harness.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from . import evalsim, policy as policy_mod
from .ensemble import (MEMBERS, MemberPredictions, StackedEnsemble,
                       collect_member_predictions, ensemble_predictions,
                       train_stacker)
from .features import (Dataset, build_dataset, chronological_split, epoch_hour)
from .ingest import (HourlyWeather, OfficialForecast, RawSensorRecord,
                     aggregate_hourly, impute_hourly, impute_linear)
from .models.base import FAMILIES, TARGETS
from .models.search import FAST_GRIDS, LeadTimeModelBank, TABLE_GRIDS, train_bank
from .policy import (PolicyTree, actual_scenarios, build_policy_dataset,
                     build_reward_matrix, prescribe_batch, render_tree_text,
                     train_policy_tree, tune_policy_tree)
from .scenario import Scenario, classify_scenario, is_dangerous

__all__ = ["PipelineConfig", "TrainedArtifacts", "prepare_hourly",
           "train_pipeline", "train_policy_grid", "evaluate_models",
           "run_backtest", "save_artifacts", "load_artifacts"]

# Table-5-equivalent health-cost grid (total FN cost = 2000 + H)
HEALTH_COST_GRID = (2000.0, 4000.0, 8000.0, 13000.0, 18000.0)


@dataclass
class PipelineConfig:
    leads: tuple = (1, 2, 3)
    families: tuple = FAMILIES
    split_fractions: tuple = (0.6, 0.2, 0.2)
    seed: int = 0
    grid: str = "fast"                  # "fast" or "table"
    grid_overrides: Optional[dict] = None  # family -> explicit grid
    health_cost: float = 8000.0
    health_cost_grid: tuple = HEALTH_COST_GRID
    policy_lead: int = 3
    policy_depth_grid: tuple = (2, 3, 4, 5)
    policy_min_leaf_grid: tuple = (20,)
    minute_max_gap_hours: float = 2.0
    hourly_max_gap_hours: float = 6.0

    def __post_init__(self):
        if self.grid not in ("fast", "table"):
            raise ValueError(f"grid must be 'fast' or 'table', got {self.grid!r}")
        if self.policy_lead not in self.leads:
            raise ValueError(
                f"policy_lead {self.policy_lead} not in leads {self.leads}")
        unknown = set(self.families) - set(FAMILIES)
        if unknown:
            raise ValueError(f"unknown families {sorted(unknown)}")

    def family_grid(self, family: str) -> Mapping:
        if self.grid_overrides and family in self.grid_overrides:
            return self.grid_overrides[family]
        return (FAST_GRIDS if self.grid == "fast" else TABLE_GRIDS)[family]


def prepare_hourly(records: Sequence[RawSensorRecord],
                   minute_max_gap_hours: float = 2.0,
                   hourly_max_gap_hours: float = 6.0) -> list:
    """Minute imputation, hourly aggregation, hourly imputation."""
    fields = ("wind_speed", "wind_direction", "solar_irradiance",
              "temperature", "pluviometry")
    columns = {name: [getattr(r, name) for r in records] for name in fields}
    if any(any(v is None for v in vals) for vals in columns.values()):
        timestamps = [r.timestamp for r in records]
        filled = {}
        for name in fields:
            vals = columns[name]
            if all(v is None for v in vals) or not any(v is None for v in vals):
                filled[name] = vals
                continue
            result = impute_linear(list(zip(timestamps, vals)),
                                   minute_max_gap_hours)
            filled[name] = [v for _, v, _ in result.series]
        records = [RawSensorRecord(timestamp=r.timestamp,
                                   **{name: filled[name][i] for name in fields})
                   for i, r in enumerate(records)]
    hours = aggregate_hourly(records)
    return impute_hourly(hours, hourly_max_gap_hours)


@dataclass
class TrainedArtifacts:
    config: PipelineConfig
    banks: dict                       # family -> LeadTimeModelBank
    stacker: StackedEnsemble
    member_val: dict                  # lead -> MemberPredictions
    member_test: dict                 # lead -> MemberPredictions
    policy_trees: dict = field(default_factory=dict)  # health cost -> PolicyTree

    def policy_tree_for(self, health_cost: float) -> tuple:
        """(tree, its trained health cost) nearest to the requested cost."""
        if not self.policy_trees:
            raise KeyError("no policy trees trained")
        nearest = min(self.policy_trees, key=lambda h: (abs(h - health_cost), h))
        return self.policy_trees[nearest], nearest


def train_pipeline(hourly: Sequence[HourlyWeather],
                   forecasts: Sequence[OfficialForecast],
                   config: PipelineConfig) -> TrainedArtifacts:
    """Datasets, per-family banks, member rows, and the stacked ensemble."""
    datasets = build_dataset(hourly, forecasts, config.leads)
    train_by_lead, val_by_lead, test_by_lead = {}, {}, {}
    for lead, dataset in datasets.items():
        train_by_lead[lead], val_by_lead[lead], test_by_lead[lead] = (
            chronological_split(dataset, config.split_fractions))
    banks = {}
    for family in config.families:
        banks[family] = train_bank(train_by_lead, val_by_lead, family,
                                   grid=config.family_grid(family),
                                   seed=config.seed)
    member_val = {lead: collect_member_predictions(banks, val_by_lead[lead])
                  for lead in sorted(val_by_lead)}
    member_test = {lead: collect_member_predictions(banks, test_by_lead[lead])
                   for lead in sorted(test_by_lead)}
    stacker = train_stacker(member_val)
    return TrainedArtifacts(config=config, banks=banks, stacker=stacker,
                            member_val=member_val, member_test=member_test)


def train_policy_grid(artifacts: TrainedArtifacts,
                      health_costs: Optional[Sequence[float]] = None,
                      tune: bool = True) -> dict:
    """Policy trees over the health-cost grid, fit on validation rows."""
    config = artifacts.config
    rows = artifacts.member_val[config.policy_lead]
    costs = tuple(health_costs) if health_costs else config.health_cost_grid
    X = rows.flatten()
    for health_cost in costs:
        rewards = build_reward_matrix(actual_scenarios(rows), health_cost)
        if tune and len(rows) >= 5 * max(config.policy_min_leaf_grid):
            tree = tune_policy_tree(X, rewards, config.policy_depth_grid,
                                    config.policy_min_leaf_grid)
        else:
            tree = train_policy_tree(X, rewards,
                                     max_depth=max(config.policy_depth_grid),
                                     min_leaf=min(config.policy_min_leaf_grid))
        artifacts.policy_trees[float(health_cost)] = tree
    return artifacts.policy_trees


def _circular_errors(pred_dirs: np.ndarray, true_dirs: np.ndarray) -> np.ndarray:
    raw = np.abs(pred_dirs - true_dirs)
    return np.minimum(raw, 360.0 - raw)


def _direction_of(cos: np.ndarray, sin: np.ndarray) -> np.ndarray:
    out = np.degrees(np.arctan2(sin, cos)) % 360.0
    out[out == 360.0] = 0.0
    return out


def evaluate_models(artifacts: TrainedArtifacts,
                    split: str = "test") -> list:
    """Per-lead speed and direction MAE / ES85 for every member + ensemble.

    Rows are dicts shaped like the published per-lead result tables.
    """
    rows_by_lead = (artifacts.member_test if split == "test"
                    else artifacts.member_val)
    out = []
    for lead in sorted(rows_by_lead):
        rows = rows_by_lead[lead]
        true_speed = rows.actuals[:, 0]
        true_dir = _direction_of(rows.actuals[:, 1], rows.actuals[:, 2])
        sources = {member: (rows.member_column(member, "speed"),
                            _direction_of(rows.member_column(member, "dir_cos"),
                                          rows.member_column(member, "dir_sin")))
                   for member in MEMBERS}
        ens_speed, ens_dir = ensemble_predictions(artifacts.stacker, rows)
        sources["ensemble"] = (ens_speed, ens_dir)
        for name, (speed, direction) in sources.items():
            speed_err = (speed - true_speed).tolist()
            dir_err = _circular_errors(direction, true_dir).tolist()
            out.append({
                "lead_time": lead,
                "model": name,
                "speed_mae": evalsim.mae(speed_err),
                "speed_es85": evalsim.expected_shortfall(speed_err),
                "direction_mae": evalsim.mae(dir_err),
                "direction_es85": evalsim.expected_shortfall(dir_err),
                "rows": len(rows),
            })
    return out


def _scenarios_from(speeds: np.ndarray, directions: np.ndarray) -> list:
    return [classify_scenario(max(float(s), 0.0), float(d))
            for s, d in zip(speeds, directions)]


def _aligned_lookahead(rows_by_lead: Mapping[int, MemberPredictions],
                       hourly_by_hour: Mapping[int, HourlyWeather],
                       scenario_source) -> tuple:
    """Per-hour (next-3h predicted scenarios, actual scenario) sequences.

    Decision hours are base times where lead 1..3 rows all exist and the
    actual conditions of the hour itself are known.
    """
    common = None
    for lead in (1, 2, 3):
        times = set(int(t) for t in rows_by_lead[lead].base_times)
        common = times if common is None else common & times
    common &= {h for h, rec in hourly_by_hour.items() if rec.is_complete}
    hours = sorted(common)
    index = {lead: {int(t): i for i, t in
                    enumerate(rows_by_lead[lead].base_times)}
             for lead in (1, 2, 3)}
    scenarios_by_lead = {lead: scenario_source(rows_by_lead[lead])
                         for lead in (1, 2, 3)}
    predictions = []
    actuals = []
    for t in hours:
        predictions.append(tuple(scenarios_by_lead[lead][index[lead][t]]
                                 for lead in (1, 2, 3)))
        rec = hourly_by_hour[t]
        actuals.append(classify_scenario(rec.wind_speed, rec.wind_direction))
    return predictions, actuals, hours


def _baseline_scenarios(rows: MemberPredictions) -> list:
    return _scenarios_from(rows.member_column("official_baseline", "speed"),
                           _direction_of(
                               rows.member_column("official_baseline", "dir_cos"),
                               rows.member_column("official_baseline", "dir_sin")))


def run_backtest(artifacts: TrainedArtifacts,
                 hourly: Sequence[HourlyWeather],
                 health_cost: Optional[float] = None) -> dict:
    """State-machine simulation plus hourly decision comparison on the test
    split; returns a JSON-ready report."""
    config = artifacts.config
    health_cost = float(health_cost if health_cost is not None
                        else config.health_cost)
    for lead in (1, 2, 3):
        if lead not in artifacts.member_test:
            raise ValueError(
                f"backtest needs leads 1..3 trained, missing {lead}")
    hourly_by_hour = {epoch_hour(rec.timestamp): rec for rec in hourly}

    def ensemble_scenarios(rows: MemberPredictions) -> list:
        speeds, dirs = ensemble_predictions(artifacts.stacker, rows)
        return _scenarios_from(speeds, dirs)

    report: dict = {"health_cost": health_cost, "state_machine": {},
                    "hourly": {}}
    for name, source in (("ensemble", ensemble_scenarios),
                         ("baseline", _baseline_scenarios)):
        predictions, actuals, hours = _aligned_lookahead(
            artifacts.member_test, hourly_by_hour, source)
        sim, ledger = evalsim.simulate_operations(predictions, actuals,
                                                  health_cost)
        entry = sim.to_dict()
        entry["first_hour"] = hours[0] if hours else None
        entry["ledger"] = ledger
        report["state_machine"][name] = entry
    base_sm = report["state_machine"]["baseline"]
    model_sm = report["state_machine"]["ensemble"]
    if base_sm["false_positives"] > 0 and base_sm["false_negatives"] > 0:
        savings, reduction = evalsim.trade_off_metrics(
            (model_sm["false_positives"], model_sm["false_negatives"]),
            (base_sm["false_positives"], base_sm["false_negatives"]))
        model_sm["cost_savings"] = savings
        model_sm["pollution_reduction"] = reduction

    # hourly decision comparison at the policy lead, Table-5 style
    rows = artifacts.member_test[config.policy_lead]
    actual = actual_scenarios(rows)
    decisions = {
        "baseline": [is_dangerous(s) for s in _baseline_scenarios(rows)],
        "ensemble": [is_dangerous(s) for s in ensemble_scenarios(rows)],
    }
    X = rows.flatten()
    for trained_cost, tree in sorted(artifacts.policy_trees.items()):
        acts = prescribe_batch(tree, X)
        decisions[f"policy_h{int(trained_cost)}"] = [
            a == policy_mod.REDUCE for a in acts]
    base_counts = evalsim.confusion_counts(decisions["baseline"], actual)
    for name, decide in decisions.items():
        fp, fn, tp, tn = evalsim.confusion_counts(decide, actual)
        entry = {"false_positives": fp, "false_negatives": fn,
                 "true_positives": tp, "true_negatives": tn,
                 "hours": len(actual), "lead_time": config.policy_lead}
        if base_counts[0] > 0 and base_counts[1] > 0:
            savings, reduction = evalsim.trade_off_metrics((fp, fn),
                                                           base_counts)
            entry["cost_savings"] = savings
            entry["pollution_reduction"] = reduction
            entry["cost_savings_pct"] = round(savings * 100.0)
            entry["pollution_reduction_pct"] = round(reduction * 100.0)
        report["hourly"][name] = entry
    return report


# ---------------------------------------------------------------------------
# artifact persistence


def save_artifacts(artifacts: TrainedArtifacts, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    config = artifacts.config
    manifest = {
        "leads": list(config.leads),
        "families": list(config.families),
        "split_fractions": list(config.split_fractions),
        "seed": config.seed,
        "grid": config.grid,
        "health_cost": config.health_cost,
        "health_cost_grid": list(config.health_cost_grid),
        "policy_lead": config.policy_lead,
        "policy_depth_grid": list(config.policy_depth_grid),
        "policy_min_leaf_grid": list(config.policy_min_leaf_grid),
        "members": list(MEMBERS),
        "policy_trees": sorted(artifacts.policy_trees),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
    for family, bank in artifacts.banks.items():
        with open(os.path.join(out_dir, f"bank_{family}.json"), "w") as handle:
            json.dump(bank.to_dict(), handle)
    with open(os.path.join(out_dir, "stacker.json"), "w") as handle:
        json.dump(artifacts.stacker.to_dict(), handle)
    for lead, rows in artifacts.member_val.items():
        rows.to_csv(os.path.join(out_dir, f"member_val_lead{lead}.csv"))
    for lead, rows in artifacts.member_test.items():
        rows.to_csv(os.path.join(out_dir, f"member_test_lead{lead}.csv"))
    for health_cost, tree in artifacts.policy_trees.items():
        stem = os.path.join(out_dir, f"policy_h{int(health_cost)}")
        with open(stem + ".json", "w") as handle:
            json.dump(tree.to_dict(), handle, indent=2)
        with open(stem + ".txt", "w") as handle:
            handle.write(render_tree_text(tree))


def load_artifacts(models_dir: str) -> TrainedArtifacts:
    with open(os.path.join(models_dir, "manifest.json")) as handle:
        manifest = json.load(handle)
    config = PipelineConfig(
        leads=tuple(manifest["leads"]),
        families=tuple(manifest["families"]),
        split_fractions=tuple(manifest["split_fractions"]),
        seed=manifest["seed"],
        grid=manifest["grid"],
        health_cost=manifest["health_cost"],
        health_cost_grid=tuple(manifest["health_cost_grid"]),
        policy_lead=manifest["policy_lead"],
        policy_depth_grid=tuple(manifest["policy_depth_grid"]),
        policy_min_leaf_grid=tuple(manifest["policy_min_leaf_grid"]))
    banks = {}
    for family in config.families:
        with open(os.path.join(models_dir, f"bank_{family}.json")) as handle:
            banks[family] = LeadTimeModelBank.from_dict(json.load(handle))
    with open(os.path.join(models_dir, "stacker.json")) as handle:
        stacker = StackedEnsemble.from_dict(json.load(handle))
    member_val = {lead: MemberPredictions.from_csv(
        os.path.join(models_dir, f"member_val_lead{lead}.csv"))
        for lead in config.leads}
    member_test = {lead: MemberPredictions.from_csv(
        os.path.join(models_dir, f"member_test_lead{lead}.csv"))
        for lead in config.leads}
    policy_trees = {}
    for health_cost in manifest.get("policy_trees", []):
        path = os.path.join(models_dir, f"policy_h{int(health_cost)}.json")
        with open(path) as handle:
            policy_trees[float(health_cost)] = PolicyTree.from_dict(
                json.load(handle))
    return TrainedArtifacts(config=config, banks=banks, stacker=stacker,
                            member_val=member_val, member_test=member_test,
                            policy_trees=policy_trees)
