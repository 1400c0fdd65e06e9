"""Forecast error metrics, decision confusion counts, and the hourly
operational backtest (normal/reduced production state machine).

Costs follow the plant's accounting: 2000 USD per reduced-production hour
(lost earnings plus anti-odor injection), and 2000 + H per pollution event,
where H is the tunable public-health cost of a false negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .scenario import Scenario, is_dangerous

__all__ = [
    "mae", "expected_shortfall", "angular_error",
    "confusion_counts", "trade_off_metrics",
    "DecisionReport", "simulate_operations", "step_mode",
    "REDUCED_HOURLY_COST",
]

REDUCED_HOURLY_COST = 2000.0


def mae(errors: Sequence[float]) -> float:
    """Mean absolute error."""
    if len(errors) == 0:
        raise ValueError("mae of empty error sequence")
    return sum(abs(e) for e in errors) / len(errors)


def expected_shortfall(errors: Sequence[float], level: float = 0.85) -> float:
    """Mean of the worst (1 - level) fraction of absolute errors.

    The tail size is ceil((1 - level) * n), so a single sample is its own
    shortfall.
    """
    if len(errors) == 0:
        raise ValueError("expected_shortfall of empty error sequence")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level!r}")
    magnitudes = sorted((abs(e) for e in errors), reverse=True)
    # nudge below the float representation so e.g. 0.15 * 20 ceils to 3
    k = max(1, math.ceil((1.0 - level) * len(magnitudes) - 1e-9))
    return sum(magnitudes[:k]) / k


def angular_error(predicted: float, actual: float) -> float:
    """Minimal arc distance between two bearings, in [0, 180] degrees."""
    for value in (predicted, actual):
        if not 0.0 <= value < 360.0:
            raise ValueError(f"direction {value!r} outside [0, 360)")
    raw = abs(predicted - actual)
    return min(raw, 360.0 - raw)


def confusion_counts(decisions: Sequence[bool],
                     actuals: Sequence[Scenario]) -> tuple:
    """(FP, FN, TP, TN) hour counts for reduce decisions vs actual scenarios.

    A decision of True means reduce production. FP: reduced while conditions
    were favorable; FN: ran normally while conditions were dangerous.
    """
    if len(decisions) != len(actuals):
        raise ValueError(
            f"length mismatch: {len(decisions)} decisions vs {len(actuals)} actuals")
    fp = fn = tp = tn = 0
    for reduce, actual in zip(decisions, actuals):
        danger = is_dangerous(actual)
        if reduce and not danger:
            fp += 1
        elif not reduce and danger:
            fn += 1
        elif reduce and danger:
            tp += 1
        else:
            tn += 1
    return fp, fn, tp, tn


def trade_off_metrics(model_counts: tuple, baseline_counts: tuple) -> tuple:
    """(cost_savings, pollution_reduction) fractions vs the baseline.

    cost_savings = 1 - FP_model / FP_baseline and pollution_reduction =
    1 - FN_model / FN_baseline; negative values mean the model does worse
    on that axis. Display rounding to whole percent is the caller's job.
    """
    fp_model, fn_model = model_counts[0], model_counts[1]
    fp_base, fn_base = baseline_counts[0], baseline_counts[1]
    if fp_base <= 0 or fn_base <= 0:
        raise ValueError("baseline FP and FN must both be positive")
    return 1.0 - fp_model / fp_base, 1.0 - fn_model / fn_base


def step_mode(mode: str, lookahead_dangerous: bool,
              actual_dangerous: bool) -> tuple:
    """One hour of the operational state machine.

    Returns (mode_during_hour, pollution_event, mode_after_hour). The plant
    escalates when any of the next three hours is predicted dangerous, and
    de-escalates only when both the lookahead and the current real-time
    conditions are favorable. A dangerous hour reached while still at normal
    production is a pollution event; the plant is forced to reduced
    production from the following hour.
    """
    if mode == "normal" and lookahead_dangerous:
        mode = "reduced"
    elif mode == "reduced" and not lookahead_dangerous and not actual_dangerous:
        mode = "normal"
    event = mode == "normal" and actual_dangerous
    after = "reduced" if event else mode
    return mode, event, after


@dataclass
class DecisionReport:
    """Backtest outcome for one decision source."""

    false_positives: int
    false_negatives: int
    true_positives: int
    true_negatives: int
    reduced_hours: int
    pollution_events: int
    total_cost: float
    health_cost: float
    simulated_hours: int
    truncated_hours: int
    cost_savings: Optional[float] = None
    pollution_reduction: Optional[float] = None

    def compare_to_baseline(self, baseline: "DecisionReport") -> None:
        savings, reduction = trade_off_metrics(
            (self.false_positives, self.false_negatives),
            (baseline.false_positives, baseline.false_negatives))
        self.cost_savings = savings
        self.pollution_reduction = reduction

    def to_dict(self) -> dict:
        return {
            "false_positives": self.false_positives,
            "false_negatives": self.false_negatives,
            "true_positives": self.true_positives,
            "true_negatives": self.true_negatives,
            "reduced_hours": self.reduced_hours,
            "pollution_events": self.pollution_events,
            "total_cost": self.total_cost,
            "health_cost": self.health_cost,
            "simulated_hours": self.simulated_hours,
            "truncated_hours": self.truncated_hours,
            "cost_savings": self.cost_savings,
            "pollution_reduction": self.pollution_reduction,
        }


def simulate_operations(predictions: Sequence[Sequence[Scenario]],
                        actuals: Sequence[Scenario],
                        health_cost: float) -> tuple:
    """Run the hourly state machine and return (DecisionReport, ledger).

    ``predictions[i]`` holds the scenarios predicted at hour i for hours
    i+1..i+3; ``actuals[i]`` is the realized scenario of hour i. Hours at the
    end of the record without a full three-hour lookahead are truncated from
    the simulation and reported as such.

    The ledger is one dict per simulated hour; the audit identity
    total_cost == 2000 * reduced_hours + (2000 + H) * pollution_events
    holds exactly.
    """
    if not 2000.0 <= health_cost <= 18000.0:
        raise ValueError(f"health_cost {health_cost!r} outside [2000, 18000]")
    n = min(len(predictions), len(actuals))
    truncated = len(actuals) - n
    mode = "normal"
    ledger = []
    fp = fn = tp = tn = 0
    reduced_hours = 0
    events = 0
    total = 0.0
    for i in range(n):
        lookahead = any(is_dangerous(s) for s in predictions[i][:3])
        danger = is_dangerous(actuals[i])
        mode, event, after = step_mode(mode, lookahead, danger)
        if event:
            cost = REDUCED_HOURLY_COST + health_cost
            events += 1
        elif mode == "reduced":
            cost = REDUCED_HOURLY_COST
            reduced_hours += 1
        else:
            cost = 0.0
        total += cost
        if mode == "reduced" and not danger:
            fp += 1
        elif mode == "normal" and danger:
            fn += 1
        elif mode == "reduced":
            tp += 1
        else:
            tn += 1
        ledger.append({
            "hour": i,
            "mode": mode,
            "actual": actuals[i].value,
            "lookahead_dangerous": lookahead,
            "pollution_event": event,
            "cost": cost,
        })
        mode = after
    report = DecisionReport(
        false_positives=fp, false_negatives=fn,
        true_positives=tp, true_negatives=tn,
        reduced_hours=reduced_hours, pollution_events=events,
        total_cost=total, health_cost=health_cost,
        simulated_hours=n, truncated_hours=truncated)
    return report, ledger
