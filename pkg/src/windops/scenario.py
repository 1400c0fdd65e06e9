"""Risk scenarios from wind speed and direction.

The plant's warning grid crosses five speed buckets with three direction
sectors; two of the fifteen cells (S3b, S4) mean pollutants are carried
toward the city and are classified dangerous.
"""

from __future__ import annotations

import enum

__all__ = ["Scenario", "DirectionClass", "classify_direction",
           "classify_scenario", "is_dangerous", "scenario_forecast"]


class Scenario(str, enum.Enum):
    S1 = "S1"
    S2 = "S2"
    S2B = "S2b"
    S3 = "S3"
    S3B = "S3b"
    S4 = "S4"


class DirectionClass(str, enum.Enum):
    FAVORABLE = "favorable"
    VERY_UNFAVORABLE = "very_unfavorable"
    UNFAVORABLE = "unfavorable"


DANGEROUS = frozenset({Scenario.S3B, Scenario.S4})

# Speed rows (slowest first) crossed with direction classes
# (favorable, very_unfavorable, unfavorable).
_GRID = (
    (Scenario.S3, Scenario.S4, Scenario.S4),    # speed < 0.5
    (Scenario.S2, Scenario.S3B, Scenario.S2B),  # 0.5 <= speed < 1
    (Scenario.S1, Scenario.S3B, Scenario.S2B),  # 1 <= speed <= 2
    (Scenario.S1, Scenario.S3B, Scenario.S2),   # 2 < speed <= 4
    (Scenario.S1, Scenario.S1, Scenario.S1),    # speed > 4
)

_CLASS_COLUMN = {
    DirectionClass.FAVORABLE: 0,
    DirectionClass.VERY_UNFAVORABLE: 1,
    DirectionClass.UNFAVORABLE: 2,
}


def classify_direction(direction: float) -> DirectionClass:
    """Direction sector for a bearing in [0, 360); intervals are half-open.

    Favorable spans the northern arc [0, 101.25) and [303.75, 360); the
    southerly arc [146.25, 213.75) is very unfavorable; the remainder is
    unfavorable.
    """
    if not 0.0 <= direction < 360.0:
        raise ValueError(f"direction {direction!r} outside [0, 360)")
    if direction < 101.25 or direction >= 303.75:
        return DirectionClass.FAVORABLE
    if 146.25 <= direction < 213.75:
        return DirectionClass.VERY_UNFAVORABLE
    return DirectionClass.UNFAVORABLE


def _speed_row(speed: float) -> int:
    if speed < 0.0:
        raise ValueError(f"negative wind speed {speed!r}")
    if speed < 0.5:
        return 0
    if speed < 1.0:
        return 1
    if speed <= 2.0:
        return 2
    if speed <= 4.0:
        return 3
    return 4


def classify_scenario(speed: float, direction: float) -> Scenario:
    """Grid cell for an (m/s, degrees) observation."""
    row = _speed_row(speed)
    col = _CLASS_COLUMN[classify_direction(direction)]
    return _GRID[row][col]


def is_dangerous(scenario: Scenario) -> bool:
    return scenario in DANGEROUS


def scenario_forecast(speed: float, direction: float) -> Scenario:
    """Scenario implied by a forecast (speed, direction) pair.

    Identical to classify_scenario; named separately because callers pass
    model output (already clamped to speed >= 0) rather than observations.
    """
    return classify_scenario(speed, direction)
