import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from windops.scenario import (DirectionClass, Scenario, classify_direction,
                              classify_scenario, is_dangerous,
                              scenario_forecast)

# the full warning grid, hard-coded: speed rows x direction columns
GRID_CELLS = {
    # (speed representative, class) -> scenario
    (0.3, "favorable"): "S3",
    (0.3, "very_unfavorable"): "S4",
    (0.3, "unfavorable"): "S4",
    (0.7, "favorable"): "S2",
    (0.7, "very_unfavorable"): "S3b",
    (0.7, "unfavorable"): "S2b",
    (1.5, "favorable"): "S1",
    (1.5, "very_unfavorable"): "S3b",
    (1.5, "unfavorable"): "S2b",
    (3.0, "favorable"): "S1",
    (3.0, "very_unfavorable"): "S3b",
    (3.0, "unfavorable"): "S2",
    (6.0, "favorable"): "S1",
    (6.0, "very_unfavorable"): "S1",
    (6.0, "unfavorable"): "S1",
}

CLASS_REPRESENTATIVE = {
    "favorable": 0.0,
    "very_unfavorable": 180.0,
    "unfavorable": 270.0,
}


class TestDirectionClasses:
    @pytest.mark.parametrize("angle,expected", [
        (0.0, "favorable"),
        (50.0, "favorable"),
        (101.24, "favorable"),
        (101.25, "unfavorable"),
        (146.24, "unfavorable"),
        (146.25, "very_unfavorable"),
        (180.0, "very_unfavorable"),
        (213.74, "very_unfavorable"),
        (213.75, "unfavorable"),
        (270.0, "unfavorable"),
        (303.74, "unfavorable"),
        (303.75, "favorable"),
        (359.99, "favorable"),
    ])
    def test_sector_boundaries_half_open(self, angle, expected):
        assert classify_direction(angle) == DirectionClass(expected)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            classify_direction(360.0)
        with pytest.raises(ValueError):
            classify_direction(-0.1)

    @settings(deadline=None, max_examples=300)
    @given(st.floats(0, 360, exclude_max=True))
    def test_classes_partition_the_circle(self, angle):
        assert classify_direction(angle) in DirectionClass

    def test_partition_on_dense_random_sample(self):
        rng = np.random.default_rng(0)
        angles = rng.uniform(0.0, 360.0, size=100_000)
        angles = angles[angles < 360.0]
        counts = {c: 0 for c in DirectionClass}
        for a in angles:
            counts[classify_direction(float(a))] += 1
        assert sum(counts.values()) == len(angles)
        # arc lengths: favorable 157.5, very unfavorable 67.5, unfavorable 135
        assert counts[DirectionClass.FAVORABLE] / len(angles) == pytest.approx(
            157.5 / 360.0, abs=0.01)


class TestScenarioGrid:
    def test_all_fifteen_cells(self):
        for (speed, klass), expected in GRID_CELLS.items():
            direction = CLASS_REPRESENTATIVE[klass]
            assert classify_scenario(speed, direction) == Scenario(expected), \
                (speed, klass)

    @pytest.mark.parametrize("speed,direction,expected", [
        (0.3, 180.0, "S4"),
        (1.5, 270.0, "S2b"),
        (5.0, 180.0, "S1"),
        (3.0, 0.0, "S1"),
        (0.4, 160.0, "S4"),
        (6.0, 90.0, "S1"),
        (0.0, 100.0, "S3"),
    ])
    def test_published_examples(self, speed, direction, expected):
        assert classify_scenario(speed, direction) == Scenario(expected)

    @pytest.mark.parametrize("speed,row_scenario", [
        (0.49999, "S4"), (0.5, "S3b"), (0.99999, "S3b"), (1.0, "S3b"),
        (2.0, "S3b"), (2.00001, "S3b"), (4.0, "S3b"), (4.00001, "S1"),
    ])
    def test_speed_bucket_boundaries_southerly(self, speed, row_scenario):
        assert classify_scenario(speed, 180.0) == Scenario(row_scenario)

    def test_speed_one_assigned_to_second_bucket(self):
        # the 1 m/s edge belongs to the [1, 2] row
        assert classify_scenario(1.0, 0.0) == Scenario.S1
        assert classify_scenario(1.0, 270.0) == Scenario.S2B

    def test_negative_speed_rejected(self):
        with pytest.raises(ValueError):
            classify_scenario(-0.2, 100.0)

    @settings(deadline=None, max_examples=300)
    @given(st.floats(4.0, 60.0, exclude_min=True), st.floats(0, 360, exclude_max=True))
    def test_high_wind_always_s1(self, speed, direction):
        assert classify_scenario(speed, direction) == Scenario.S1

    def test_danger_monotone_as_southerly_wind_weakens(self):
        labels = [classify_scenario(s, 180.0)
                  for s in (6.0, 3.0, 1.5, 0.7, 0.3)]
        danger = [is_dangerous(s) for s in labels]
        assert danger == sorted(danger)  # False...True, never back


class TestDangerMapping:
    def test_dangerous_set(self):
        assert is_dangerous(Scenario.S4)
        assert is_dangerous(Scenario.S3B)
        for label in (Scenario.S1, Scenario.S2, Scenario.S2B, Scenario.S3):
            assert not is_dangerous(label)

    def test_serialized_labels(self):
        assert [s.value for s in Scenario] == ["S1", "S2", "S2b", "S3", "S3b", "S4"]

    def test_forecast_wrapper_matches_classifier(self):
        assert scenario_forecast(0.4, 160.0) == Scenario.S4
        assert scenario_forecast(6.0, 90.0) == Scenario.S1
        # clamped negative model output lands in the calm favorable cell
        assert scenario_forecast(max(-0.2, 0.0), 100.0) == Scenario.S3
