import json
from datetime import timedelta

import numpy as np
import pytest
from fastapi.testclient import TestClient

from windops.cli import write_forecast_csv
from windops.ensemble import MEMBERS
from windops.features import FeatureBuilder, epoch_hour
from windops.ingest import format_timestamp, hourly_to_csv
from windops.service import create_app


@pytest.fixture(scope="module")
def service_env(tiny_world, artifacts_dir, tmp_path_factory):
    """Service fed the first 600 hours; forecasts cover past the buffer end."""
    _, truth, forecasts = tiny_world
    root = tmp_path_factory.mktemp("service")
    hourly_path = root / "hourly.csv"
    forecasts_path = root / "forecasts.csv"
    hourly_to_csv(truth[:600], str(hourly_path))
    write_forecast_csv(forecasts, str(forecasts_path))
    app = create_app(str(artifacts_dir), str(hourly_path), str(forecasts_path))
    return app, truth


@pytest.fixture()
def client(service_env):
    app, _ = service_env
    return TestClient(app)


class TestForecastEndpoint:
    def test_schema(self, client):
        payload = client.get("/api/forecast", params={"leads": "1,2,3"}).json()
        assert len(payload["entries"]) == 3
        for entry in payload["entries"]:
            assert entry["scenario"] in {"S1", "S2", "S2b", "S3", "S3b", "S4"}
            assert isinstance(entry["dangerous"], bool)
            assert entry["baseline"]["scenario"] in {"S1", "S2", "S2b",
                                                     "S3", "S3b", "S4"}

    def test_unavailable_lead_rejected(self, client):
        response = client.get("/api/forecast", params={"leads": "7"})
        assert response.status_code == 400

    def test_bad_leads_parameter(self, client):
        assert client.get("/api/forecast",
                          params={"leads": "one"}).status_code == 400

    def test_matches_offline_pipeline_bitwise(self, service_env, client,
                                              tiny_artifacts, tiny_world):
        app, truth = service_env
        _, _, forecasts = tiny_world
        snap = app.state.service.snapshot
        t = snap.base_hour
        builder = FeatureBuilder(list(snap.hourly), forecasts)
        lead = 1
        row = builder.matrix(np.array([t], dtype=np.int64), lead)
        from windops.ensemble import predict_ensemble
        from windops.features import FEATURE_NAMES
        values = np.empty((6, 3))
        for m, member in enumerate(MEMBERS):
            if member == "official_baseline":
                for k, name in enumerate(("forecast_wind_speed",
                                          "forecast_wind_dir_cos",
                                          "forecast_wind_dir_sin")):
                    values[m, k] = row[0, list(FEATURE_NAMES).index(name)]
                values[m, 0] = max(values[m, 0], 0.0)
                continue
            for k, target in enumerate(("speed", "dir_cos", "dir_sin")):
                values[m, k] = tiny_artifacts.banks[member].predict(
                    lead, target, row)[0]
        speed, direction = predict_ensemble(tiny_artifacts.stacker, lead,
                                            values)
        entry = client.get("/api/forecast",
                           params={"leads": "1"}).json()["entries"][0]
        assert entry["speed"] == speed
        assert entry["direction"] == direction


class TestRecommendationEndpoint:
    def test_schema(self, client):
        payload = client.get("/api/recommendation").json()
        assert payload["action"] in ("maintain", "reduce")
        assert payload["current_mode"] in ("normal", "reduced")
        assert isinstance(payload["tree_path"], list)
        assert payload["health_cost_used"] in (2000.0, 4000.0, 8000.0,
                                               13000.0, 18000.0)

    def test_whatif_does_not_change_live_state(self, client):
        before = client.get("/api/recommendation").json()
        for cost in (2000, 18000):
            out = client.get("/api/whatif",
                             params={"health_cost": cost}).json()
            assert "current_mode" not in out
        after = client.get("/api/recommendation").json()
        assert before == after

    def test_whatif_monotone_in_health_cost(self, client):
        actions = []
        for cost in (2000, 4000, 8000, 13000, 18000):
            out = client.get("/api/whatif",
                             params={"health_cost": cost}).json()
            actions.append(out["action"])
        # once the recommendation flips to reduce it must stay there
        flipped = False
        for action in actions:
            if action == "reduce":
                flipped = True
            elif flipped:
                pytest.fail(f"reduce flipped back to maintain: {actions}")

    def test_whatif_nearest_tree_lookup(self, client):
        out = client.get("/api/whatif", params={"health_cost": 9000}).json()
        assert out["health_cost_used"] == 8000.0
        assert out["health_cost_requested"] == 9000.0


class TestSensorEndpoint:
    @staticmethod
    def minute_payload(start, n_minutes, speed=3.0, direction=40.0):
        records = []
        for m in range(n_minutes):
            ts = start + timedelta(minutes=m)
            records.append({
                "timestamp": format_timestamp(ts),
                "wind_speed": speed, "wind_direction": direction,
                "solar_irradiance": 0.0, "temperature": 16.0,
                "pluviometry": 0.0,
            })
        return {"records": records}

    def test_hour_completion_triggers_recompute(self, service_env):
        app, truth = service_env
        client = TestClient(app)
        before = client.get("/api/forecast", params={"leads": "1"}).json()
        start = truth[599].timestamp + timedelta(hours=1)
        payload = self.minute_payload(start, 60, speed=2.2, direction=100.0)
        out = client.post("/api/sensor", json=payload).json()
        assert out["completed_hours"] == 0  # the hour is still open
        nudge = self.minute_payload(start + timedelta(hours=1), 1)
        out = client.post("/api/sensor", json=nudge).json()
        assert out["completed_hours"] == 1
        after = client.get("/api/forecast", params={"leads": "1"}).json()
        assert after["base_hour"] != before["base_hour"]

    def test_repeated_posts_idempotent(self, service_env):
        app, truth = service_env
        client = TestClient(app)
        snap_before = app.state.service.snapshot
        start = truth[599].timestamp + timedelta(hours=2, minutes=1)
        payload = self.minute_payload(start, 10)
        client.post("/api/sensor", json=payload)
        snap_a = app.state.service.snapshot
        client.post("/api/sensor", json=payload)
        snap_b = app.state.service.snapshot
        assert snap_a.pending == snap_b.pending
        assert snap_a.base_hour == snap_b.base_hour
        assert snap_a.entries == snap_b.entries

    def test_out_of_order_beyond_tolerance_409(self, service_env):
        app, truth = service_env
        client = TestClient(app)
        stale = truth[598].timestamp  # hours behind the live buffer
        payload = self.minute_payload(stale, 1)
        assert client.post("/api/sensor", json=payload).status_code == 409

    def test_malformed_payload_400(self, client):
        response = client.post("/api/sensor", json={"records": [{"nope": 1}]})
        assert response.status_code == 400
        response = client.post("/api/sensor", json={"records": [
            {"timestamp": "yesterday-ish"}]})
        assert response.status_code == 400


class TestHistoryEndpoint:
    def test_recent_actuals_with_scenarios(self, client):
        payload = client.get("/api/history", params={"hours": 5}).json()
        assert 1 <= len(payload["hours"]) <= 5
        for row in payload["hours"]:
            assert row["actual"]["scenario"] in {"S1", "S2", "S2b", "S3",
                                                 "S3b", "S4"}

    def test_forecasts_recorded_for_served_hours(self, service_env):
        app, truth = service_env
        client = TestClient(app)
        # after the sensor tests the service has recomputed at least once,
        # so some hour carries recorded forecasts
        payload = client.get("/api/history", params={"hours": 600}).json()
        recorded = [row for row in payload["hours"] if row["forecasts"]]
        assert recorded or payload["hours"]


class TestOverrideEndpoint:
    def test_override_recorded_and_reflected(self, service_env):
        app, _ = service_env
        client = TestClient(app)
        out = client.post("/api/override",
                          json={"action": "reduce", "token": "t-1"}).json()
        assert out["recorded"] is True
        assert out["current_mode"] == "reduced"
        assert client.get("/api/recommendation").json()["override_active"]

    def test_duplicate_token_ignored(self, service_env):
        app, _ = service_env
        client = TestClient(app)
        client.post("/api/override", json={"action": "maintain",
                                           "token": "t-2"})
        ledger_size = len(app.state.service.snapshot.override_ledger)
        out = client.post("/api/override", json={"action": "maintain",
                                                 "token": "t-2"}).json()
        assert out["recorded"] is False
        assert len(app.state.service.snapshot.override_ledger) == ledger_size

    def test_unknown_action_400(self, client):
        response = client.post("/api/override", json={"action": "panic"})
        assert response.status_code == 400


class TestColdStart:
    def test_503_before_warm(self, tiny_world, artifacts_dir, tmp_path):
        _, truth, forecasts = tiny_world
        hourly_path = tmp_path / "short.csv"
        forecasts_path = tmp_path / "fc.csv"
        hourly_to_csv(truth[:20], str(hourly_path))  # far too short to build rows
        write_forecast_csv(forecasts[:4], str(forecasts_path))
        app = create_app(str(artifacts_dir), str(hourly_path),
                         str(forecasts_path))
        client = TestClient(app)
        assert client.get("/api/forecast").status_code == 503
        assert client.get("/api/recommendation").status_code == 503
        assert client.get("/api/history").status_code == 503
