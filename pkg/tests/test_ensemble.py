import numpy as np
import pytest

from windops.ensemble import (MEMBERS, POLICY_FEATURE_NAMES,
                              MemberPredictionError, MemberPredictions,
                              StackedEnsemble, collect_member_predictions,
                              ensemble_predictions, predict_ensemble,
                              train_stacker)
from windops.models.base import TARGETS


def make_rows(n=200, lead=1, seed=0, member_noise=None, exact_member=None):
    """Member predictions around a smooth target; noise sd per member."""
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    speed = 3.0 + np.sin(t / 9.0)
    direction = np.radians((40.0 + 3.0 * np.sin(t / 13.0) * 57.3) % 360.0)
    actuals = np.column_stack([speed, np.cos(direction), np.sin(direction)])
    if member_noise is None:
        member_noise = [0.3] * len(MEMBERS)
    values = np.empty((n, len(MEMBERS), 3))
    for m in range(len(MEMBERS)):
        for k in range(3):
            values[:, m, k] = actuals[:, k] + member_noise[m] * rng.normal(size=n)
    if exact_member is not None:
        values[:, exact_member, :] = actuals
    return MemberPredictions(lead_time=lead, base_times=t.astype(np.int64),
                             values=values, actuals=actuals)


class TestMemberPredictions:
    def test_policy_names_are_member_major_18(self):
        assert len(POLICY_FEATURE_NAMES) == 18
        assert POLICY_FEATURE_NAMES[0] == "elastic_net_speed"
        assert POLICY_FEATURE_NAMES[3] == "decision_tree_speed"
        assert POLICY_FEATURE_NAMES[-1] == "official_baseline_dir_sin"

    def test_flatten_matches_name_order(self):
        rows = make_rows(n=10)
        flat = rows.flatten()
        assert flat.shape == (10, 18)
        m = MEMBERS.index("random_forest")
        k = TARGETS.index("dir_sin")
        col = POLICY_FEATURE_NAMES.index("random_forest_dir_sin")
        assert np.array_equal(flat[:, col], rows.values[:, m, k])

    def test_csv_round_trip(self, tmp_path):
        rows = make_rows(n=25, lead=3)
        path = tmp_path / "rows.csv"
        rows.to_csv(str(path))
        back = MemberPredictions.from_csv(str(path))
        assert back.lead_time == 3
        assert np.array_equal(back.values, rows.values)
        assert np.array_equal(back.actuals, rows.actuals)


class TestCollectMemberPredictions:
    def test_eighteen_values_per_row(self, tiny_artifacts):
        rows = tiny_artifacts.member_val[1]
        assert rows.values.shape[1:] == (6, 3)
        assert rows.flatten().shape[1] == 18

    def test_baseline_column_is_forecast_feature(self, tiny_artifacts, tiny_world):
        _, truth, forecasts = tiny_world
        from windops.features import FEATURE_NAMES, build_dataset, chronological_split
        ds = build_dataset(truth, forecasts, (1,))[1]
        _, val, _ = chronological_split(ds)
        rows = collect_member_predictions(tiny_artifacts.banks, val)
        col = list(FEATURE_NAMES).index("forecast_wind_speed")
        assert np.allclose(rows.member_column("official_baseline", "speed"),
                           np.maximum(val.X[:, col], 0.0))

    def test_missing_member_bank_is_named(self, tiny_artifacts, tiny_world):
        _, truth, forecasts = tiny_world
        from windops.features import build_dataset, chronological_split
        ds = build_dataset(truth, forecasts, (1,))[1]
        _, val, _ = chronological_split(ds)
        banks = dict(tiny_artifacts.banks)
        del banks["random_forest"]
        with pytest.raises(MemberPredictionError, match="random_forest"):
            collect_member_predictions(banks, val)

    def test_missing_lead_is_named(self, tiny_artifacts, tiny_world):
        _, truth, forecasts = tiny_world
        from windops.features import build_dataset, chronological_split
        ds = build_dataset(truth, forecasts, (8,))[8]
        _, val, _ = chronological_split(ds)
        with pytest.raises(MemberPredictionError, match="lead 8"):
            collect_member_predictions(tiny_artifacts.banks, val)


class TestTrainStacker:
    def test_exact_member_dominates(self):
        # one member is the target itself, the others are noisy
        noise = [1.5, 1.5, 1.5, 1.5, 1.5, 1.5]
        rows = make_rows(n=400, member_noise=noise, exact_member=2, seed=1)
        stacked = train_stacker({1: rows}, k=5)
        speeds, _ = ensemble_predictions(stacked, rows)
        stack_mae = np.mean(np.abs(speeds - rows.actuals[:, 0]))
        for m, member in enumerate(MEMBERS):
            if m == 2:
                continue
            member_mae = np.mean(np.abs(rows.values[:, m, 0] - rows.actuals[:, 0]))
            assert stack_mae < member_mae
        combiner = stacked.combiners[(1, "speed")]
        weights = np.zeros(len(MEMBERS))
        weights[combiner.keep_] = combiner.coef_
        assert np.argmax(np.abs(weights)) == 2

    def test_independent_noise_beats_every_member(self):
        rows = make_rows(n=600, member_noise=[0.5] * 6, seed=2)
        stacked = train_stacker({1: rows}, k=5)
        for target_idx, target in enumerate(TARGETS):
            cv_mae = stacked.cv_info[(1, target)]["cv_mae"]
            member_cv = []
            folds = np.array_split(np.arange(len(rows)), 5)
            for m in range(len(MEMBERS)):
                errs = []
                for fold in folds:
                    errs.append(np.mean(np.abs(
                        rows.values[fold, m, target_idx]
                        - rows.actuals[fold, target_idx])))
                member_cv.append(np.mean(errs))
            assert cv_mae <= min(member_cv) + 1e-9

    def test_identical_members_pass_through(self):
        # every member equals the target; the combiner output must match it
        # up to the small shrinkage bias the penalized grid imposes (the
        # searched alphas start at 0.2, so exact equality is unattainable)
        rows = make_rows(n=150, member_noise=[0.0] * 6, seed=3)
        rows.values[:, :, :] = rows.actuals[:, None, :]
        stacked = train_stacker({1: rows}, k=5)
        speeds, _ = ensemble_predictions(stacked, rows)
        y = rows.actuals[:, 0]
        # ridge over six duplicates shrinks deviations by alpha/(6 + alpha)
        # at the smallest searched alpha, about 3.2%
        assert np.max(np.abs(speeds - y)) < 0.05 * np.max(np.abs(y - y.mean()))

    def test_constant_member_column_warns(self):
        rows = make_rows(n=150, member_noise=[0.0] * 6, seed=3)
        rows.values[:, :, :] = rows.actuals[:, None, :]
        rows.values[:, 0, 0] = 5.0
        with pytest.warns(UserWarning, match="constant"):
            stacked = train_stacker({1: rows}, k=5)
        speeds, _ = ensemble_predictions(stacked, rows)
        y = rows.actuals[:, 0]
        assert np.max(np.abs(speeds - y)) < 0.06 * np.max(np.abs(y - y.mean()))

    def test_too_few_rows_rejected(self):
        rows = make_rows(n=4)
        with pytest.raises(ValueError, match="k=5"):
            train_stacker({1: rows}, k=5)

    def test_deterministic(self):
        rows = make_rows(n=200, seed=4)
        a = train_stacker({1: rows})
        b = train_stacker({1: rows})
        sa, _ = ensemble_predictions(a, rows)
        sb, _ = ensemble_predictions(b, rows)
        assert np.array_equal(sa, sb)

    def test_serialization_round_trip(self):
        rows = make_rows(n=120, seed=5)
        stacked = train_stacker({1: rows})
        clone = StackedEnsemble.from_dict(stacked.to_dict())
        sa, da = ensemble_predictions(stacked, rows)
        sb, db = ensemble_predictions(clone, rows)
        assert np.array_equal(sa, sb)
        assert np.array_equal(da, db)


class TestPredictEnsemble:
    @staticmethod
    def identity_stacker(lead=1):
        """Combiner with weight 1 on the first member, intercept 0."""
        from windops.models.elastic_net import ElasticNetRegressor
        stacked = StackedEnsemble()
        for target in TARGETS:
            model = ElasticNetRegressor(alpha=0.0, l1_ratio=0.0)
            model.n_features = 6
            model.mean_ = np.zeros(6)
            model.scale_ = np.ones(6)
            model.keep_ = np.ones(6, dtype=bool)
            model.coef_ = np.array([1.0, 0, 0, 0, 0, 0])
            model.intercept_ = 0.0
            stacked.combiners[(lead, target)] = model
        return stacked

    def test_identity_pass_through(self):
        stacked = self.identity_stacker()
        block = np.zeros((6, 3))
        block[0] = (4.2, 0.5, 0.5)
        speed, direction = predict_ensemble(stacked, 1, block)
        assert speed == pytest.approx(4.2)
        assert direction == pytest.approx(45.0)

    def test_speed_clamped(self):
        stacked = self.identity_stacker()
        block = np.zeros((6, 3))
        block[0] = (-3.0, 1.0, 0.0)
        speed, direction = predict_ensemble(stacked, 1, block)
        assert speed == 0.0
        assert direction == 0.0

    def test_known_weights_hand_computed(self):
        from windops.models.elastic_net import ElasticNetRegressor
        stacked = StackedEnsemble()
        weights = np.array([0.5, 0.25, 0.25, 0.0, 0.0, 0.0])
        for target in TARGETS:
            model = ElasticNetRegressor(alpha=0.0, l1_ratio=0.0)
            model.n_features = 6
            model.mean_ = np.zeros(6)
            model.scale_ = np.ones(6)
            model.keep_ = np.ones(6, dtype=bool)
            model.coef_ = weights.copy()
            model.intercept_ = 0.1
            stacked.combiners[(1, target)] = model
        block = np.arange(18, dtype=float).reshape(6, 3)
        speed, _ = predict_ensemble(stacked, 1, block)
        assert speed == pytest.approx(0.1 + weights @ block[:, 0])

    def test_near_zero_direction_pair_propagates(self):
        stacked = self.identity_stacker()
        block = np.zeros((6, 3))
        block[0] = (1.0, 0.0, 0.0)
        block[0, 1] = 0.0  # cos combiner output 0
        block[0, 2] = 0.0  # sin combiner output 0
        with pytest.raises(ValueError, match="direction undefined"):
            predict_ensemble(stacked, 1, block)

    def test_flat_input_accepted(self):
        stacked = self.identity_stacker()
        flat = np.zeros(18)
        flat[0] = 2.0
        flat[1] = 1.0
        speed, direction = predict_ensemble(stacked, 1, flat)
        assert speed == 2.0
        assert direction == 0.0
