import numpy as np
import pytest

from windops.models import (ENSEMBLE_GRID, FAST_GRIDS, TABLE_GRIDS,
                            ElasticNetRegressor, GradientBoostedModel,
                            TrainingError, grid_search, model_from_dict,
                            train_bank, train_cart, train_elastic_net,
                            train_forest, train_gbt)
from windops.models.search import enumerate_grid


def standardized(X):
    return (X - X.mean(axis=0)) / X.std(axis=0)


class TestElasticNet:
    def test_alpha_zero_matches_ols(self):
        rng = np.random.default_rng(42)
        X = rng.normal(size=(5, 3))
        y = rng.normal(size=5)
        model = train_elastic_net(X, y, alpha=0.0, l1_ratio=0.5)
        Xs = standardized(X)
        yc = y - y.mean()
        beta_ols, *_ = np.linalg.lstsq(Xs, yc, rcond=None)
        assert model.coef_ == pytest.approx(beta_ols, abs=1e-6)
        assert model.predict(X) == pytest.approx(y.mean() + Xs @ beta_ols,
                                                 abs=1e-6)

    def test_ridge_closed_form(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(5, 3))
        y = rng.normal(size=5)
        alpha = 0.7
        model = train_elastic_net(X, y, alpha=alpha, l1_ratio=0.0)
        Xs = standardized(X)
        yc = y - y.mean()
        n = len(y)
        beta_ridge = np.linalg.solve(Xs.T @ Xs + n * alpha * np.eye(3),
                                     Xs.T @ yc)
        assert model.coef_ == pytest.approx(beta_ridge, abs=1e-6)

    def test_constant_target(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(20, 4))
        y = np.full(20, 3.25)
        model = train_elastic_net(X, y, alpha=0.4, l1_ratio=0.5)
        assert model.intercept_ == pytest.approx(3.25)
        assert np.all(model.coef_ == 0.0)

    def test_kkt_conditions_hold(self):
        rng = np.random.default_rng(9)
        for trial in range(5):
            X = rng.normal(size=(40, 6))
            y = X @ rng.normal(size=6) + 0.3 * rng.normal(size=40)
            model = train_elastic_net(X, y, alpha=0.5, l1_ratio=0.6)
            assert model.kkt_max_violation(X, y) <= 1e-6

    def test_gram_and_residual_paths_agree(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(50, 5))
        y = X[:, 0] - 2 * X[:, 3] + 0.1 * rng.normal(size=50)
        wide = train_elastic_net(X[:8], y[:8], alpha=0.3, l1_ratio=0.5)  # p*2 > n
        tall = train_elastic_net(X, y, alpha=0.3, l1_ratio=0.5)
        # both must satisfy their own optimality conditions
        assert wide.kkt_max_violation(X[:8], y[:8]) <= 1e-6
        assert tall.kkt_max_violation(X, y) <= 1e-6

    def test_constant_columns_dropped(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(30, 3))
        X[:, 1] = 7.0
        y = X[:, 0]
        model = train_elastic_net(X, y, alpha=0.05, l1_ratio=0.5)
        assert model.keep_.tolist() == [True, False, True]
        assert model.predict(X).shape == (30,)

    def test_rejects_nan_and_empty(self):
        with pytest.raises(TrainingError):
            train_elastic_net(np.empty((0, 3)), np.empty(0), 0.1, 0.5)
        X = np.ones((5, 2))
        X[2, 1] = np.nan
        with pytest.raises(TrainingError):
            train_elastic_net(X, np.ones(5), 0.1, 0.5)

    def test_predict_rejects_wrong_width(self):
        X = np.random.default_rng(0).normal(size=(10, 3))
        model = train_elastic_net(X, X[:, 0], 0.1, 0.5)
        with pytest.raises(ValueError, match="3 features"):
            model.predict(np.ones((2, 4)))

    def test_serialization_round_trip(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(25, 4))
        y = X[:, 1] * 2.0
        model = train_elastic_net(X, y, alpha=0.2, l1_ratio=0.7)
        clone = model_from_dict(model.to_dict())
        assert np.array_equal(clone.predict(X), model.predict(X))


def step_data(n_per_side=30, low=1.0, high=5.0, seed=0):
    """One informative feature with a clean step at 0.5."""
    rng = np.random.default_rng(seed)
    x = np.concatenate([rng.uniform(0.0, 0.45, n_per_side),
                        rng.uniform(0.55, 1.0, n_per_side)])
    y = np.where(x < 0.5, low, high)
    return x[:, None], y


class TestCart:
    def test_constant_target_single_leaf(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(30, 4))
        model = train_cart(X, np.full(30, 2.0), max_depth=5)
        assert model.tree.n_leaves == 1
        assert model.predict(X) == pytest.approx(np.full(30, 2.0))

    def test_step_function_depth_one(self):
        X, y = step_data()
        model = train_cart(X, y, max_depth=1)
        tree = model.tree
        assert tree.n_leaves == 2
        threshold = tree.threshold[0]
        # enumeration oracle: every candidate cut's SSE, the chosen one wins
        xs = np.sort(X[:, 0])
        best_sse = None
        for i in range(len(xs) - 1):
            if xs[i] == xs[i + 1]:
                continue
            cut = (xs[i] + xs[i + 1]) / 2
            left, right = y[X[:, 0] < cut], y[X[:, 0] >= cut]
            sse = (((left - left.mean()) ** 2).sum()
                   + ((right - right.mean()) ** 2).sum())
            best_sse = sse if best_sse is None else min(best_sse, sse)
        left, right = y[X[:, 0] < threshold], y[X[:, 0] >= threshold]
        chosen = (((left - left.mean()) ** 2).sum()
                  + ((right - right.mean()) ** 2).sum())
        assert chosen == pytest.approx(best_sse, abs=1e-9)
        assert 0.45 <= threshold <= 0.55
        assert sorted(np.unique(model.predict(X))) == pytest.approx([1.0, 5.0])

    def test_depth_zero_rejected(self):
        X, y = step_data()
        with pytest.raises(TrainingError, match="max_depth must be >= 1"):
            train_cart(X, y, max_depth=0)

    def test_min_samples_leaf_respected(self):
        X, y = step_data(n_per_side=30)
        model = train_cart(X, y, max_depth=6, min_samples_leaf=10)
        leaf_sizes = model.tree.n_samples[model.tree.feature == -1]
        assert leaf_sizes.min() >= 10

    def test_predictions_within_target_range(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(200, 6))
        y = np.sin(X[:, 0]) + 0.1 * rng.normal(size=200)
        model = train_cart(X, y, max_depth=7)
        pred = model.predict(rng.normal(size=(500, 6)))
        assert pred.min() >= y.min() - 1e-12
        assert pred.max() <= y.max() + 1e-12

    def test_tie_breaks_to_lowest_feature(self):
        # two identical columns: the split must use feature 0
        x = np.linspace(0, 1, 40)
        X = np.column_stack([x, x])
        y = np.where(x < 0.5, 0.0, 1.0)
        model = train_cart(X, y, max_depth=1)
        assert model.tree.feature[0] == 0

    def test_serialization_round_trip(self):
        X, y = step_data()
        model = train_cart(X, y, max_depth=3)
        clone = model_from_dict(model.to_dict())
        grid = np.linspace(0, 1, 50)[:, None]
        assert np.array_equal(clone.predict(grid), model.predict(grid))


class TestRandomForest:
    def test_degenerate_forest_equals_cart(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(80, 5))
        y = X[:, 2] + 0.2 * rng.normal(size=80)
        forest = train_forest(X, y, n_estimators=1, max_depth=4,
                              bootstrap=False, max_features=5)
        cart = train_cart(X, y, max_depth=4)
        grid = rng.normal(size=(100, 5))
        assert np.max(np.abs(forest.predict(grid) - cart.predict(grid))) < 1e-12

    def test_constant_target(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(40, 3))
        model = train_forest(X, np.full(40, -1.5), n_estimators=5, max_depth=4)
        assert model.predict(X) == pytest.approx(np.full(40, -1.5))

    def test_seeded_runs_identical(self):
        rng = np.random.default_rng(10)
        X = rng.normal(size=(120, 6))
        y = X[:, 0] * X[:, 1] + rng.normal(size=120)
        grid = rng.normal(size=(50, 6))
        a = train_forest(X, y, n_estimators=12, max_depth=5, seed=99)
        b = train_forest(X, y, n_estimators=12, max_depth=5, seed=99)
        assert np.array_equal(a.predict(grid), b.predict(grid))

    def test_different_seeds_differ(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(120, 6))
        y = X[:, 0] + rng.normal(size=120)
        grid = rng.normal(size=(50, 6))
        a = train_forest(X, y, n_estimators=12, max_depth=5, seed=1)
        b = train_forest(X, y, n_estimators=12, max_depth=5, seed=2)
        assert not np.array_equal(a.predict(grid), b.predict(grid))

    def test_predictions_within_target_range(self):
        rng = np.random.default_rng(12)
        X = rng.normal(size=(150, 4))
        y = X[:, 0] ** 2
        model = train_forest(X, y, n_estimators=10, max_depth=6)
        pred = model.predict(rng.normal(size=(80, 4)))
        assert pred.min() >= y.min() - 1e-12
        assert pred.max() <= y.max() + 1e-12

    def test_serialization_round_trip(self):
        rng = np.random.default_rng(13)
        X = rng.normal(size=(60, 4))
        y = X[:, 0]
        model = train_forest(X, y, n_estimators=4, max_depth=3, seed=5)
        clone = model_from_dict(model.to_dict())
        assert np.array_equal(clone.predict(X), model.predict(X))


class TestGradientBoosted:
    def test_single_stump_reproduces_step_means(self):
        X, y = step_data(n_per_side=30, low=2.0, high=8.0)
        model = train_gbt(X, y, n_estimators=1, max_depth=1, learning_rate=1.0,
                          min_samples_leaf=1)
        pred = model.predict(X)
        # F0 + one unit-rate stump lands exactly on the two side means
        assert pred[X[:, 0] < 0.5] == pytest.approx(2.0, abs=1e-12)
        assert pred[X[:, 0] >= 0.5] == pytest.approx(8.0, abs=1e-12)

    def test_zero_learning_rate_predicts_mean(self):
        rng = np.random.default_rng(14)
        X = rng.normal(size=(60, 3))
        y = rng.normal(size=60)
        model = train_gbt(X, y, n_estimators=10, max_depth=3, learning_rate=0.0)
        assert model.predict(X) == pytest.approx(np.full(60, y.mean()))

    def test_train_mse_monotone_nonincreasing(self):
        rng = np.random.default_rng(15)
        X = rng.normal(size=(300, 5))
        y = X[:, 0] - X[:, 2] + 0.3 * rng.normal(size=300)
        for policy, extra in (("depthwise", {}),
                              ("leafwise", {"num_leaves": 8})):
            model = train_gbt(X, y, n_estimators=40, max_depth=4,
                              learning_rate=0.3, policy=policy, **extra)
            path = model.train_mse_path_
            assert all(a >= b - 1e-12 for a, b in zip(path, path[1:]))

    def test_leafwise_respects_leaf_cap(self):
        rng = np.random.default_rng(16)
        X = rng.normal(size=(400, 4))
        y = np.sin(3 * X[:, 0]) + np.cos(2 * X[:, 1])
        model = train_gbt(X, y, n_estimators=3, max_depth=12,
                          learning_rate=0.5, policy="leafwise", num_leaves=6,
                          min_samples_leaf=1)
        for tree in model.trees:
            assert tree.n_leaves <= 6

    def test_lambda_l1_shrinks_leaf_values(self):
        X, y = step_data(n_per_side=40, low=-0.02, high=0.02)
        plain = train_gbt(X, y, n_estimators=1, max_depth=1, learning_rate=1.0,
                          policy="leafwise", num_leaves=2, lambda_l1=0.0)
        shrunk = train_gbt(X, y, n_estimators=1, max_depth=1, learning_rate=1.0,
                           policy="leafwise", num_leaves=2, lambda_l1=1.0)
        spread = lambda m: np.ptp(m.predict(X))
        assert spread(shrunk) < spread(plain)

    def test_seeded_runs_identical(self):
        rng = np.random.default_rng(17)
        X = rng.normal(size=(200, 5))
        y = X[:, 1] + 0.2 * rng.normal(size=200)
        a = train_gbt(X, y, n_estimators=15, max_depth=3, learning_rate=0.1)
        b = train_gbt(X, y, n_estimators=15, max_depth=3, learning_rate=0.1)
        assert np.array_equal(a.predict(X), b.predict(X))

    def test_serialization_round_trip(self):
        rng = np.random.default_rng(18)
        X = rng.normal(size=(100, 3))
        y = X[:, 0]
        model = train_gbt(X, y, n_estimators=5, max_depth=3, learning_rate=0.3,
                          policy="leafwise", num_leaves=7)
        clone = model_from_dict(model.to_dict())
        assert np.array_equal(clone.predict(X), model.predict(X))

    def test_leafwise_requires_num_leaves(self):
        with pytest.raises(TrainingError, match="num_leaves"):
            GradientBoostedModel(n_estimators=5, max_depth=3,
                                 learning_rate=0.1, policy="leafwise")


class TestGridSearch:
    @staticmethod
    def linear_data(seed=20, n=160):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n, 4))
        y = X[:, 0].copy()
        half = n // 2
        return X[:half], y[:half], X[half:], y[half:]

    def test_single_point_grid_returns_it(self):
        X_tr, y_tr, X_val, y_val = self.linear_data()
        grid = {"alpha": [0.4], "l1_ratio": [0.7]}
        spec, model, score = grid_search("elastic_net", X_tr, y_tr, X_val,
                                         y_val, grid=grid)
        assert spec.params == {"alpha": 0.4, "l1_ratio": 0.7}

    def test_elastic_net_table_grid_exhaustive_optimality(self):
        X_tr, y_tr, X_val, y_val = self.linear_data(seed=21)
        spec, model, score = grid_search("elastic_net", X_tr, y_tr, X_val, y_val)
        assert len(enumerate_grid(TABLE_GRIDS["elastic_net"])) == 10
        # re-evaluate every combination independently
        best = None
        for params in enumerate_grid(TABLE_GRIDS["elastic_net"]):
            m = train_elastic_net(X_tr, y_tr, **params)
            mae = float(np.mean(np.abs(m.predict(X_val) - y_val)))
            best = mae if best is None else min(best, mae)
        assert score == pytest.approx(best, abs=1e-12)

    def test_realizable_target_reaches_zero_error(self):
        X_tr, y_tr, X_val, y_val = self.linear_data(seed=22)
        grid = {"alpha": [0.0, 0.2], "l1_ratio": [0.5]}
        spec, model, score = grid_search("elastic_net", X_tr, y_tr, X_val,
                                         y_val, grid=grid)
        assert spec.params["alpha"] == 0.0
        assert score < 1e-6

    def test_empty_grid_rejected(self):
        X_tr, y_tr, X_val, y_val = self.linear_data()
        with pytest.raises(TrainingError, match="empty"):
            grid_search("elastic_net", X_tr, y_tr, X_val, y_val,
                        grid={"alpha": [], "l1_ratio": [0.5]})

    def test_tie_breaks_to_first_combination(self):
        X_tr, y_tr, X_val, y_val = self.linear_data(seed=23)
        y_tr = np.zeros_like(y_tr)  # every combination predicts 0 perfectly
        y_val = np.zeros_like(y_val)
        spec, _, _ = grid_search("elastic_net", X_tr, y_tr, X_val, y_val)
        first = enumerate_grid(TABLE_GRIDS["elastic_net"])[0]
        assert spec.params == first


class TestTrainBank:
    @staticmethod
    def datasets(leads, n_hours=220):
        from test_features import make_hourly, make_forecasts
        from windops.features import build_dataset, chronological_split
        hourly = make_hourly(n_hours)
        forecasts = make_forecasts(n_hours, every=2)
        train, val = {}, {}
        for lead, ds in build_dataset(hourly, forecasts, leads).items():
            a, b, _ = chronological_split(ds)
            train[lead], val[lead] = a, b
        return train, val

    def test_single_lead_three_targets(self):
        train, val = self.datasets((1,))
        bank = train_bank(train, val, "elastic_net",
                          grid=FAST_GRIDS["elastic_net"])
        assert len(bank.models) == 3
        assert bank.leads == (1,)

    def test_full_lead_set_yields_144_models(self):
        train, val = self.datasets(tuple(range(1, 49)), n_hours=260)
        # heavy lasso converges fastest; the point here is the model count
        bank = train_bank(train, val, "elastic_net",
                          grid={"alpha": [1.0], "l1_ratio": [1.0]})
        assert len(bank.models) == 48 * 3 == 144

    def test_missing_lead_named_in_error(self):
        train, val = self.datasets((1,))
        with pytest.raises(TrainingError, match="lead time 5"):
            train_bank(train, val, "elastic_net", leads=[1, 5],
                       grid=FAST_GRIDS["elastic_net"])

    def test_speed_predictions_clamped_nonnegative(self):
        train, val = self.datasets((1,))
        bank = train_bank(train, val, "elastic_net",
                          grid=FAST_GRIDS["elastic_net"])
        # force a wildly negative extrapolation input
        X = np.full((1, train[1].X.shape[1]), -100.0)
        assert bank.predict(1, "speed", X)[0] >= 0.0
