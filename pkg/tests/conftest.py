import warnings

import pytest

from windops.pipeline import (PipelineConfig, train_pipeline,
                              train_policy_grid, save_artifacts)
from windops.synthgen import (GeneratorConfig, generate_hourly_truth,
                              generate_official_forecast)

# small grids so integration fixtures train in seconds; the published grids
# are exercised by the dedicated search tests
TINY_GRIDS = {
    "elastic_net": {"alpha": [0.2], "l1_ratio": [0.5]},
    "decision_tree": {"max_depth": [6], "min_samples_split": [3],
                      "min_samples_leaf": [4]},
    "random_forest": {"bootstrap": [True], "n_estimators": [25],
                      "max_depth": [5], "min_samples_split": [4]},
    "gbt_leafwise": {"num_leaves": [15], "max_depth": [4],
                     "learning_rate": [0.2], "lambda_l1": [0.0],
                     "n_estimators": [25]},
    "gbt_depthwise": {"n_estimators": [25], "max_depth": [4],
                      "learning_rate": [0.2]},
}


@pytest.fixture(scope="session")
def tiny_world():
    config = GeneratorConfig(seed=101, duration_hours=700)
    truth = generate_hourly_truth(config)
    forecasts = generate_official_forecast(truth, config)
    return config, truth, forecasts


@pytest.fixture(scope="session")
def tiny_artifacts(tiny_world):
    _, truth, forecasts = tiny_world
    config = PipelineConfig(leads=(1, 2, 3), grid="fast",
                            grid_overrides=TINY_GRIDS, seed=7, policy_lead=3,
                            policy_depth_grid=(2,), policy_min_leaf_grid=(5,))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        artifacts = train_pipeline(truth, forecasts, config)
        train_policy_grid(artifacts, tune=False)
    return artifacts


@pytest.fixture(scope="session")
def artifacts_dir(tiny_artifacts, tmp_path_factory):
    out = tmp_path_factory.mktemp("models")
    save_artifacts(tiny_artifacts, str(out))
    return out
