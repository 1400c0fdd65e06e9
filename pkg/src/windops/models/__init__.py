from .base import (FAMILIES, TARGETS, RegressorSpec, Regressor,
                   TrainingError, model_from_dict)
from .elastic_net import ElasticNetRegressor, train_elastic_net
from .trees import (DecisionTreeModel, RandomForestModel, GradientBoostedModel,
                    train_cart, train_forest, train_gbt)
from .search import (TABLE_GRIDS, FAST_GRIDS, ENSEMBLE_GRID, LeadTimeModelBank,
                     grid_search, train_bank)

__all__ = [
    "FAMILIES", "TARGETS", "RegressorSpec", "Regressor", "TrainingError",
    "model_from_dict", "ElasticNetRegressor", "train_elastic_net",
    "DecisionTreeModel", "RandomForestModel", "GradientBoostedModel",
    "train_cart", "train_forest", "train_gbt",
    "TABLE_GRIDS", "FAST_GRIDS", "ENSEMBLE_GRID", "LeadTimeModelBank",
    "grid_search", "train_bank",
]
