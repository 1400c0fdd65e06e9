"""Pollution-aware plant operations: short-term wind forecasting, danger
scenarios, and reward-driven production decisions with full backtesting."""

__version__ = "0.1.0"

from . import ensemble, evalsim, features, ingest, models, pipeline, policy
from . import scenario, synthgen
