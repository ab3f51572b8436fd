"""Predictive multiplicity of survival models.

Random survival forests, Rashomon sets, and the ambiguity, discrepancy and
obscurity of their risk estimates, with a CMAPSS ingestion pipeline.
"""

__version__ = "0.1.0"

from .exceptions import (
    DomainError,
    FormatError,
    ParseError,
    ScoringError,
    SurvmultError,
    UndefinedResultError,
)
from .forest import HyperParams, SurvivalForest, fit_forest, predict_chf, predict_risk
from .metrics import PerformanceScore, brier_score, c_index, integrated_brier
from .rashomon import (
    MultiplicityReport,
    PredictionCube,
    ambiguity,
    discrepancy,
    obscurity,
    rashomon_set,
    select_reference,
    sweep,
)
from .survival_core import (
    StepFunction,
    SurvivalDataset,
    km_estimate,
    na_cumhaz,
    reverse_km_censoring,
)
from .config import ExperimentConfig, build_model_grid, load_config
from .pipeline import Experiment, run_experiment
