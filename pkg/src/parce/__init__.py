"""Probabilistic and reconstruction-based competency estimation plus a
competency-aware navigation stack built on a synthetic ground-plane world."""

from .competency import (
    ClassLossModel,
    CompetencyEstimator,
    CompetencyRecord,
    calibrate,
    competency_from_probs,
    gaussian_cdf,
    overall_score,
    p_id_given_class,
    regional_map,
    z_from_confidence,
)
from .config import CLASS_NAMES, VARIANTS, Settings, load_settings
from .errors import CalibrationError, ConfigurationError, DomainError, ParceError, TrainingError
from .metrics import auroc, fpr_at_tpr, ks_distance, summarize

__version__ = "0.1.0"

__all__ = [
    "CLASS_NAMES",
    "VARIANTS",
    "CalibrationError",
    "ClassLossModel",
    "CompetencyEstimator",
    "CompetencyRecord",
    "ConfigurationError",
    "DomainError",
    "ParceError",
    "Settings",
    "TrainingError",
    "auroc",
    "calibrate",
    "competency_from_probs",
    "fpr_at_tpr",
    "gaussian_cdf",
    "ks_distance",
    "load_settings",
    "overall_score",
    "p_id_given_class",
    "regional_map",
    "summarize",
    "z_from_confidence",
]
