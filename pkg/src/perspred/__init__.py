"""Personalized prediction with sparse linear classifiers and halfspace reference classes."""
from __future__ import annotations

__version__ = "0.1.0"

from .core import (
    ConstantClassifier,
    DomainError,
    Halfspace,
    LabeledSample,
    SparseLinearClassifier,
    WellBehavedParams,
    empirical_conditional_error,
)
from .listlearn import ListLearnConfig, sparse_list
from .perpredict import (
    CandidatePair,
    PerPredictConfig,
    PredictionResult,
    conditional_classify,
    personalized_predict,
)
from .refclass import RefClassConfig, learn_reference_class

__all__ = [
    "CandidatePair",
    "ConstantClassifier",
    "DomainError",
    "Halfspace",
    "LabeledSample",
    "ListLearnConfig",
    "PerPredictConfig",
    "PredictionResult",
    "RefClassConfig",
    "SparseLinearClassifier",
    "WellBehavedParams",
    "conditional_classify",
    "empirical_conditional_error",
    "learn_reference_class",
    "personalized_predict",
    "sparse_list",
]
