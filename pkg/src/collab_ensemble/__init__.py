"""Collaborative ensemble recommender built from per-user SVM preference models.

Each user with ratings gets a probabilistic SVM. A new (query) user is served
by a mixture of those models, weighted by how well each explains the query
user's own ratings. Pearson-correlation collaborative filtering and per-user
content-based SVMs are included as baselines, with learning-curve evaluation.
"""

from .baselines import RatingsMatrix, cbf_predict, cf_predict, cf_scores, pearson_weight
from .calibration import PreferenceModel, fit_slope, predict_prob, prob_positive
from .ensemble import (
    EnsembleModel,
    PredictionResult,
    UserRatings,
    add_user,
    build_ensemble,
    ensemble_weights,
    predict,
    rank_items,
    retrain_user,
)
from .errors import (
    CollabEnsembleError,
    ConvergenceWarning,
    EmptyVectorWarning,
    InputError,
    SingleClassError,
    StateError,
    StoreFormatError,
    StoreVersionError,
)
from .evaluation import (
    EvalConfig,
    LearningCurveReport,
    SynthConfig,
    generate_synthetic_users,
    precision_at_n,
    run_learning_curve,
    run_loo_protocol,
    tune_shared_hyperparams,
)
from .features import FeatureVector, ItemCatalog, KernelConfig, build_tfidf, kernel, transform_tfidf
from .store import ModelStore
from .svm import SvmModel, SvmParams, decision_value, train_svm

__all__ = [
    "CollabEnsembleError",
    "ConvergenceWarning",
    "EmptyVectorWarning",
    "EnsembleModel",
    "EvalConfig",
    "FeatureVector",
    "InputError",
    "ItemCatalog",
    "KernelConfig",
    "LearningCurveReport",
    "ModelStore",
    "PredictionResult",
    "PreferenceModel",
    "RatingsMatrix",
    "SingleClassError",
    "StateError",
    "StoreFormatError",
    "StoreVersionError",
    "SvmModel",
    "SvmParams",
    "SynthConfig",
    "UserRatings",
    "add_user",
    "build_ensemble",
    "build_tfidf",
    "cbf_predict",
    "cf_predict",
    "cf_scores",
    "decision_value",
    "ensemble_weights",
    "fit_slope",
    "generate_synthetic_users",
    "kernel",
    "pearson_weight",
    "precision_at_n",
    "predict",
    "predict_prob",
    "prob_positive",
    "rank_items",
    "retrain_user",
    "run_learning_curve",
    "run_loo_protocol",
    "train_svm",
    "transform_tfidf",
    "tune_shared_hyperparams",
]
