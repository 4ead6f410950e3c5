"""Probability outputs for per-user SVMs via a single-slope sigmoid.

A trained SVM with decision function f is turned into

    p(y | x) = 1 / (1 + exp(y * A * f(x))),    A < 0,

which keeps the SVM's decision boundary f(x) = 0. The slope A is fitted by
maximizing the likelihood of held-out decision values from three-fold
stratified cross-validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit

from .errors import InputError
from .features import FeatureVector, KernelConfig
from .rng import make_rng
from .svm import Example, SvmModel, SvmParams, decision_values, train_svm

SLOPE_MIN = -100.0
SLOPE_MAX = -1e-4
N_FOLDS = 3
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class PreferenceModel:
    """Calibrated preference model of one user."""

    svm: SvmModel
    slope: float
    user_id: str = ""
    trained_on: int = 0

    def __post_init__(self):
        if not (SLOPE_MIN <= self.slope <= SLOPE_MAX):
            raise InputError(f"slope {self.slope!r} outside [{SLOPE_MIN}, {SLOPE_MAX}]")


def slope_nll(slope: float, scores: np.ndarray, labels: np.ndarray) -> float:
    """Negative log-likelihood of ``labels`` given decision values and a slope."""
    return float(np.sum(np.logaddexp(0.0, labels * slope * scores)))


def fit_slope_from_scores(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Maximum-likelihood slope on ``[SLOPE_MIN, SLOPE_MAX]``.

    The objective is convex in the slope, so golden-section search finds the
    optimum; a dense scan around the final bracket and the two interval ends
    guards against the optimum sitting on a boundary.
    """
    f = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    nll = lambda a: slope_nll(a, f, y)  # noqa: E731

    lo, hi = SLOPE_MIN, SLOPE_MAX
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = nll(x1), nll(x2)
    for _ in range(200):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = nll(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = nll(x2)
    width = max(hi - lo, 1e-9)
    candidates = np.concatenate(
        [np.linspace(lo - 10 * width, hi + 10 * width, 101), [SLOPE_MIN, SLOPE_MAX, x1, x2]]
    )
    candidates = np.clip(candidates, SLOPE_MIN, SLOPE_MAX)
    values = [nll(a) for a in candidates]
    return float(candidates[int(np.argmin(values))])


def stratified_folds(labels: Sequence[int], seed: int, n_folds: int = N_FOLDS) -> list[np.ndarray]:
    """Split example positions into class-stratified folds, deterministically from ``seed``."""
    rng = make_rng(seed, "folds")
    y = np.asarray(labels)
    assignment = np.empty(y.size, dtype=np.int64)
    for cls in (1, -1):
        pos = np.flatnonzero(y == cls)
        pos = pos[rng.permutation(pos.size)]
        assignment[pos] = np.arange(pos.size) % n_folds
    return [np.flatnonzero(assignment == k) for k in range(n_folds)]


def held_out_scores(
    examples: Sequence[Example], params: SvmParams, kernel: KernelConfig, seed: int
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Decision values used for slope fitting.

    Returns ``(scores, labels, cross_validated)``. When either class has fewer
    than three examples, stratified three-fold CV is impossible and the final
    model's outputs on its own training data are returned instead.
    """
    y = np.array([e[2] for e in examples])
    if min(np.sum(y == 1), np.sum(y == -1)) < N_FOLDS:
        return None, y, False
    scores = np.empty(y.size)
    for fold in stratified_folds(y, seed):
        in_fold = set(fold.tolist())
        train = [e for k, e in enumerate(examples) if k not in in_fold]
        model = train_svm(train, params, kernel)
        scores[fold] = decision_values(model, [examples[k][1] for k in fold])
    return scores, y, True


def fit_slope(
    examples: Sequence[Example],
    params: SvmParams,
    kernel: KernelConfig,
    user_id: str = "",
    seed: int = 0,
) -> PreferenceModel:
    """Train an SVM on all examples and fit its calibration slope.

    Raises:
        SingleClassError: the examples contain only one class.
    """
    svm = train_svm(examples, params, kernel)
    scores, y, _ = held_out_scores(examples, params, kernel, seed)
    if scores is None:
        scores = decision_values(svm, [e[1] for e in examples])
    slope = fit_slope_from_scores(scores, y)
    return PreferenceModel(svm=svm, slope=slope, user_id=user_id, trained_on=len(examples))


def prob_positive(model: PreferenceModel, rows) -> np.ndarray:
    """p(y=+1 | x) for a batch of rows."""
    return expit(-model.slope * decision_values(model.svm, rows))


def predict_prob(model: PreferenceModel, x: FeatureVector, y: int) -> float:
    """p(y | x) for a single item and rating ``y`` in {+1, -1}."""
    if y not in (1, -1):
        raise InputError(f"rating must be +1 or -1, got {y!r}")
    if model.svm.dim is not None and x.dim != model.svm.dim:
        raise InputError(f"dimensionality mismatch: {x.dim} != {model.svm.dim}")
    f = decision_values(model.svm, x)[0]
    return float(expit(-y * model.slope * f))
