"""Soft-margin kernel SVM trained by sequential minimal optimization.

The solver maximizes the standard C-SVM dual

    W(alpha) = sum(alpha) - 1/2 sum_jk y_j y_k alpha_j alpha_k K_jk
    subject to 0 <= alpha_j <= C and sum_j y_j alpha_j = 0,

whose optimum gives the decision function f(x) = sum_j y_j alpha_j k(x_j, x) + b.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import ConvergenceWarning, InputError, SingleClassError
from .features import FeatureVector, KernelConfig, gram_matrix, kernel_matrix, stack

Example = tuple[str, FeatureVector, int]


@dataclass(frozen=True)
class SvmParams:
    """Shared training settings.

    ``max_passes`` caps the number of pair updates; ``None`` means ``1000 * n``.
    """

    C: float = 1.0
    kkt_tolerance: float = 1e-3
    max_passes: int | None = None

    def __post_init__(self):
        if not (self.C > 0) or not np.isfinite(self.C):
            raise InputError(f"C must be a finite positive number, got {self.C!r}")
        if not (self.kkt_tolerance > 0):
            raise InputError("kkt_tolerance must be positive")
        if self.max_passes is not None and self.max_passes < 1:
            raise InputError("max_passes must be a positive integer")

    def update_cap(self, n: int) -> int:
        return self.max_passes if self.max_passes is not None else 1000 * n


@dataclass(frozen=True, eq=False)
class SvmModel:
    """A trained SVM; only entries with nonzero alpha are kept."""

    item_ids: tuple[str, ...]
    vectors: tuple[FeatureVector, ...]
    labels: np.ndarray
    alphas: np.ndarray
    bias: float
    kernel: KernelConfig
    C: float
    converged: bool = True

    @cached_property
    def coef(self) -> np.ndarray:
        """Per-support-vector weight ``y_j * alpha_j``."""
        return self.labels * self.alphas

    @cached_property
    def support_matrix(self):
        return stack(list(self.vectors)) if self.vectors else None

    @property
    def dim(self) -> int | None:
        return self.vectors[0].dim if self.vectors else None


def _check_examples(examples: Sequence[Example]) -> None:
    if len(examples) < 2:
        raise InputError(f"need at least 2 training examples, got {len(examples)}")
    ids = [e[0] for e in examples]
    if len(set(ids)) != len(ids):
        raise InputError("duplicate item ids in training data")
    labels = {e[2] for e in examples}
    if not labels <= {1, -1}:
        raise InputError(f"labels must be +1 or -1, got {sorted(labels)}")
    if len(labels) < 2:
        raise SingleClassError("training data contains a single class")


def _bias(F: np.ndarray, y: np.ndarray, alpha: np.ndarray, C: float) -> float:
    free = (alpha > 0) & (alpha < C)
    if np.any(free):
        return float(np.mean(F[free]))
    at_zero = alpha <= 0
    at_c = alpha >= C
    lower_mask = (at_zero & (y > 0)) | (at_c & (y < 0))
    upper_mask = (at_zero & (y < 0)) | (at_c & (y > 0))
    lower = F[lower_mask].max() if np.any(lower_mask) else None
    upper = F[upper_mask].min() if np.any(upper_mask) else None
    if lower is None:
        return float(upper)
    if upper is None:
        return float(lower)
    return float(0.5 * (lower + upper))


def smo(K: np.ndarray, y: np.ndarray, C: float, tol: float, cap: int):
    """Solve the C-SVM dual for Gram matrix ``K`` and labels ``y``.

    Returns ``(alpha, bias, converged)``. The working pair is the maximal
    KKT violator; ties go to the lowest index.
    """
    n = y.size
    Q = (y[:, None] * y[None, :]) * K
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 1/2 a'Qa - sum(a)
    converged = False
    updates = 0
    while True:
        F = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        i = int(np.argmax(np.where(up, F, -np.inf)))
        j = int(np.argmin(np.where(low, F, np.inf)))
        if not (F[i] - F[j] >= tol):
            converged = True
            break
        if updates == cap:
            break
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        room_i = C - alpha[i] if y[i] > 0 else alpha[i]
        room_j = alpha[j] if y[j] > 0 else C - alpha[j]
        step = min((F[i] - F[j]) / max(eta, 1e-12), room_i, room_j)
        alpha[i] += y[i] * step
        alpha[j] -= y[j] * step
        # snap to the box so free/bound tests stay exact
        if step == room_i:
            alpha[i] = C if y[i] > 0 else 0.0
        if step == room_j:
            alpha[j] = 0.0 if y[j] > 0 else C
        np.clip(alpha, 0.0, C, out=alpha)
        grad += step * (y[i] * Q[:, i] - y[j] * Q[:, j])
        updates += 1
    F = -y * grad
    return alpha, _bias(F, y, alpha, C), converged


def train_svm(examples: Sequence[Example], params: SvmParams, kernel: KernelConfig) -> SvmModel:
    """Train a soft-margin SVM on ``(item_id, vector, label)`` triples.

    Raises:
        InputError: fewer than two examples, duplicate ids or bad labels.
        SingleClassError: all labels are equal.
    """
    _check_examples(examples)
    vectors = [e[1] for e in examples]
    y = np.array([e[2] for e in examples], dtype=np.float64)
    K = gram_matrix(kernel, vectors)
    alpha, bias, converged = smo(K, y, params.C, params.kkt_tolerance, params.update_cap(len(y)))
    if not converged:
        warnings.warn(
            f"SMO hit the {params.update_cap(len(y))}-update cap before reaching KKT tolerance",
            ConvergenceWarning,
            stacklevel=2,
        )
    keep = np.flatnonzero(alpha > 0)
    return SvmModel(
        item_ids=tuple(examples[k][0] for k in keep),
        vectors=tuple(vectors[k] for k in keep),
        labels=y[keep],
        alphas=alpha[keep],
        bias=bias,
        kernel=kernel,
        C=params.C,
        converged=converged,
    )


def decision_values(model: SvmModel, rows) -> np.ndarray:
    """Decision values for a batch of rows (vectors or a sparse matrix)."""
    if isinstance(rows, FeatureVector):
        rows = [rows]
    if model.support_matrix is None:
        n = len(rows) if isinstance(rows, (list, tuple)) else rows.shape[0]
        return np.full(n, model.bias)
    k = kernel_matrix(model.kernel, model.support_matrix, rows)
    return model.coef @ k + model.bias


def decision_value(model: SvmModel, x: FeatureVector) -> float:
    if model.dim is not None and x.dim != model.dim:
        raise InputError(f"dimensionality mismatch: {x.dim} != {model.dim}")
    return float(decision_values(model, x)[0])


def dual_objective(model: SvmModel) -> float:
    """Value of the dual objective W(alpha) at the model's multipliers."""
    if not model.vectors:
        return 0.0
    K = gram_matrix(model.kernel, list(model.vectors))
    c = model.coef
    return float(model.alphas.sum() - 0.5 * c @ K @ c)
