"""Hand-built models for tests that need exact, controllable probabilities."""

from __future__ import annotations

import numpy as np

from collab_ensemble.calibration import PreferenceModel
from collab_ensemble.ensemble import EnsembleModel
from collab_ensemble.features import FeatureVector, KernelConfig
from collab_ensemble.svm import SvmModel, SvmParams

LIN = KernelConfig.linear()


def linear_member(user_id: str, w, bias: float, slope: float) -> PreferenceModel:
    """Member with decision function f(x) = w . x + bias.

    Built from one support vector per coordinate (unit basis vectors), so
    coef_j = w_j.
    """
    w = np.asarray(w, dtype=np.float64)
    dim = w.size
    vecs = tuple(FeatureVector.from_dense(np.eye(dim)[j]) for j in range(dim))
    labels = np.where(w >= 0, 1.0, -1.0)
    keep = np.flatnonzero(w != 0)
    svm = SvmModel(
        item_ids=tuple(f"e{j}" for j in keep),
        vectors=tuple(vecs[j] for j in keep),
        labels=labels[keep],
        alphas=np.abs(w[keep]),
        bias=float(bias),
        kernel=LIN,
        C=1e6,
    )
    return PreferenceModel(svm, float(slope), user_id)


def ensemble_of(members) -> EnsembleModel:
    return EnsembleModel(members=tuple(members), kernel=LIN, params=SvmParams(C=1e6))
