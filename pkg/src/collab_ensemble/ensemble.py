"""Collaborative ensemble: mixture of per-user preference models.

For a query user with observed ratings D_q, every stored model i is weighted
by the likelihood of D_q under it, and the prediction for an item x is

    p(y | D_q, x) = sum_i w_i p(y | x, model_i),
    w_i = p(D_q | model_i) / sum_k p(D_q | model_k).

Weights are computed in log space so long rating histories do not underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.special import expit, logsumexp

from .calibration import PreferenceModel, fit_slope
from .errors import InputError, StateError
from .features import FeatureVector, ItemCatalog, KernelConfig, stack
from .rng import derive_seed
from .svm import Example, SvmParams, decision_values

PROB_EPS = 1e-12


@dataclass(frozen=True)
class UserRatings:
    """One user's binary ratings, keyed by item id."""

    user_id: str
    ratings: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        ratings = dict(self.ratings)
        bad = {v for v in ratings.values() if v not in (1, -1)}
        if bad:
            raise InputError(f"user {self.user_id!r}: ratings must be +1 or -1, got {sorted(bad)}")
        object.__setattr__(self, "ratings", ratings)

    def __len__(self):
        return len(self.ratings)

    @property
    def item_ids(self) -> list[str]:
        return sorted(self.ratings)

    @property
    def positives(self) -> list[str]:
        return [i for i in self.item_ids if self.ratings[i] > 0]

    @property
    def has_both_classes(self) -> bool:
        return len(set(self.ratings.values())) == 2

    def subset(self, item_ids) -> UserRatings:
        return UserRatings(self.user_id, {i: self.ratings[i] for i in item_ids})

    def examples(self, catalog: ItemCatalog) -> list[Example]:
        """``(item_id, vector, label)`` triples in item-id order."""
        return [(i, catalog[i], self.ratings[i]) for i in self.item_ids]


@dataclass(frozen=True)
class EnsembleModel:
    """Ordered set of trained member models sharing kernel and SVM settings."""

    members: tuple[PreferenceModel, ...] = ()
    kernel: KernelConfig = field(default_factory=KernelConfig.linear)
    params: SvmParams = field(default_factory=SvmParams)
    catalog_id: str = ""
    pending: tuple[str, ...] = ()

    def __post_init__(self):
        ids = [m.user_id for m in self.members]
        if len(set(ids)) != len(ids):
            raise InputError("ensemble member user ids must be unique")
        if set(ids) & set(self.pending):
            raise InputError("a user cannot be both a member and pending")
        for m in self.members:
            if m.svm.kernel != self.kernel:
                raise InputError(f"member {m.user_id!r} uses a different kernel")
        dims = {m.svm.dim for m in self.members if m.svm.dim is not None}
        if len(dims) > 1:
            raise InputError("ensemble members disagree on feature dimensionality")

    def __len__(self):
        return len(self.members)

    @property
    def user_ids(self) -> list[str]:
        return [m.user_id for m in self.members]

    def member(self, user_id: str) -> PreferenceModel:
        for m in self.members:
            if m.user_id == user_id:
                return m
        raise InputError(f"unknown ensemble member {user_id!r}")

    def without(self, user_id: str) -> EnsembleModel:
        """Copy with one member (or pending user) removed."""
        return replace(
            self,
            members=tuple(m for m in self.members if m.user_id != user_id),
            pending=tuple(p for p in self.pending if p != user_id),
        )


@dataclass(frozen=True, eq=False)
class PredictionResult:
    prob_like: float
    weights: np.ndarray
    log_evidence: float

    @property
    def prob_dislike(self) -> float:
        return 1.0 - self.prob_like


def _rows(x, catalog: ItemCatalog | None):
    if isinstance(x, FeatureVector):
        return stack([x])
    if catalog is None:
        raise InputError("an item id needs a catalog to resolve it")
    return stack([catalog[x]])


def _query_rows(query: UserRatings, catalog: ItemCatalog):
    ids = query.item_ids
    missing = [i for i in ids if i not in catalog]
    if missing:
        raise InputError(f"query rates unknown item(s): {', '.join(map(repr, missing))}")
    y = np.array([query.ratings[i] for i in ids], dtype=np.float64)
    return catalog.rows(ids), y


def _member_log_likelihood(member: PreferenceModel, rows, y: np.ndarray) -> float:
    p = expit(-y * member.slope * decision_values(member.svm, rows))
    return float(np.sum(np.log(np.clip(p, PROB_EPS, 1.0 - PROB_EPS))))


def log_likelihood(member: PreferenceModel, query: UserRatings, catalog: ItemCatalog) -> float:
    """Log-probability of the query ratings under one member model."""
    if not len(query):
        return 0.0
    rows, y = _query_rows(query, catalog)
    return _member_log_likelihood(member, rows, y)


def log_likelihoods(ensemble: EnsembleModel, query: UserRatings, catalog: ItemCatalog) -> np.ndarray:
    if not len(query):
        return np.zeros(len(ensemble))
    rows, y = _query_rows(query, catalog)
    return np.array([_member_log_likelihood(m, rows, y) for m in ensemble.members])


def ensemble_weights(
    ensemble: EnsembleModel, query: UserRatings, catalog: ItemCatalog
) -> tuple[np.ndarray, float]:
    """Normalized member weights and the log evidence (mean member likelihood).

    Raises:
        StateError: the ensemble has no members.
    """
    if not len(ensemble):
        raise StateError("ensemble has no trained members")
    return weights_from_log_likelihoods(log_likelihoods(ensemble, query, catalog))


def weights_from_log_likelihoods(ll: np.ndarray) -> tuple[np.ndarray, float]:
    total = float(logsumexp(ll))
    weights = np.exp(ll - total)
    weights /= weights.sum()
    return weights, total - math.log(ll.size)


def member_probabilities(ensemble: EnsembleModel, rows) -> np.ndarray:
    """Matrix of p(+1 | x) with one row per member and one column per item row."""
    return np.vstack([expit(-m.slope * decision_values(m.svm, rows)) for m in ensemble.members])


def predict(
    ensemble: EnsembleModel,
    query: UserRatings,
    x: FeatureVector | str,
    catalog: ItemCatalog,
) -> PredictionResult:
    """Mixture probability that the query user likes item ``x``."""
    weights, log_evidence = ensemble_weights(ensemble, query, catalog)
    probs = member_probabilities(ensemble, _rows(x, catalog))[:, 0]
    return PredictionResult(float(weights @ probs), weights, log_evidence)


def score_items(
    ensemble: EnsembleModel, query: UserRatings, item_ids: Sequence[str], catalog: ItemCatalog
) -> np.ndarray:
    weights, _ = ensemble_weights(ensemble, query, catalog)
    return weights @ member_probabilities(ensemble, catalog.rows(list(item_ids)))


def rank_by_score(item_ids: Sequence[str], scores) -> list[tuple[str, float]]:
    """Sort descending by score, ties by ascending item id."""
    return sorted(zip(item_ids, map(float, scores)), key=lambda t: (-t[1], t[0]))


def rank_items(
    ensemble: EnsembleModel,
    query: UserRatings,
    candidates: Sequence[str],
    catalog: ItemCatalog,
) -> list[tuple[str, float]]:
    """Rank candidate items for the query user.

    Raises:
        InputError: a candidate is already rated in the query.
    """
    rated = [c for c in candidates if c in query.ratings]
    if rated:
        raise InputError(f"candidate(s) already rated by the query user: {', '.join(map(repr, rated))}")
    if not candidates:
        return []
    return rank_by_score(candidates, score_items(ensemble, query, candidates, catalog))


def train_member(data: UserRatings, catalog: ItemCatalog, params: SvmParams, kernel: KernelConfig, seed: int):
    return fit_slope(
        data.examples(catalog), params, kernel, user_id=data.user_id, seed=derive_seed(seed, data.user_id)
    )


def _trainable(data: UserRatings) -> bool:
    return len(data) >= 2 and data.has_both_classes


def add_user(ensemble: EnsembleModel, data: UserRatings, catalog: ItemCatalog, seed: int = 0) -> EnsembleModel:
    """Return a new ensemble with ``data``'s user added.

    Users whose ratings cannot train an SVM (fewer than two, or one class) are
    recorded as pending instead. Existing members are left untouched.
    """
    uid = data.user_id
    if uid in ensemble.user_ids or uid in ensemble.pending:
        raise InputError(f"user {uid!r} is already in the ensemble")
    if not _trainable(data):
        return replace(ensemble, pending=ensemble.pending + (uid,))
    model = train_member(data, catalog, ensemble.params, ensemble.kernel, seed)
    return replace(ensemble, members=ensemble.members + (model,))


def retrain_user(
    ensemble: EnsembleModel, user_id: str, data: UserRatings, catalog: ItemCatalog, seed: int = 0
) -> EnsembleModel:
    """Replace (or promote from pending) one user's model; others stay identical."""
    if user_id not in ensemble.user_ids and user_id not in ensemble.pending:
        raise InputError(f"unknown user {user_id!r}")
    data = UserRatings(user_id, data.ratings)
    if not _trainable(data):
        rest = ensemble.without(user_id)
        return replace(rest, pending=rest.pending + (user_id,))
    model = train_member(data, catalog, ensemble.params, ensemble.kernel, seed)
    if user_id in ensemble.pending:
        return replace(
            ensemble,
            members=ensemble.members + (model,),
            pending=tuple(p for p in ensemble.pending if p != user_id),
        )
    return replace(
        ensemble, members=tuple(model if m.user_id == user_id else m for m in ensemble.members)
    )


def build_ensemble(
    users: Sequence[UserRatings],
    catalog: ItemCatalog,
    params: SvmParams,
    kernel: KernelConfig,
    seed: int = 0,
    catalog_id: str = "",
) -> EnsembleModel:
    ens = EnsembleModel(kernel=kernel, params=params, catalog_id=catalog_id)
    for u in users:
        ens = add_user(ens, u, catalog, seed)
    return ens

