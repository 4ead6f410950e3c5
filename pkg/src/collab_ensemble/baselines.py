"""Comparison recommenders: Pearson-correlation CF and per-user SVM content filtering."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .calibration import PreferenceModel, predict_prob, prob_positive
from .ensemble import UserRatings, train_member
from .errors import InputError
from .features import ItemCatalog, KernelConfig
from .svm import SvmParams


@dataclass(frozen=True)
class RatingsMatrix:
    users: tuple[UserRatings, ...]
    items: frozenset[str] = field(default=None)

    def __post_init__(self):
        users = tuple(self.users)
        ids = [u.user_id for u in users]
        if len(set(ids)) != len(ids):
            raise InputError("duplicate user ids in ratings matrix")
        rated = frozenset(i for u in users for i in u.ratings)
        items = rated if self.items is None else frozenset(self.items)
        if not rated <= items:
            raise InputError("ratings reference items outside the item universe")
        object.__setattr__(self, "users", users)
        object.__setattr__(self, "items", items)

    def user(self, user_id: str) -> UserRatings:
        for u in self.users:
            if u.user_id == user_id:
                return u
        raise InputError(f"unknown user {user_id!r}")

    def without(self, user_id: str) -> RatingsMatrix:
        return RatingsMatrix(tuple(u for u in self.users if u.user_id != user_id), self.items)


def mean_rating(user: UserRatings) -> float:
    return float(np.mean(list(user.ratings.values()))) if len(user) else 0.0


def pearson_weight(a: UserRatings, b: UserRatings) -> float:
    """Pearson correlation over co-rated items; 0 when undefined."""
    common = sorted(set(a.ratings) & set(b.ratings))
    if len(common) < 2:
        return 0.0
    va = np.array([a.ratings[i] for i in common], dtype=np.float64)
    vb = np.array([b.ratings[i] for i in common], dtype=np.float64)
    va -= va.mean()
    vb -= vb.mean()
    den = math.sqrt(float(va @ va) * float(vb @ vb))
    if den == 0.0:
        return 0.0
    return float(np.clip((va @ vb) / den, -1.0, 1.0))


def cf_scores(matrix: RatingsMatrix, active: UserRatings, item_ids: Sequence[str]) -> np.ndarray:
    """Memory-based CF predictions for several items at once.

    score(j) = mean_a + sum_i w(a,i) (v_ij - mean_i) / sum_i |w(a,i)|, summing
    over neighbours that rated j with nonzero weight; the active user's mean
    is returned when there is no such neighbour.
    """
    unknown = [j for j in item_ids if j not in matrix.items]
    if unknown:
        raise InputError(f"unknown item(s): {', '.join(map(repr, unknown))}")
    base = mean_rating(active)
    neighbours = []
    for u in matrix.users:
        if u.user_id == active.user_id:
            continue
        w = pearson_weight(active, u)
        if w != 0.0:
            neighbours.append((w, mean_rating(u), u.ratings))
    out = np.full(len(item_ids), base)
    for k, j in enumerate(item_ids):
        num = 0.0
        den = 0.0
        for w, mean_u, ratings in neighbours:
            v = ratings.get(j)
            if v is not None:
                num += w * (v - mean_u)
                den += abs(w)
        if den > 0.0:
            out[k] = base + num / den
    return out


def cf_predict(matrix: RatingsMatrix, active: UserRatings, item_id: str) -> float:
    return float(cf_scores(matrix, active, [item_id])[0])


def train_cbf(
    query: UserRatings, catalog: ItemCatalog, params: SvmParams, kernel: KernelConfig, seed: int = 0
) -> PreferenceModel:
    """Preference model trained on the query user's own ratings only."""
    return train_member(query, catalog, params, kernel, seed)


def cbf_scores(model: PreferenceModel, item_ids: Sequence[str], catalog: ItemCatalog) -> np.ndarray:
    return prob_positive(model, catalog.rows(list(item_ids)))


def cbf_predict(
    query: UserRatings,
    catalog: ItemCatalog,
    params: SvmParams,
    kernel: KernelConfig,
    item_id: str,
    seed: int = 0,
) -> float:
    """p(+1 | item) under an SVM trained on the query user's data alone.

    Raises:
        SingleClassError: the query has a single rating class.
    """
    model = train_cbf(query, catalog, params, kernel, seed)
    return predict_prob(model, catalog[item_id], 1)


def parse_ratings(lines) -> list[UserRatings]:
    """Parse ``user<TAB>item<TAB>+1|-1`` lines; users keep first-appearance order."""
    by_user: dict[str, dict[str, int]] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise InputError(f"line {lineno}: expected 3 tab-separated fields")
        user, item, value = parts
        if value not in ("+1", "-1", "1"):
            raise InputError(f"line {lineno}: rating must be +1 or -1, got {value!r}")
        ratings = by_user.setdefault(user, {})
        if item in ratings:
            raise InputError(f"line {lineno}: user {user!r} rates item {item!r} twice")
        ratings[item] = 1 if value != "-1" else -1
    return [UserRatings(u, r) for u, r in by_user.items()]


def read_ratings(path) -> list[UserRatings]:
    with open(path, encoding="utf-8") as fh:
        return parse_ratings(fh.read().splitlines())


def format_ratings(users) -> str:
    lines = []
    for u in users:
        for item in u.item_ids:
            lines.append(f"{u.user_id}\t{item}\t{'+1' if u.ratings[item] > 0 else '-1'}")
    return "\n".join(lines) + ("\n" if lines else "")
