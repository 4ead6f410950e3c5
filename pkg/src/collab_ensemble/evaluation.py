"""Learning-curve evaluation of the ensemble and the two baselines.

Two protocols are provided. The simulated-user protocol draws training users
who each like exactly one item category and separate test users whose
relevance is known for every item. The leave-one-out protocol takes a fixed
ratings matrix, uses every user once as query, and treats unrated items as
not relevant (so the measured precision is a lower bound).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import expit

from .baselines import RatingsMatrix, cbf_scores, cf_scores, train_cbf
from .ensemble import (
    PROB_EPS,
    EnsembleModel,
    UserRatings,
    build_ensemble,
    rank_by_score,
    train_member,
    weights_from_log_likelihoods,
)
from .errors import InputError
from .features import ItemCatalog, KernelConfig
from .rng import make_rng
from .svm import SvmParams, decision_values, train_svm

METHODS = ("ensemble", "cf", "cbf")
SAMPLE_RETRIES = 50
DEFAULT_BUDGETS = (2, 5, 10, 20, 50, 100)


@dataclass(frozen=True)
class SynthConfig:
    n_train_users: int
    n_test_users: int
    examples_per_user: int
    categories: Mapping[str, frozenset[str]]
    seed: int = 0

    def __post_init__(self):
        if self.examples_per_user < 2:
            raise InputError("examples_per_user must be at least 2")
        if self.n_train_users < 0 or self.n_test_users < 0:
            raise InputError("user counts must be non-negative")


@dataclass(frozen=True)
class EvalConfig:
    budgets: tuple[int, ...] = DEFAULT_BUDGETS
    top_n: int = 100
    repetitions: int = 1
    seed: int = 0

    def __post_init__(self):
        budgets = tuple(int(b) for b in self.budgets)
        if not budgets or any(b < 1 for b in budgets):
            raise InputError("budgets must be positive integers")
        if any(b2 <= b1 for b1, b2 in zip(budgets, budgets[1:])):
            raise InputError("budgets must be strictly increasing")
        if self.top_n < 1 or self.repetitions < 1:
            raise InputError("top_n and repetitions must be positive")
        object.__setattr__(self, "budgets", budgets)


@dataclass(frozen=True)
class QueryUser:
    """A user to evaluate: the ratings query sets are drawn from, and the relevant items."""

    ratings: UserRatings
    relevant: frozenset[str]
    category: str | None = None


@dataclass(frozen=True)
class BudgetResult:
    budget: int
    values: tuple[float, ...]
    n_skipped: int

    @property
    def n_evaluated(self) -> int:
        return len(self.values)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values)) if self.values else math.nan

    @property
    def std_err(self) -> float:
        if len(self.values) < 2:
            return 0.0 if self.values else math.nan
        return float(np.std(self.values, ddof=1) / math.sqrt(len(self.values)))


@dataclass(frozen=True)
class LearningCurveReport:
    method: str
    rows: tuple[BudgetResult, ...]
    metadata: Mapping[str, object] = field(default_factory=dict)

    def row(self, budget: int) -> BudgetResult:
        for r in self.rows:
            if r.budget == budget:
                return r
        raise KeyError(budget)

    def to_tsv(self) -> str:
        lines = ["budget\tmean_precision\tstd_err\tn_evaluated\tn_skipped"]
        for r in self.rows:
            if r.n_evaluated:
                lines.append(f"{r.budget}\t{r.mean!r}\t{r.std_err!r}\t{r.n_evaluated}\t{r.n_skipped}")
            else:
                lines.append(f"{r.budget}\tNA\tNA\t0\t{r.n_skipped}")
        return "\n".join(lines) + "\n"

    def metadata_json(self) -> str:
        return json.dumps({"method": self.method, **self.metadata}, sort_keys=True, indent=2) + "\n"


def merge_reports(reports: Sequence[LearningCurveReport]) -> LearningCurveReport:
    """Pool per-run precision values of reports covering the same budgets."""
    first = reports[0]
    rows = []
    for k, r0 in enumerate(first.rows):
        rows.append(
            BudgetResult(
                r0.budget,
                tuple(v for rep in reports for v in rep.rows[k].values),
                sum(rep.rows[k].n_skipped for rep in reports),
            )
        )
    return LearningCurveReport(first.method, tuple(rows), {"pooled_runs": len(reports)})


# --------------------------------------------------------------------------


def precision_at_n(ranked: Sequence[str], relevant, n: int) -> float:
    """Fraction of the top ``n`` ranked items that are relevant."""
    if n < 1:
        raise InputError("n must be at least 1")
    if not ranked:
        warnings.warn("empty ranking; precision defined as 0", RuntimeWarning, stacklevel=2)
        return 0.0
    if len(ranked) < n:
        warnings.warn(f"ranking has {len(ranked)} < {n} entries", RuntimeWarning, stacklevel=2)
    top = ranked[:n]
    return sum(1 for i in top if i in relevant) / n


def generate_synthetic_users(
    cfg: SynthConfig, catalog: ItemCatalog
) -> tuple[list[UserRatings], list[QueryUser]]:
    """Draw single-category training users and fully-labelled test users.

    Each user likes exactly one category, chosen uniformly. Training users get
    ``examples_per_user`` items drawn uniformly without replacement, redrawn
    until both labels occur.
    """
    items = sorted(i for i in cfg.categories if i in catalog)
    cats = sorted({c for i in items for c in cfg.categories[i]})
    if len(cats) < 2:
        raise InputError("need at least two categories")
    if cfg.examples_per_user > len(items):
        raise InputError("examples_per_user exceeds the number of items")
    members = {c: frozenset(i for i in items if c in cfg.categories[i]) for c in cats}

    train = []
    for k in range(cfg.n_train_users):
        rng = make_rng(cfg.seed, "train-user", k)
        cat = cats[int(rng.integers(len(cats)))]
        for _ in range(SAMPLE_RETRIES):
            draw = [items[j] for j in rng.choice(len(items), cfg.examples_per_user, replace=False)]
            ratings = {i: 1 if i in members[cat] else -1 for i in draw}
            if len(set(ratings.values())) == 2:
                break
        else:
            raise InputError(f"category {cat!r}: could not draw both a positive and a negative example")
        train.append(UserRatings(f"train{k:04d}", ratings))

    test = []
    for k in range(cfg.n_test_users):
        rng = make_rng(cfg.seed, "test-user", k)
        cat = cats[int(rng.integers(len(cats)))]
        labels = {i: 1 if i in members[cat] else -1 for i in items}
        test.append(QueryUser(UserRatings(f"test{k:04d}", labels), members[cat], cat))
    return train, test


def _conditional_draw(pool: UserRatings, budget: int, rng: np.random.Generator) -> UserRatings:
    """Uniform draw among the ``budget``-subsets that hold both classes.

    The number of positives k is drawn with probability proportional to
    C(P, k) C(N, budget - k) over 1 <= k <= budget - 1, then k positives and
    budget - k negatives are drawn uniformly.
    """
    pos = pool.positives
    neg = [i for i in pool.item_ids if pool.ratings[i] < 0]
    ks = np.arange(max(1, budget - len(neg)), min(len(pos), budget - 1) + 1)
    log_w = np.array([_log_comb(len(pos), k) + _log_comb(len(neg), budget - k) for k in ks])
    p = np.exp(log_w - log_w.max())
    k = int(ks[rng.choice(ks.size, p=p / p.sum())])
    chosen = [pos[j] for j in rng.choice(len(pos), k, replace=False)]
    chosen += [neg[j] for j in rng.choice(len(neg), budget - k, replace=False)]
    return pool.subset(chosen)


def _log_comb(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def draw_query(pool: UserRatings, budget: int, rng: np.random.Generator) -> UserRatings | None:
    """Sample ``budget`` ratings holding both classes.

    Up to ``SAMPLE_RETRIES`` plain uniform draws are tried first; if all hold
    a single class, the sample comes from the exact conditional distribution
    instead, so the result is uniform over both-class subsets either way.
    Returns None only when no such subset exists (budget above the pool size,
    budget below 2, or a single-class pool).
    """
    ids = pool.item_ids
    if len(ids) < budget or budget < 2 or not pool.has_both_classes:
        return None
    for _ in range(SAMPLE_RETRIES):
        sample = pool.subset([ids[j] for j in rng.choice(len(ids), budget, replace=False)])
        if sample.has_both_classes:
            return sample
    return _conditional_draw(pool, budget, rng)


Scorer = Callable[[int, UserRatings, list], np.ndarray]


def _curve(
    method: str,
    scorer: Scorer,
    queries: Sequence[QueryUser],
    catalog: ItemCatalog,
    cfg: EvalConfig,
    meta,
) -> LearningCurveReport:
    all_ids = catalog.ids
    rows = []
    for budget in cfg.budgets:
        values = []
        skipped = 0
        for qi, q in enumerate(queries):
            for rep in range(cfg.repetitions):
                rng = make_rng(cfg.seed, "query", q.ratings.user_id, budget, rep)
                sample = draw_query(q.ratings, budget, rng)
                if sample is None:
                    skipped += 1
                    continue
                candidates = [i for i in all_ids if i not in sample.ratings]
                assert not set(candidates) & set(sample.ratings), "query item leaked into candidates"
                ranked = rank_by_score(candidates, scorer(qi, sample, candidates))
                values.append(precision_at_n([i for i, _ in ranked], q.relevant, cfg.top_n))
        rows.append(BudgetResult(budget, tuple(values), skipped))
    meta = {
        "budgets": list(cfg.budgets),
        "repetitions": cfg.repetitions,
        "seed": cfg.seed,
        "top_n": cfg.top_n,
        **meta,
    }
    return LearningCurveReport(method, tuple(rows), meta)


class _EnsembleScorer:
    """Scores items for many queries against a fixed ensemble.

    Member decision values over the whole catalog are computed once.
    """

    def __init__(self, ensemble: EnsembleModel, catalog: ItemCatalog, include_self: bool, seed: int):
        self.ensemble = ensemble
        self.catalog = catalog
        self.include_self = include_self
        self.seed = seed
        self.slopes = np.array([m.slope for m in ensemble.members])
        self.dec = np.zeros((0, len(catalog)))
        if len(ensemble):
            self.dec = np.vstack([decision_values(m.svm, catalog.matrix) for m in ensemble.members])

    def score(self, sample: UserRatings, candidates, exclude: Sequence[int] = ()) -> np.ndarray:
        cat = self.catalog
        keep = np.setdiff1d(np.arange(len(self.slopes)), np.asarray(exclude, dtype=np.int64))
        slopes = self.slopes[keep]
        dec = self.dec[keep]
        if self.include_self:
            own = train_member(sample, cat, self.ensemble.params, self.ensemble.kernel, self.seed)
            slopes = np.append(slopes, own.slope)
            dec = np.vstack([dec, decision_values(own.svm, cat.matrix)])
        if slopes.size == 0:
            raise InputError("ensemble has no members for this query")
        qcols = [cat.row_of[i] for i in sample.item_ids]
        y = np.array([sample.ratings[i] for i in sample.item_ids], dtype=np.float64)
        p = expit(-y[None, :] * slopes[:, None] * dec[:, qcols])
        ll = np.sum(np.log(np.clip(p, PROB_EPS, 1.0 - PROB_EPS)), axis=1)
        weights, _ = weights_from_log_likelihoods(ll)
        ccols = [cat.row_of[i] for i in candidates]
        return weights @ expit(-slopes[:, None] * dec[:, ccols])


def _make_scorer(
    method: str,
    pool_users: Sequence[UserRatings],
    catalog: ItemCatalog,
    params: SvmParams,
    kernel: KernelConfig,
    seed: int,
    include_self: bool,
    loo_ids: Sequence[str] | None = None,
) -> Scorer:
    """Build a scorer; with ``loo_ids`` the query's own row is left out of the pool."""
    if method == "ensemble":
        ens = build_ensemble(pool_users, catalog, params, kernel, seed)
        es = _EnsembleScorer(ens, catalog, include_self, seed)
        index = {uid: k for k, uid in enumerate(ens.user_ids)}

        def score(qi, sample, candidates):
            exclude = [index[loo_ids[qi]]] if loo_ids is not None and loo_ids[qi] in index else []
            return es.score(sample, candidates, exclude)

        return score
    if method == "cf":
        matrix = RatingsMatrix(tuple(pool_users), frozenset(catalog.ids))

        def score(qi, sample, candidates):
            m = matrix.without(loo_ids[qi]) if loo_ids is not None else matrix
            return cf_scores(m, UserRatings("\x00query", sample.ratings), candidates)

        return score
    if method == "cbf":

        def score(qi, sample, candidates):
            model = train_cbf(sample, catalog, params, kernel, seed)
            return cbf_scores(model, candidates, catalog)

        return score
    raise InputError(f"unknown method {method!r}; expected one of {METHODS}")


def run_learning_curve(
    method: str,
    train: Sequence[UserRatings],
    test: Sequence[QueryUser],
    catalog: ItemCatalog,
    cfg: EvalConfig,
    params: SvmParams | None = None,
    kernel: KernelConfig | None = None,
    include_self: bool = False,
) -> LearningCurveReport:
    """Precision@N learning curve of one method on held-out test users.

    Query sets of each size in ``cfg.budgets`` are drawn from every test user's
    ratings (identically across methods, both classes required); all other
    catalog items are ranked and scored against the user's relevant set.
    With ``include_self`` the ensemble also gets a member trained on the query
    set itself.
    """
    params = params or SvmParams()
    kernel = kernel or KernelConfig.linear()
    scorer = _make_scorer(method, train, catalog, params, kernel, cfg.seed, include_self)
    meta = {
        "protocol": "simulated-users",
        "C": params.C,
        "kernel": kernel.kind,
        "gamma": kernel.gamma,
        "include_self": include_self,
        "n_train_users": len(train),
        "n_test_users": len(test),
    }
    return _curve(method, scorer, test, catalog, cfg, meta)


def run_loo_protocol(
    users: RatingsMatrix,
    catalog: ItemCatalog,
    cfg: EvalConfig,
    method: str,
    params: SvmParams | None = None,
    kernel: KernelConfig | None = None,
) -> LearningCurveReport:
    """Leave-one-user-out learning curve; unrated items count as not relevant."""
    if len(users.users) < 2:
        raise InputError("leave-one-out needs at least two users")
    params = params or SvmParams()
    kernel = kernel or KernelConfig.linear()
    ids = [u.user_id for u in users.users]
    scorer = _make_scorer(method, users.users, catalog, params, kernel, cfg.seed, False, loo_ids=ids)
    queries = [QueryUser(u, frozenset(u.positives)) for u in users.users]
    meta = {
        "protocol": "leave-one-out",
        "C": params.C,
        "kernel": kernel.kind,
        "gamma": kernel.gamma,
        "n_users": len(ids),
        "precision_is_lower_bound": True,
    }
    return _curve(method, scorer, queries, catalog, cfg, meta)


# --------------------------------------------------------------------------


def loo_error(user: UserRatings, catalog: ItemCatalog, params: SvmParams, kernel: KernelConfig) -> float:
    """Exact leave-one-out classification error of one user's SVM.

    A fold whose remaining ratings hold one class predicts that class. A zero
    decision value counts as a +1 prediction.
    """
    examples = user.examples(catalog)
    errors = 0
    for k, (_, x, y) in enumerate(examples):
        rest = examples[:k] + examples[k + 1 :]
        labels = [e[2] for e in rest]
        if len(set(labels)) < 2:
            pred = labels[0]
        else:
            f = decision_values(train_svm(rest, params, kernel), x)[0]
            pred = 1 if f >= 0 else -1
        errors += pred != y
    return errors / len(examples)


@dataclass(frozen=True)
class TuningResult:
    C: float
    kernel: KernelConfig
    table: tuple[tuple[float, KernelConfig, float], ...]


def tune_shared_hyperparams(
    train: Sequence[UserRatings],
    catalog: ItemCatalog,
    grid: Sequence[tuple[float, KernelConfig]],
    base: SvmParams | None = None,
) -> TuningResult:
    """Pick the grid point with the lowest mean per-user leave-one-out error.

    Ties go to the smaller C, then the smaller gamma.
    """
    if not grid:
        raise InputError("empty hyperparameter grid")
    for u in train:
        if not u.has_both_classes:
            raise InputError(f"user {u.user_id!r} needs both rating classes for tuning")
    base = base or SvmParams()
    table = []
    for C, kern in grid:
        params = SvmParams(C=C, kkt_tolerance=base.kkt_tolerance, max_passes=base.max_passes)
        err = float(np.mean([loo_error(u, catalog, params, kern) for u in train])) if train else 0.0
        table.append((float(C), kern, err))
    best = min(table, key=lambda t: (t[2], t[0], t[1].gamma or 0.0))
    return TuningResult(best[0], best[1], tuple(table))
