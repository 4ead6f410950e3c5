"""Command-line interface: ``collab-ensemble <command> [options]``.

Commands:

* ``ingest``     build an item catalog from a text corpus or a feature file
* ``train``      train an ensemble from a ratings file into a model store
* ``recommend``  rank catalog items for a query user
* ``simulate``   simulated-user learning curves on a category-labelled corpus
* ``evaluate``   leave-one-user-out learning curves on a ratings matrix
* ``tune``       choose shared C and kernel by mean leave-one-out error

Exit status is 0 on success, 2 for bad input, 3 for an unusable model store
or other state problems, and 4 for unexpected internal errors.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .baselines import RatingsMatrix, parse_ratings, read_ratings
from .ensemble import UserRatings, add_user, build_ensemble, rank_items, retrain_user
from .errors import InputError, StateError, StoreFormatError
from .evaluation import (
    DEFAULT_BUDGETS,
    METHODS,
    EvalConfig,
    SynthConfig,
    generate_synthetic_users,
    run_learning_curve,
    run_loo_protocol,
    tune_shared_hyperparams,
)
from .features import (
    ItemCatalog,
    KernelConfig,
    build_tfidf,
    format_features,
    read_corpus,
    read_features,
)
from .store import ModelStore, catalog_fingerprint
from .svm import SvmParams
from .synthetic import load_fixture, text_corpus

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_STATE = 3
EXIT_INTERNAL = 4


@dataclass(frozen=True)
class RunConfig:
    """Validated union of the options shared by the commands."""

    kernel: KernelConfig
    params: SvmParams
    seed: int
    budgets: tuple[int, ...]
    top_n: int
    reps: int
    methods: tuple[str, ...]

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> RunConfig:
        def check(name, ok, msg):
            if not ok:
                raise InputError(f"--{name}: {msg}")

        kind = getattr(args, "kernel", "linear")
        gamma = getattr(args, "gamma", None)
        check("gamma", kind == "rbf" or gamma is None, "only valid with --kernel rbf")
        check("gamma", kind != "rbf" or (gamma is not None and gamma > 0), "rbf kernel needs --gamma > 0")
        C = getattr(args, "c", 1.0)
        check("c", C > 0, f"must be positive, got {C!r}")
        seed = getattr(args, "seed", 0)
        check("seed", 0 <= seed < 2**64, "must be a 64-bit unsigned integer")
        budgets = tuple(getattr(args, "budgets", None) or DEFAULT_BUDGETS)
        check("budgets", all(b >= 1 for b in budgets), "must be positive")
        check("budgets", all(b2 > b1 for b1, b2 in zip(budgets, budgets[1:])), "must be strictly increasing")
        top_n = getattr(args, "top_n", 10)
        check("top-n", top_n >= 1, "must be at least 1")
        reps = getattr(args, "reps", 1)
        check("reps", reps >= 1, "must be at least 1")
        methods = tuple(getattr(args, "method", None) or METHODS)
        return cls(
            kernel=KernelConfig(kind, gamma),
            params=SvmParams(C=C),
            seed=seed,
            budgets=budgets,
            top_n=top_n,
            reps=reps,
            methods=methods,
        )

    def eval_config(self) -> EvalConfig:
        return EvalConfig(budgets=self.budgets, top_n=self.top_n, repetitions=self.reps, seed=self.seed)


# --------------------------------------------------------------------------
# argument helpers


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _methods(text: str) -> list[str]:
    names = [t.strip() for t in text.split(",") if t.strip()]
    bad = [n for n in names if n not in METHODS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"methods must be from {','.join(METHODS)}, got {text!r}")
    return names


def parse_grid(text: str) -> list[tuple[float, KernelConfig]]:
    """Parse ``C`` (linear) or ``C:gamma`` (rbf) points separated by commas."""
    grid = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            if ":" in token:
                c, g = token.split(":", 1)
                grid.append((float(c), KernelConfig.rbf(float(g))))
            else:
                grid.append((float(token), KernelConfig.linear()))
        except ValueError:
            raise InputError(f"--grid: bad grid point {token!r}") from None
        if not grid[-1][0] > 0:
            raise InputError(f"--grid: C must be positive in {token!r}")
    if not grid:
        raise InputError("--grid: empty grid")
    return grid


def parse_inline_query(text: str, user_id: str = "query") -> UserRatings:
    """Parse ``item:+1,item:-1`` into a query user."""
    ratings = {}
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        item, sep, value = token.rpartition(":")
        if not sep or value not in ("+1", "-1", "1"):
            raise InputError(f"--query-inline: expected item:+1 or item:-1, got {token!r}")
        if item in ratings:
            raise InputError(f"--query-inline: item {item!r} rated twice")
        ratings[item] = -1 if value == "-1" else 1
    return UserRatings(user_id, ratings)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _read_categories(path) -> dict[str, frozenset[str]]:
    cats = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise InputError(f"{path}: line {lineno}: expected item<TAB>categories")
            cats[parts[0]] = frozenset(c for c in parts[1].split(",") if c)
    return cats


def _format_categories(cats) -> str:
    return "".join(f"{i}\t{','.join(sorted(cats[i]))}\n" for i in sorted(cats))


def _load_catalog(path) -> ItemCatalog:
    try:
        return read_features(path)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


def _load_ratings(path) -> list[UserRatings]:
    try:
        return read_ratings(path)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


def _check_rated_items(users: Sequence[UserRatings], catalog: ItemCatalog) -> None:
    unknown = sorted({i for u in users for i in u.ratings if i not in catalog})
    if unknown:
        raise InputError(f"ratings reference unknown item(s): {', '.join(map(repr, unknown[:10]))}")


@contextmanager
def _collect_warnings(stderr):
    """Summarize solver and vector warnings as one stderr line per kind."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        yield
    counts = Counter(w.category.__name__ for w in caught)
    for name in sorted(counts):
        stderr.write(f"warning: {name} raised {counts[name]} time(s)\n")


def _write_reports(out: Path, reports, stdout) -> None:
    for rep in reports:
        _write(out / f"{rep.method}.tsv", rep.to_tsv())
        _write(out / f"{rep.method}.meta.json", rep.metadata_json())
        stdout.write(f"# {rep.method}\n{rep.to_tsv()}")


# --------------------------------------------------------------------------
# commands


def cmd_ingest(args, stdout) -> int:
    fmt = args.format
    if fmt == "auto":
        with open(args.input, encoding="utf-8") as fh:
            first = next((line for line in fh if line.strip()), "")
        fmt = "features" if first.startswith("#") else "corpus"
    if fmt == "features":
        catalog = _load_catalog(args.input)
        n_docs, n_terms = len(catalog), catalog.dim
        extra = ""
    else:
        corpus, cats = read_corpus(args.input)
        index = build_tfidf(corpus)
        catalog = index.catalog
        n_docs, n_terms = len(corpus), len(index.vocabulary)
        extra = f"empty_documents\t{len(index.empty_docs)}\n"
        if args.categories:
            _write(Path(args.categories), _format_categories({d: cats[d] for d in catalog.ids}))
    if not len(catalog):
        raise InputError("ingest produced an empty catalog")
    _write(Path(args.catalog), format_features(catalog))
    stdout.write(f"documents\t{n_docs}\nitems\t{len(catalog)}\nfeatures\t{n_terms}\n{extra}")
    return EXIT_OK


def _summary(ensemble, stdout) -> None:
    stdout.write(f"members\t{len(ensemble)}\npending\t{len(ensemble.pending)}\n")
    for m in ensemble.members:
        stdout.write(f"member\t{m.user_id}\t{m.trained_on}\t{len(m.svm.item_ids)}\t{m.slope!r}\n")
    for p in ensemble.pending:
        stdout.write(f"pending\t{p}\n")


def cmd_train(args, stdout) -> int:
    cfg = RunConfig.from_args(args)
    store = ModelStore(args.store)
    users = _load_ratings(args.ratings)
    if args.user is not None:
        ensemble, catalog = store.load()
        matches = [u for u in users if u.user_id == args.user]
        if not matches:
            raise InputError(f"user {args.user!r} has no ratings in {args.ratings}")
        _check_rated_items(matches, catalog)
        if args.user in ensemble.user_ids or args.user in ensemble.pending:
            ensemble = retrain_user(ensemble, args.user, matches[0], catalog, cfg.seed)
        else:
            ensemble = add_user(ensemble, matches[0], catalog, cfg.seed)
    else:
        if args.catalog is None:
            raise InputError("--catalog is required when training a new store")
        catalog = _load_catalog(args.catalog)
        _check_rated_items(users, catalog)
        ensemble = build_ensemble(users, catalog, cfg.params, cfg.kernel, cfg.seed, catalog_fingerprint(catalog))
        if not len(ensemble):
            raise InputError("no trainable users: every user needs at least one +1 and one -1 rating")
    store.save(ensemble, catalog)
    _summary(ensemble, stdout)
    return EXIT_OK


def cmd_recommend(args, stdout) -> int:
    ensemble, catalog = ModelStore(args.store).load()
    if not len(ensemble):
        raise StateError("the stored ensemble has no trained members")
    if args.query_inline is not None:
        query = parse_inline_query(args.query_inline)
    elif args.query is not None:
        with open(args.query, encoding="utf-8") as fh:
            users = parse_ratings(fh.read().splitlines())
        if len(users) > 1:
            raise InputError(f"{args.query}: query file must hold a single user")
        query = users[0] if users else UserRatings("query", {})
    else:
        query = UserRatings("query", {})
    _check_rated_items([query], catalog)
    candidates = [i for i in catalog.ids if i not in query.ratings]
    ranked = rank_items(ensemble, query, candidates, catalog)[: args.top_n]
    for k, (item_id, score) in enumerate(ranked, start=1):
        stdout.write(f"{k}\t{item_id}\t{score!r}\n")
    return EXIT_OK


def cmd_simulate(args, stdout) -> int:
    cfg = RunConfig.from_args(args)
    if args.catalog is not None:
        if args.categories is None:
            raise InputError("--categories is required with --catalog")
        catalog = _load_catalog(args.catalog)
        cats = _read_categories(args.categories)
    else:
        corpus, cats = text_corpus(n_docs=args.docs, n_categories=args.n_categories, seed=cfg.seed)
        catalog = build_tfidf(corpus).catalog
    synth = SynthConfig(args.train_users, args.test_users, args.examples_per_user, cats, cfg.seed)
    train, test = generate_synthetic_users(synth, catalog)
    reports = [
        run_learning_curve(m, train, test, catalog, cfg.eval_config(), cfg.params, cfg.kernel)
        for m in cfg.methods
    ]
    _write_reports(Path(args.out), reports, stdout)
    return EXIT_OK


def cmd_evaluate(args, stdout) -> int:
    cfg = RunConfig.from_args(args)
    if (args.ratings is None) != (args.catalog is None):
        raise InputError("--ratings and --catalog must be given together")
    if args.ratings is None:
        catalog, users = load_fixture()
    else:
        catalog = _load_catalog(args.catalog)
        users = _load_ratings(args.ratings)
    _check_rated_items(users, catalog)
    matrix = RatingsMatrix(tuple(users), frozenset(catalog.ids))
    reports = [run_loo_protocol(matrix, catalog, cfg.eval_config(), m, cfg.params, cfg.kernel) for m in cfg.methods]
    _write_reports(Path(args.out), reports, stdout)
    return EXIT_OK


def cmd_tune(args, stdout) -> int:
    grid = parse_grid(args.grid)
    catalog = _load_catalog(args.catalog)
    users = _load_ratings(args.ratings)
    _check_rated_items(users, catalog)
    result = tune_shared_hyperparams(users, catalog, grid)
    stdout.write("C\tkernel\tgamma\tloo_error\n")
    for C, kern, err in result.table:
        stdout.write(f"{C!r}\t{kern.kind}\t{'NA' if kern.gamma is None else repr(kern.gamma)}\t{err!r}\n")
    gamma = "NA" if result.kernel.gamma is None else repr(result.kernel.gamma)
    stdout.write(f"selected\t{result.C!r}\t{result.kernel.kind}\t{gamma}\n")
    return EXIT_OK


# --------------------------------------------------------------------------


def _add_model_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kernel", choices=("linear", "rbf"), default="linear")
    p.add_argument("--gamma", type=float, default=None, help="rbf width (rbf kernel only)")
    p.add_argument("--c", type=float, default=1.0, help="SVM cost parameter")
    p.add_argument("--seed", type=int, default=0)


def _add_eval_options(p: argparse.ArgumentParser, top_n: int) -> None:
    p.add_argument("--budgets", type=_int_list, default=list(DEFAULT_BUDGETS))
    p.add_argument("--top-n", type=int, default=top_n)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--method", type=_methods, default=list(METHODS), help="comma-separated subset of methods")
    p.add_argument("--out", required=True, help="directory for <method>.tsv and <method>.meta.json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="collab-ensemble", description="Collaborative ensemble of per-user SVM preference models."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build an item catalog")
    p.add_argument("input", help="corpus (id<TAB>cats<TAB>text) or feature file")
    p.add_argument("--format", choices=("auto", "corpus", "features"), default="auto")
    p.add_argument("--catalog", required=True, help="output feature file")
    p.add_argument("--categories", help="also write item<TAB>categories for a corpus")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train an ensemble into a model store")
    p.add_argument("--ratings", required=True)
    p.add_argument("--catalog")
    p.add_argument("--store", required=True)
    p.add_argument("--user", help="retrain or add only this user in an existing store")
    _add_model_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("recommend", help="rank items for a query user")
    p.add_argument("--store", required=True)
    q = p.add_mutually_exclusive_group()
    q.add_argument("--query", help="ratings file for the query user")
    q.add_argument("--query-inline", help="item:+1,item:-1,...")
    p.add_argument("--top-n", type=int, default=10)
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("simulate", help="simulated-user learning curves")
    p.add_argument("--catalog", help="feature file; omit to generate a synthetic corpus")
    p.add_argument("--categories", help="item<TAB>categories file matching --catalog")
    p.add_argument("--docs", type=int, default=1000)
    p.add_argument("--n-categories", type=int, default=10)
    p.add_argument("--train-users", type=int, default=60)
    p.add_argument("--test-users", type=int, default=30)
    p.add_argument("--examples-per-user", type=int, default=30)
    _add_model_options(p)
    _add_eval_options(p, top_n=100)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="leave-one-user-out learning curves")
    p.add_argument("--ratings", help="omit with --catalog to use the bundled fixture")
    p.add_argument("--catalog")
    _add_model_options(p)
    _add_eval_options(p, top_n=20)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("tune", help="choose shared hyperparameters")
    p.add_argument("--ratings", required=True)
    p.add_argument("--catalog", required=True)
    p.add_argument("--grid", required=True, help="comma-separated C (linear) or C:gamma (rbf) points")
    p.set_defaults(func=cmd_tune)
    return parser


def main(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        with _collect_warnings(stderr):
            return args.func(args, stdout)
    except StoreFormatError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_STATE
    except InputError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except (FileNotFoundError, IsADirectoryError, UnicodeDecodeError) as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except StateError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_STATE
    except Exception as exc:  # noqa: BLE001
        stderr.write(f"internal error: {type(exc).__name__}: {exc}\n")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
