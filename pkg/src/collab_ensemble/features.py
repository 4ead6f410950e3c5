"""Item representations, kernels and the text to TF-IDF pipeline.

Feature vectors are stored sparse: parallel arrays of strictly increasing
dimension indices and finite values. Dense inputs are converted on ingestion.
"""

from __future__ import annotations

import math
import re
import warnings
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from nltk.stem.porter import PorterStemmer

from .errors import EmptyVectorWarning, InputError

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_STEMMER = PorterStemmer(mode=PorterStemmer.ORIGINAL_ALGORITHM)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """Sparse real-valued item description."""

    indices: np.ndarray
    values: np.ndarray
    dim: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        val = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if idx.shape != val.shape:
            raise InputError("indices and values differ in length")
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise InputError(f"dimensionality must be a positive integer, got {self.dim!r}")
        if idx.size:
            if idx[0] < 0 or idx[-1] >= self.dim:
                raise InputError("feature index out of range")
            if np.any(np.diff(idx) <= 0):
                raise InputError("feature indices must be strictly increasing")
        if not np.all(np.isfinite(val)):
            raise InputError("feature values must be finite")
        idx.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)
        object.__setattr__(self, "dim", int(self.dim))

    @classmethod
    def from_dense(cls, values: Sequence[float]) -> FeatureVector:
        arr = np.asarray(values, dtype=np.float64).reshape(-1)
        nz = np.flatnonzero(arr)
        return cls(nz, arr[nz], arr.size)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, float]], dim: int) -> FeatureVector:
        pairs = list(pairs)
        return cls([p[0] for p in pairs], [p[1] for p in pairs], dim)

    @classmethod
    def zeros(cls, dim: int) -> FeatureVector:
        return cls([], [], dim)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.values, self.values)))

    def __len__(self):
        return int(self.indices.size)

    def __eq__(self, other):
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.dim, self.indices.tobytes(), self.values.tobytes()))

    def __repr__(self):
        return f"FeatureVector(nnz={len(self)}, dim={self.dim})"


def stack(vectors: Sequence[FeatureVector]) -> sp.csr_matrix:
    """Stack vectors of equal dimensionality into a CSR matrix, one row each."""
    if not vectors:
        raise InputError("cannot stack an empty list of vectors")
    dim = vectors[0].dim
    for v in vectors:
        if v.dim != dim:
            raise InputError(f"dimensionality mismatch: {v.dim} != {dim}")
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(v) for v in vectors])
    indices = np.concatenate([v.indices for v in vectors])
    data = np.concatenate([v.values for v in vectors])
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), dim))


@dataclass(frozen=True, eq=False)
class ItemCatalog:
    """Mapping item id -> FeatureVector with a shared dimensionality."""

    items: Mapping[str, FeatureVector]
    dim: int

    def __post_init__(self):
        items = dict(self.items)
        if self.dim < 1 and items:
            raise InputError("catalog dimensionality must be positive")
        for item_id, vec in items.items():
            if vec.dim != self.dim:
                raise InputError(
                    f"item {item_id!r} has dimensionality {vec.dim}, catalog has {self.dim}"
                )
        object.__setattr__(self, "items", items)

    def __len__(self):
        return len(self.items)

    def __contains__(self, item_id):
        return item_id in self.items

    def __getitem__(self, item_id: str) -> FeatureVector:
        try:
            return self.items[item_id]
        except KeyError:
            raise InputError(f"unknown item id {item_id!r}") from None

    @cached_property
    def ids(self) -> tuple[str, ...]:
        """Item ids in sorted order; row order of :attr:`matrix`."""
        return tuple(sorted(self.items))

    @cached_property
    def row_of(self) -> dict[str, int]:
        return {item_id: k for k, item_id in enumerate(self.ids)}

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        return stack([self.items[i] for i in self.ids])

    def rows(self, item_ids: Sequence[str]) -> sp.csr_matrix:
        missing = [i for i in item_ids if i not in self.items]
        if missing:
            raise InputError(f"unknown item id(s): {', '.join(map(repr, missing))}")
        return self.matrix[[self.row_of[i] for i in item_ids]]


@dataclass(frozen=True)
class KernelConfig:
    kind: str = "linear"
    gamma: float | None = None

    def __post_init__(self):
        if self.kind == "linear":
            if self.gamma is not None:
                raise InputError("gamma is only valid for the rbf kernel")
        elif self.kind == "rbf":
            if self.gamma is None or not (self.gamma > 0) or not math.isfinite(self.gamma):
                raise InputError("rbf kernel needs a finite gamma > 0")
            object.__setattr__(self, "gamma", float(self.gamma))
        else:
            raise InputError(f"unknown kernel kind {self.kind!r}")

    @classmethod
    def linear(cls) -> KernelConfig:
        return cls("linear")

    @classmethod
    def rbf(cls, gamma: float) -> KernelConfig:
        return cls("rbf", gamma)


def _sparse_dot(a: FeatureVector, b: FeatureVector) -> float:
    _, ia, ib = np.intersect1d(a.indices, b.indices, assume_unique=True, return_indices=True)
    return float(np.dot(a.values[ia], b.values[ib]))


def kernel(cfg: KernelConfig, a: FeatureVector, b: FeatureVector) -> float:
    """Evaluate the kernel between two vectors."""
    if a.dim != b.dim:
        raise InputError(f"dimensionality mismatch: {a.dim} != {b.dim}")
    if cfg.kind == "linear":
        # intersect1d yields sorted common indices, so the sum order is symmetric
        return _sparse_dot(a, b)
    union = np.union1d(a.indices, b.indices)
    diff = np.zeros(union.size)
    diff[np.searchsorted(union, a.indices)] += a.values
    diff[np.searchsorted(union, b.indices)] -= b.values
    return math.exp(-cfg.gamma * float(np.dot(diff, diff)))


def _as_rows(x) -> sp.csr_matrix:
    if isinstance(x, FeatureVector):
        return stack([x])
    if isinstance(x, (list, tuple)):
        return stack(x)
    return sp.csr_matrix(x)


def kernel_matrix(cfg: KernelConfig, a, b) -> np.ndarray:
    """Dense kernel matrix between row sets ``a`` and ``b``.

    Each argument may be a FeatureVector, a list of them, or a (sparse) matrix.
    """
    a = _as_rows(a)
    b = _as_rows(b)
    if a.shape[1] != b.shape[1]:
        raise InputError(f"dimensionality mismatch: {a.shape[1]} != {b.shape[1]}")
    dots = np.asarray((a @ b.T).todense(), dtype=np.float64)
    if cfg.kind == "linear":
        return dots
    sq_a = np.asarray(a.multiply(a).sum(axis=1)).reshape(-1, 1)
    sq_b = np.asarray(b.multiply(b).sum(axis=1)).reshape(1, -1)
    dist = np.maximum(sq_a + sq_b - 2.0 * dots, 0.0)
    return np.exp(-cfg.gamma * dist)


def gram_matrix(cfg: KernelConfig, items) -> np.ndarray:
    """Symmetric matrix of all pairwise kernel values over ``items``."""
    rows = _as_rows(items)
    if rows.shape[0] == 0:
        raise InputError("gram matrix needs at least one item")
    k = kernel_matrix(cfg, rows, rows)
    k = 0.5 * (k + k.T)
    if cfg.kind == "rbf":
        np.fill_diagonal(k, 1.0)
    return k


# --------------------------------------------------------------------------
# TF-IDF


def load_stopwords(path=None) -> frozenset[str]:
    """Read a stopword list (one word per line); defaults to the bundled English list."""
    if path is None:
        text = resources.files("collab_ensemble").joinpath("data/stopwords_en.txt").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip())


def analyze(text: str, stopwords: frozenset[str] | set[str]) -> list[str]:
    """Lowercase, split on non-alphanumerics, drop stopwords, Porter-stem."""
    return [_STEMMER.stem(tok) for tok in _TOKEN_RE.findall(text.lower()) if tok not in stopwords]


@dataclass(frozen=True, eq=False)
class TfidfIndex:
    """Result of :func:`build_tfidf`."""

    vocabulary: dict[str, int]
    idf: np.ndarray
    catalog: ItemCatalog
    stopwords: frozenset[str]
    empty_docs: tuple[str, ...] = field(default=())


def _weigh(counts: Counter, vocabulary: Mapping[str, int], idf: np.ndarray, dim: int) -> FeatureVector:
    pairs = sorted(
        (vocabulary[t], c * idf[vocabulary[t]]) for t, c in counts.items() if t in vocabulary
    )
    if not pairs:
        return FeatureVector.zeros(max(dim, 1))
    vec = np.array([p[1] for p in pairs])
    vec /= np.sqrt(np.dot(vec, vec))
    return FeatureVector([p[0] for p in pairs], vec, dim)


def build_tfidf(corpus: Sequence[tuple[str, str]], stopwords=None) -> TfidfIndex:
    """Fit a TF-IDF vocabulary on ``(doc_id, text)`` pairs and vectorize them.

    Weight is ``count * ln(N / df)``; vectors are L2-normalized. Terms present
    in every document carry zero weight and are left out of the vocabulary.
    Documents with no surviving terms are excluded and listed in ``empty_docs``.
    """
    if not corpus:
        raise InputError("corpus is empty")
    stopwords = load_stopwords() if stopwords is None else frozenset(stopwords)
    ids = [doc_id for doc_id, _ in corpus]
    if len(set(ids)) != len(ids):
        raise InputError("duplicate document ids in corpus")
    counts = [Counter(analyze(text, stopwords)) for _, text in corpus]
    n_docs = len(corpus)
    df = Counter()
    for c in counts:
        df.update(c.keys())
    terms = sorted(t for t, d in df.items() if d < n_docs)
    vocabulary = {t: k for k, t in enumerate(terms)}
    idf = np.array([math.log(n_docs / df[t]) for t in terms])
    dim = len(terms)
    items = {}
    empty = []
    for doc_id, c in zip(ids, counts):
        vec = _weigh(c, vocabulary, idf, dim) if dim else None
        if vec is None or len(vec) == 0:
            empty.append(doc_id)
        else:
            items[doc_id] = vec
    return TfidfIndex(vocabulary, idf, ItemCatalog(items, dim), stopwords, tuple(empty))


def transform_tfidf(index: TfidfIndex, text: str) -> FeatureVector:
    """Vectorize unseen text with a fitted index; unknown terms are ignored."""
    if not index.vocabulary:
        raise InputError("vocabulary is empty")
    vec = _weigh(Counter(analyze(text, index.stopwords)), index.vocabulary, index.idf, len(index.vocabulary))
    if len(vec) == 0:
        warnings.warn("text has no in-vocabulary terms; returning the zero vector", EmptyVectorWarning, stacklevel=2)
    return vec


# --------------------------------------------------------------------------
# File formats


def read_features(path) -> ItemCatalog:
    """Parse an item feature file (``#dim D`` header, then ``id idx:val ...`` lines)."""
    with open(path, encoding="utf-8") as fh:
        return parse_features(fh.read().splitlines())


def parse_features(lines: Sequence[str]) -> ItemCatalog:
    dim = None
    items = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts and parts[0] == "dim":
                if dim is not None or len(parts) != 2:
                    raise InputError(f"line {lineno}: bad #dim header")
                try:
                    dim = int(parts[1])
                except ValueError:
                    raise InputError(f"line {lineno}: bad #dim header") from None
            continue
        if dim is None:
            raise InputError(f"line {lineno}: missing '#dim' header before data")
        fields = line.split()
        item_id = fields[0]
        if item_id in items:
            raise InputError(f"line {lineno}: duplicate item id {item_id!r}")
        try:
            pairs = [(int(i), float(v)) for i, v in (f.split(":", 1) for f in fields[1:])]
            items[item_id] = FeatureVector.from_pairs(pairs, dim)
        except (ValueError, InputError) as exc:
            raise InputError(f"line {lineno}: {exc}") from None
    if dim is None:
        raise InputError("feature file has no '#dim' header")
    return ItemCatalog(items, dim)


def format_features(catalog: ItemCatalog) -> str:
    out = [f"#dim {catalog.dim}"]
    for item_id in catalog.ids:
        vec = catalog.items[item_id]
        cells = " ".join(f"{i}:{v!r}" for i, v in zip(vec.indices.tolist(), vec.values.tolist()))
        out.append(f"{item_id} {cells}".rstrip())
    return "\n".join(out) + "\n"


def read_corpus(path) -> tuple[list[tuple[str, str]], dict[str, frozenset[str]]]:
    """Parse ``doc_id<TAB>cat1,cat2<TAB>text`` lines into a corpus and category map."""
    corpus = []
    categories = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t", 2)
            if len(parts) != 3:
                raise InputError(f"line {lineno}: expected 3 tab-separated fields")
            doc_id, cats, text = parts
            if doc_id in categories:
                raise InputError(f"line {lineno}: duplicate document id {doc_id!r}")
            corpus.append((doc_id, text))
            categories[doc_id] = frozenset(c.strip() for c in cats.split(",") if c.strip())
    if not corpus:
        raise InputError("corpus file is empty")
    return corpus, categories
