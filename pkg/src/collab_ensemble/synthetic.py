"""Synthetic datasets for experiments and tests.

``text_corpus`` builds category-labelled documents from pseudo-words, each
category owning a set of indicative terms mixed into a shared background
vocabulary. ``dense_ratings`` builds a small dense-feature item set rated by
users from a few taste groups, where a group's liking depends only partly on
item features.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from .baselines import parse_ratings
from .ensemble import UserRatings
from .features import FeatureVector, ItemCatalog, parse_features
from .rng import make_rng

_CONSONANTS = "bdfgklmnprtvz"
_VOWELS = "aou"
_FILLERS = ("the", "and", "of", "to", "in", "for", "with", "on", "was", "is")


def _pseudo_words(n: int, rng: np.random.Generator) -> list[str]:
    words: list[str] = []
    seen = set()
    while len(words) < n:
        syllables = int(rng.integers(2, 4))
        w = "".join(
            _CONSONANTS[int(rng.integers(len(_CONSONANTS)))] + _VOWELS[int(rng.integers(len(_VOWELS)))]
            for _ in range(syllables)
        )
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


def text_corpus(
    n_docs: int = 1000,
    n_categories: int = 10,
    seed: int = 0,
    topic_words: int = 40,
    background_words: int = 600,
    doc_length: int = 60,
    topic_share: float = 0.2,
    multi_label_rate: float = 0.1,
    topic_zipf: float = 0.0,
    background_zipf: float = 1.0,
    topic_concentration: float | None = None,
) -> tuple[list[tuple[str, str]], dict[str, frozenset[str]]]:
    """Generate ``(doc_id, text)`` pairs and their category sets."""
    rng = make_rng(seed, "text-corpus")
    words = _pseudo_words(n_categories * topic_words + background_words, rng)
    topics = [words[c * topic_words : (c + 1) * topic_words] for c in range(n_categories)]
    background = words[n_categories * topic_words :]
    ranks = np.arange(1, background_words + 1, dtype=np.float64)
    bg_p = 1.0 / ranks**background_zipf
    bg_p /= bg_p.sum()
    topic_p = 1.0 / np.arange(1, topic_words + 1, dtype=np.float64) ** topic_zipf
    topic_p /= topic_p.sum()
    cat_names = [f"cat{c:02d}" for c in range(n_categories)]

    corpus = []
    categories = {}
    for d in range(n_docs):
        cats = [int(rng.integers(n_categories))]
        if rng.random() < multi_label_rate:
            other = int(rng.integers(n_categories - 1))
            cats.append(other if other < cats[0] else other + 1)
        length = max(5, int(rng.poisson(doc_length)))
        share = topic_share
        if topic_concentration is not None:
            # per-document topic strength, Beta-distributed around topic_share
            share = rng.beta(topic_concentration * topic_share, topic_concentration * (1 - topic_share))
        tokens = []
        for _ in range(length):
            u = rng.random()
            if u < share:
                topic = topics[cats[int(rng.integers(len(cats)))]]
                tokens.append(topic[int(rng.choice(topic_words, p=topic_p))])
            elif u < share + 0.1:
                tokens.append(_FILLERS[int(rng.integers(len(_FILLERS)))])
            else:
                tokens.append(background[int(rng.choice(background_words, p=bg_p))])
        doc_id = f"doc{d:05d}"
        corpus.append((doc_id, " ".join(tokens)))
        categories[doc_id] = frozenset(cat_names[c] for c in cats)
    return corpus, categories


def dense_ratings(
    n_users: int = 20,
    n_items: int = 80,
    dim: int = 10,
    n_groups: int = 3,
    rate_fraction: float = 0.4,
    seed: int = 0,
) -> tuple[ItemCatalog, list[UserRatings]]:
    """Dense item features plus a ratings matrix from taste groups.

    Every user rates at least five items and has both rating classes.
    """
    rng = make_rng(seed, "dense-ratings")
    n_clusters = 4
    centers = rng.normal(size=(n_clusters, dim))
    cluster = rng.integers(n_clusters, size=n_items)
    feats = centers[cluster] + 0.7 * rng.normal(size=(n_items, dim))
    item_ids = [f"img{j:04d}" for j in range(n_items)]
    catalog = ItemCatalog({i: FeatureVector.from_dense(np.round(f, 6)) for i, f in zip(item_ids, feats)}, dim)

    # group liking: weak content direction plus a strong per-item group effect
    directions = rng.normal(size=(n_groups, dim))
    effects = rng.normal(size=(n_groups, n_items))
    logits = 0.4 * (directions @ feats.T) + 1.5 * effects

    users = []
    k = 0
    while len(users) < n_users:
        urng = make_rng(seed, "dense-user", k)
        k += 1
        g = int(urng.integers(n_groups))
        rated = np.flatnonzero(urng.random(n_items) < rate_fraction)
        if rated.size < 5:
            continue
        p = 1.0 / (1.0 + np.exp(-logits[g, rated]))
        labels = np.where(urng.random(rated.size) < p, 1, -1)
        if len(set(labels.tolist())) < 2:
            continue
        users.append(UserRatings(f"u{len(users):03d}", {item_ids[j]: int(y) for j, y in zip(rated, labels)}))
    return catalog, users


FIXTURE_FEATURES = "loo_features.txt"
FIXTURE_RATINGS = "loo_ratings.tsv"


def fixture_paths():
    """Paths of the bundled dense-ratings fixture: ``(features, ratings)``.

    The files were produced by ``dense_ratings(n_users=20, seed=0)`` and are
    shipped so the leave-one-out protocol has a fixed input.
    """
    root = resources.files("collab_ensemble") / "data"
    return root / FIXTURE_FEATURES, root / FIXTURE_RATINGS


def load_fixture() -> tuple[ItemCatalog, list[UserRatings]]:
    features, ratings = fixture_paths()
    return parse_features(features.read_text("utf-8").splitlines()), parse_ratings(
        ratings.read_text("utf-8").splitlines()
    )
