"""Additive topic decomposition of the indicator.

With x_{t,i} = prob_i / N_t the monthly indicator is x_t = Σᵢ x_{t,i},
and any per-article topic probabilities p_{t,i,j} that sum to one split
it exactly into topic contributions c_{t,j} = Σᵢ p_{t,i,j} · x_{t,i}
with Σⱼ c_{t,j} = x_t. Standardized contributions use
x̃_{t,i} = (prob_i − μ) / (σ · N_t) so they add up to the standardized
indicator instead.

Three assignment routes produce the p_{t,i,j}: keyword matching
(one-hot, first matching topic wins by priority order), the multinomial
sector classifier (top topics until the cumulative probability exceeds
0.7, at most three, renormalized), and K-means clusters in a reduced
embedding space (one-hot by nearest centroid). The reducer and K-means
are implemented here rather than taken from a library so that fitting is
seeded and bit-reproducible and the tie and empty-cluster rules are
exactly as documented.
"""

from __future__ import annotations

import csv
import logging
import re
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .corpus import Article
from .indicator import ScoredArticle, month_key
from .sentiment import MultinomialModel

logger = logging.getLogger(__name__)

OTHER_TOPIC = "Other"
CUMULATIVE_CUTOFF = 0.7
MAX_TOPICS_PER_ARTICLE = 3
DISPLAY_THRESHOLD = 0.2
WEIGHT_SUM_TOL = 1e-9


@dataclass(frozen=True)
class TopicAssignments:
    """Per-article probability weights over a fixed topic alphabet."""

    topics: tuple[str, ...]
    ids: tuple[int, ...]
    weights: np.ndarray  # (N, T), rows non-negative, each summing to 1

    def __post_init__(self):
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("duplicate article ids in assignments")
        if self.weights.shape != (len(self.ids), len(self.topics)):
            raise ValueError(
                f"weights shape {self.weights.shape} does not match "
                f"{len(self.ids)} articles x {len(self.topics)} topics"
            )
        if self.ids and np.any(self.weights < 0):
            raise ValueError("negative assignment weight")
        if self.ids:
            sums = self.weights.sum(axis=1)
            worst = int(np.argmax(np.abs(sums - 1.0)))
            if abs(sums[worst] - 1.0) > WEIGHT_SUM_TOL:
                raise ValueError(
                    f"article {self.ids[worst]}: weights sum to {sums[worst]!r}, not 1"
                )
        object.__setattr__(self, "_index", {a: i for i, a in enumerate(self.ids)})

    def __len__(self):
        return len(self.ids)

    def __contains__(self, article_id: int) -> bool:
        return article_id in self._index

    def weights_for(self, article_id: int) -> np.ndarray:
        try:
            return self.weights[self._index[article_id]]
        except KeyError:
            raise KeyError(f"no topic assignment for article {article_id}") from None


def assign_keyword(
    articles: Iterable[Article],
    keywords: dict[str, Sequence[str]],
    match: str = "word",
) -> TopicAssignments:
    """One-hot topic assignment by keyword search on cleaned text.

    ``keywords`` maps topic name to its term list; insertion order is
    the priority order, and an article matching several topics goes to
    the first. Matching is case-insensitive and whole-word; ``match =
    "prefix"`` additionally accepts inflected continuations of each term
    (useful for de/fr declensions). Articles matching nothing fall into
    the reserved topic "Other".
    """
    if match not in ("word", "prefix"):
        raise ValueError(f"unknown match mode {match!r}")
    if not keywords:
        raise ValueError("need at least one topic")
    for topic, terms in keywords.items():
        if topic == OTHER_TOPIC:
            raise ValueError(f"topic name {OTHER_TOPIC!r} is reserved")
        if not terms:
            raise ValueError(f"topic {topic!r} has no keywords")
    suffix = r"\w*" if match == "prefix" else ""
    patterns = [
        (
            topic,
            re.compile(
                r"\b(?:" + "|".join(re.escape(t) for t in terms) + r")" + suffix + r"\b",
                re.IGNORECASE | re.UNICODE,
            ),
        )
        for topic, terms in keywords.items()
    ]
    topics = tuple(keywords) + (OTHER_TOPIC,)
    ids = []
    rows = []
    for article in articles:
        text = article.text
        row = np.zeros(len(topics))
        for j, (_, pattern) in enumerate(patterns):
            if pattern.search(text):
                row[j] = 1.0
                break
        else:
            row[-1] = 1.0
        ids.append(article.id)
        rows.append(row)
    weights = np.vstack(rows) if rows else np.empty((0, len(topics)))
    return TopicAssignments(topics, tuple(ids), weights)


def assign_classified(
    model: MultinomialModel, ids: Sequence[int], X: np.ndarray
) -> TopicAssignments:
    """Truncated-and-renormalized assignment from the sector classifier.

    Topics are taken in decreasing probability until the cumulative sum
    strictly exceeds 0.7, keeping at most three; exactly 0.7 does not yet
    satisfy the rule. The kept probabilities are rescaled to sum to one.
    """
    probs = model.predict_proba(X)
    weights = np.zeros_like(probs)
    for i in range(probs.shape[0]):
        # stable sort so equal probabilities resolve by ascending class index
        order = np.argsort(-probs[i], kind="stable")
        cumulative = np.cumsum(probs[i][order])
        first_past = int(np.argmax(cumulative > CUMULATIVE_CUTOFF)) + 1
        keep = min(first_past, MAX_TOPICS_PER_ARTICLE)
        kept = order[:keep]
        weights[i, kept] = probs[i, kept] / probs[i, kept].sum()
    return TopicAssignments(model.classes, tuple(ids), weights)


# --- reducer and clusters -----------------------------------------------------


@dataclass(frozen=True)
class Reducer:
    """Linear variance-maximizing projection fitted on one month.

    Components carry a sign convention (largest-magnitude coordinate
    positive) so the fit is canonical, and transform is a pure affine
    map, so historical data maps through it consistently.
    """

    mean: np.ndarray
    components: np.ndarray  # (dim, D)
    seed: int

    @property
    def dim(self) -> int:
        return int(self.components.shape[0])

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return (X - self.mean) @ self.components.T


def fit_reducer(X: np.ndarray, dim: int = 10, seed: int = 0) -> Reducer:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n, d = X.shape
    if not 1 <= dim <= min(n, d):
        raise ValueError(f"reducer dim {dim} not in [1, min(n={n}, d={d})]")
    mean = X.mean(axis=0)
    _, _, vt = np.linalg.svd(X - mean, full_matrices=False)
    components = vt[:dim].copy()
    for row in components:
        anchor = int(np.argmax(np.abs(row)))
        if row[anchor] < 0:
            row *= -1.0
    return Reducer(mean, components, seed)


@dataclass(frozen=True)
class ClusterModel:
    reducer: Reducer
    centroids: np.ndarray  # (K, reducer.dim)
    fit_month: str

    def __post_init__(self):
        if not np.all(np.isfinite(self.centroids)):
            raise ValueError("non-finite centroid")

    @property
    def k(self) -> int:
        return int(self.centroids.shape[0])

    def predict(self, X: np.ndarray) -> np.ndarray:
        reduced = self.reducer.transform(X)
        distances = ((reduced[:, None, :] - self.centroids[None, :, :]) ** 2).sum(axis=2)
        # argmin takes the lowest centroid index on exact ties
        return distances.argmin(axis=1)


def _kmeans_once(X: np.ndarray, k: int, rng: np.random.Generator, max_iter: int):
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    sq_dist = ((X - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = sq_dist.sum()
        if total == 0.0:
            centroids[j] = X[rng.integers(n)]
        else:
            centroids[j] = X[rng.choice(n, p=sq_dist / total)]
        sq_dist = np.minimum(sq_dist, ((X - centroids[j]) ** 2).sum(axis=1))
    assignment = np.full(n, -1)
    for _ in range(max_iter):
        distances = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assignment = distances.argmin(axis=1)
        if np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        for j in range(k):
            members = X[assignment == j]
            if members.size:
                centroids[j] = members.mean(axis=0)
    empty = [j for j in range(k) if not np.any(assignment == j)]
    return centroids, assignment, empty


def fit_clusters(
    X: np.ndarray,
    k: int = 8,
    reducer_dim: int = 10,
    seed: int = 0,
    fit_month: str = "",
    max_iter: int = 300,
) -> ClusterModel:
    """Fit the reducer and K-means on one month of embeddings.

    Seeded k-means++ initialization, Lloyd iterations capped at 300,
    convergence when assignments stop changing. A cluster left empty at
    convergence triggers one reseeded retry; a second failure is
    accepted with a warning (the empty cluster simply never receives
    articles).
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if k < 1:
        raise ValueError("need at least one cluster")
    if X.shape[0] < k:
        raise ValueError(f"cannot fit {k} clusters to {X.shape[0]} points")
    reducer = fit_reducer(X, dim=reducer_dim, seed=seed)
    reduced = reducer.transform(X)
    seeds = np.random.SeedSequence(seed).spawn(2)
    centroids, _, empty = _kmeans_once(
        reduced, k, np.random.default_rng(seeds[0]), max_iter
    )
    if empty:
        logger.info("clusters %s empty after convergence; reseeding once", empty)
        centroids, _, empty = _kmeans_once(
            reduced, k, np.random.default_rng(seeds[1]), max_iter
        )
        if empty:
            warnings.warn(
                f"cluster(s) {empty} empty after reseeding; keeping them unpopulated",
                stacklevel=2,
            )
    return ClusterModel(reducer, centroids, fit_month)


def assign_clusters(
    model: ClusterModel, ids: Sequence[int], X: np.ndarray
) -> TopicAssignments:
    """One-hot assignment of articles to their nearest cluster."""
    labels = model.predict(X)
    topics = tuple(f"cluster_{j}" for j in range(model.k))
    weights = np.zeros((len(ids), model.k))
    weights[np.arange(len(ids)), labels] = 1.0
    return TopicAssignments(topics, tuple(ids), weights)


# --- contributions ------------------------------------------------------------


@dataclass(frozen=True)
class ContributionSeries:
    """Per-period, per-topic additive contributions c_{t,j}."""

    periods: tuple[str, ...]
    topics: tuple[str, ...]
    values: np.ndarray  # (P, T)
    standardized: bool = False

    def totals(self) -> np.ndarray:
        return self.values.sum(axis=1)

    def topic_series(self, topic: str) -> np.ndarray:
        return self.values[:, self.topics.index(topic)]


def contributions(
    assignments: TopicAssignments,
    scored: Iterable[ScoredArticle],
    standardization: Optional[tuple[float, float]] = None,
) -> ContributionSeries:
    """Split the indicator into topic contributions that sum back exactly.

    Raw mode uses x_{t,i} = prob_i / N_t; with ``standardization`` =
    (μ, σ) it uses x̃_{t,i} = (prob_i − μ) / (σ N_t), whose sum over a
    month is the standardized indicator value. Every scored article
    needs an assignment.
    """
    by_month: dict[str, list[ScoredArticle]] = {}
    for s in scored:
        by_month.setdefault(month_key(s.date), []).append(s)
    if not by_month:
        raise ValueError("no scored articles")
    if standardization is not None:
        mu, sigma = standardization
        if sigma <= 0:
            raise ValueError("sigma must be positive")
    periods = tuple(sorted(by_month))
    values = np.zeros((len(periods), len(assignments.topics)))
    for row, period in enumerate(periods):
        bucket = sorted(by_month[period], key=lambda s: (s.date, s.article_id))
        n_t = len(bucket)
        for s in bucket:
            if s.article_id not in assignments:
                raise ValueError(f"no topic assignment for article {s.article_id}")
            if standardization is None:
                x = s.prob / n_t
            else:
                x = (s.prob - mu) / (sigma * n_t)
            values[row] += assignments.weights_for(s.article_id) * x
    return ContributionSeries(periods, assignments.topics, values, standardization is not None)


def fold_minor_topics(
    series: ContributionSeries, threshold: float = DISPLAY_THRESHOLD
) -> ContributionSeries:
    """Fold below-threshold contributions into "Other" for display.

    Per month, contributions with |c| ≤ threshold move into "Other";
    topics that never clear the threshold disappear from the named list.
    Additivity is preserved exactly since values only move between
    columns.
    """
    named = [
        j
        for j, topic in enumerate(series.topics)
        if topic != OTHER_TOPIC and np.any(np.abs(series.values[:, j]) > threshold)
    ]
    topics = tuple(series.topics[j] for j in named) + (OTHER_TOPIC,)
    values = np.zeros((len(series.periods), len(topics)))
    for row in range(len(series.periods)):
        other = 0.0
        for j, topic in enumerate(series.topics):
            value = series.values[row, j]
            if j in named and abs(value) > threshold:
                values[row, topics.index(series.topics[j])] = value
            else:
                other += value
        values[row, -1] = other
    return ContributionSeries(series.periods, topics, values, series.standardized)


# --- interpretability ---------------------------------------------------------

TOP_ARTICLE_MODES = (
    "most_positive",
    "most_negative",
    "highest_topic_prob",
    "largest_abs_contribution",
)


def top_articles(
    scored: Iterable[ScoredArticle],
    assignments: TopicAssignments,
    topic: str,
    period: str,
    mode: str = "most_positive",
    k: int = 5,
    standardization: Optional[tuple[float, float]] = None,
) -> list[int]:
    """Ranked article ids for one topic and month; ties by ascending id.

    Articles qualify when they carry positive weight on the topic in the
    period. "largest_abs_contribution" ranks by |weight · x_{t,i}| with
    the same x terms as `contributions`.
    """
    if mode not in TOP_ARTICLE_MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {TOP_ARTICLE_MODES}")
    j = assignments.topics.index(topic)
    bucket = [s for s in scored if month_key(s.date) == period]
    members = [s for s in bucket if assignments.weights_for(s.article_id)[j] > 0.0]
    if not members:
        return []
    n_t = len(bucket)
    if standardization is None:
        mu, sigma = 0.0, 1.0
    else:
        mu, sigma = standardization

    def sort_key(s: ScoredArticle):
        if mode == "most_positive":
            return (-s.prob, s.article_id)
        if mode == "most_negative":
            return (s.prob, s.article_id)
        if mode == "highest_topic_prob":
            return (-assignments.weights_for(s.article_id)[j], s.article_id)
        weight = assignments.weights_for(s.article_id)[j]
        return (-abs(weight * (s.prob - mu) / (sigma * n_t)), s.article_id)

    return [s.article_id for s in sorted(members, key=sort_key)[:k]]


_WORD_RE = re.compile(r"\w+", re.UNICODE)


def term_frequencies(
    articles: Iterable[Article], stopwords: set[str], top_n: int = 50
) -> list[tuple[str, int]]:
    """Case-folded token counts excluding stopwords, for word clouds."""
    stop = {w.casefold() for w in stopwords}
    counts: dict[str, int] = {}
    for article in articles:
        for token in _WORD_RE.findall(article.text.casefold()):
            if token not in stop:
                counts[token] = counts.get(token, 0) + 1
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:top_n]


# --- persistence --------------------------------------------------------------


def write_contributions_csv(series: ContributionSeries, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["period", "topic", "contribution"])
        for row, period in enumerate(series.periods):
            for j, topic in enumerate(series.topics):
                writer.writerow([period, topic, repr(float(series.values[row, j]))])


def write_assignments_csv(assignments: TopicAssignments, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["article_id", "topic", "weight"])
        for i, article_id in enumerate(assignments.ids):
            for j, topic in enumerate(assignments.topics):
                weight = float(assignments.weights[i, j])
                if weight > 0.0:
                    writer.writerow([article_id, topic, repr(weight)])


_CLUS_MAGIC = b"CLUS"
_BLOB_VERSION = 1


def save_clusters(model: ClusterModel, path: str | Path) -> None:
    month_blob = model.fit_month.encode("utf-8")
    d = model.reducer.components.shape[1]
    with Path(path).open("wb") as handle:
        handle.write(_CLUS_MAGIC)
        handle.write(
            struct.pack(
                "<IIIIqI",
                _BLOB_VERSION,
                d,
                model.reducer.dim,
                model.k,
                model.reducer.seed,
                len(month_blob),
            )
        )
        handle.write(month_blob)
        handle.write(model.reducer.mean.astype("<f8").tobytes())
        handle.write(model.reducer.components.astype("<f8").tobytes())
        handle.write(model.centroids.astype("<f8").tobytes())


def load_clusters(path: str | Path) -> ClusterModel:
    data = Path(path).read_bytes()
    if data[:4] != _CLUS_MAGIC:
        raise ValueError(f"{path}: not a cluster model blob")
    version, d, dim, k, seed, month_len = struct.unpack_from("<IIIIqI", data, 4)
    if version != _BLOB_VERSION:
        raise ValueError(f"{path}: unsupported blob version {version}")
    offset = 4 + struct.calcsize("<IIIIqI")
    fit_month = data[offset : offset + month_len].decode("utf-8")
    offset += month_len
    mean = np.frombuffer(data, dtype="<f8", count=d, offset=offset).copy()
    offset += 8 * d
    components = (
        np.frombuffer(data, dtype="<f8", count=dim * d, offset=offset).reshape(dim, d).copy()
    )
    offset += 8 * dim * d
    centroids = (
        np.frombuffer(data, dtype="<f8", count=k * dim, offset=offset).reshape(k, dim).copy()
    )
    return ClusterModel(Reducer(mean, components, seed), centroids, fit_month)
