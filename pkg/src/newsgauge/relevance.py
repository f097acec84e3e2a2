"""Economy-relevance filter over article embeddings.

Labels come from section names: articles filed under an allowlisted
section (business, markets, economics desks and the like) count as
relevant, articles from any other named section as irrelevant, and the
two classes are balanced by seeded downsampling. A binary classifier is
trained on a 2:1 train/holdout split of those labels and then applied to
the whole corpus with an inclusive probability threshold, 0.80 by
default.

The default classifier is single-layer logistic: in embedding space the
task is near-linearly separable, and the linear model is deterministic
and auditable. A one-hidden-layer tanh variant is available behind the
same config for corpora where the linear fit falls short.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, log_expit

from .corpus import Article
from .embeddings import EmbeddingStore
from .indicator import month_key
from .sentiment import ConvergenceError, train_logistic

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.80


@dataclass
class RelevanceConfig:
    kind: str = "logistic"  # or "mlp"
    hidden_width: int = 64
    l2_lambda: float = 1.0
    threshold: float = DEFAULT_THRESHOLD
    holdout_fraction: float = 1.0 / 3.0  # 2:1 train/test split
    max_iter: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("logistic", "mlp"):
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class RelevanceLabelSet:
    """Balanced (article_id, label) pairs derived from section names."""

    relevant_ids: tuple[int, ...]
    irrelevant_ids: tuple[int, ...]

    def __len__(self):
        return len(self.relevant_ids) + len(self.irrelevant_ids)


@dataclass
class RelevanceModel:
    """Fitted relevance classifier with its decision threshold.

    For the linear kind ``weights`` lives in embedding space; for the
    mlp kind it weights the hidden layer and ``hidden_weights`` maps the
    embedding to that layer.
    """

    weights: np.ndarray
    bias: float
    threshold: float = DEFAULT_THRESHOLD
    hidden_weights: Optional[np.ndarray] = None
    hidden_bias: Optional[np.ndarray] = None
    train_size: int = 0
    test_size: int = 0
    holdout_accuracy: Optional[float] = None
    holdout_precision: Optional[float] = None
    seed: Optional[int] = None

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")

    @property
    def dimension(self) -> int:
        if self.hidden_weights is not None:
            return int(self.hidden_weights.shape[1])
        return int(self.weights.shape[0])

    def predict_prob(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dimension:
            raise ValueError(
                f"dimension mismatch: model {self.dimension}, input {X.shape[1]}"
            )
        if self.hidden_weights is not None:
            X = np.tanh(X @ self.hidden_weights.T + self.hidden_bias)
        return expit(X @ self.weights + self.bias)


def build_labels(
    articles: Iterable[Article],
    section_allowlist: set[str],
    seed: int = 0,
    max_per_class: Optional[int] = None,
) -> RelevanceLabelSet:
    """Label articles by section and balance the classes.

    Articles without a section are skipped. Relevant means the section
    is in the allowlist (case-insensitive); any other named section is
    irrelevant. The larger class is downsampled to the smaller with a
    seeded draw, optionally capped at ``max_per_class``.
    """
    allow = {s.casefold() for s in section_allowlist}
    relevant: list[int] = []
    irrelevant: list[int] = []
    skipped = 0
    for article in articles:
        if not article.section:
            skipped += 1
            continue
        if article.section.casefold() in allow:
            relevant.append(article.id)
        else:
            irrelevant.append(article.id)
    if not relevant or not irrelevant:
        raise ValueError(
            f"need labeled articles of both classes, got {len(relevant)} relevant "
            f"and {len(irrelevant)} irrelevant (skipped {skipped} without section)"
        )
    n = min(len(relevant), len(irrelevant))
    if max_per_class is not None:
        n = min(n, max_per_class)
    rng = np.random.default_rng(seed)
    relevant = _balanced_draw(rng, sorted(relevant), n)
    irrelevant = _balanced_draw(rng, sorted(irrelevant), n)
    logger.info(
        "relevance labels: %d per class (skipped %d articles without section)", n, skipped
    )
    return RelevanceLabelSet(tuple(relevant), tuple(irrelevant))


def _balanced_draw(rng: np.random.Generator, ids: list[int], n: int) -> list[int]:
    if len(ids) == n:
        return ids
    chosen = rng.choice(len(ids), size=n, replace=False)
    return [ids[i] for i in sorted(chosen)]


def train_relevance(
    labels: RelevanceLabelSet, store: EmbeddingStore, config: Optional[RelevanceConfig] = None
) -> RelevanceModel:
    """Train the relevance classifier on a 2:1 split of the label set.

    Deterministic given the seed. Holdout accuracy and precision are
    measured at the configured decision threshold, the same operating
    point the filter later applies.
    """
    config = config or RelevanceConfig()
    pairs = sorted(
        [(i, 1.0) for i in labels.relevant_ids] + [(i, 0.0) for i in labels.irrelevant_ids]
    )
    if len(labels.relevant_ids) < 2 or len(labels.irrelevant_ids) < 2:
        raise ValueError("need at least two examples per class")
    missing = [i for i, _ in pairs if i not in store]
    if missing:
        raise ValueError(f"no embedding for labeled article {missing[0]}")
    X = np.vstack([store.get(i) for i, _ in pairs])
    y = np.array([label for _, label in pairs])

    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(pairs))
    n_test = max(1, int(round(len(pairs) * config.holdout_fraction)))
    test_idx, train_idx = order[:n_test], order[n_test:]
    if np.unique(y[train_idx]).size < 2:
        raise ValueError("train split lost a class; provide more labels")

    if config.kind == "logistic":
        fitted = train_logistic(
            X[train_idx],
            y[train_idx],
            l2_lambda=config.l2_lambda,
            seed=config.seed,
            max_iter=config.max_iter,
            loss_tol=1e-8,
        )
        model = RelevanceModel(
            fitted.weights, fitted.bias, config.threshold, seed=config.seed
        )
    else:
        model = _train_mlp(X[train_idx], y[train_idx], config)

    probs = model.predict_prob(X[test_idx])
    predicted = probs >= config.threshold
    actual = y[test_idx] == 1.0
    model.train_size = int(train_idx.size)
    model.test_size = int(test_idx.size)
    model.holdout_accuracy = float(np.mean(predicted == actual))
    model.holdout_precision = _precision(actual, predicted)
    logger.info(
        "relevance holdout (n=%d): accuracy %.4f, precision %.4f",
        model.test_size,
        model.holdout_accuracy,
        model.holdout_precision,
    )
    return model


def _precision(actual: np.ndarray, predicted: np.ndarray) -> float:
    kept = int(predicted.sum())
    if kept == 0:
        return 1.0  # no positives claimed, none wrong
    return float(np.sum(actual & predicted) / kept)


def _train_mlp(X: np.ndarray, y: np.ndarray, config: RelevanceConfig) -> RelevanceModel:
    n, d = X.shape
    h = config.hidden_width
    rng = np.random.default_rng(config.seed)
    theta0 = np.concatenate(
        [
            rng.standard_normal(h * d) / np.sqrt(d),
            np.zeros(h),
            rng.standard_normal(h) / np.sqrt(h),
            np.zeros(1),
        ]
    )

    def unpack(theta):
        W1 = theta[: h * d].reshape(h, d)
        b1 = theta[h * d : h * d + h]
        w2 = theta[h * d + h : h * d + 2 * h]
        b2 = theta[-1]
        return W1, b1, w2, b2

    def objective(theta):
        W1, b1, w2, b2 = unpack(theta)
        hidden = np.tanh(X @ W1.T + b1)
        z = hidden @ w2 + b2
        loss = -np.sum(y * log_expit(z) + (1.0 - y) * log_expit(-z))
        loss += 0.5 * config.l2_lambda * (float(np.sum(W1 * W1)) + float(w2 @ w2))
        delta = expit(z) - y
        grad_w2 = hidden.T @ delta + config.l2_lambda * w2
        grad_b2 = float(delta.sum())
        back = (delta[:, None] * w2) * (1.0 - hidden * hidden)
        grad_W1 = back.T @ X + config.l2_lambda * W1
        grad_b1 = back.sum(axis=0)
        return loss, np.concatenate(
            [grad_W1.ravel(), grad_b1, grad_w2, np.array([grad_b2])]
        )

    result = minimize(
        objective,
        theta0,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": config.max_iter, "ftol": 1e-8},
    )
    if not np.isfinite(result.fun):
        raise ConvergenceError(f"non-finite loss at iteration {result.nit}")
    W1, b1, w2, b2 = unpack(result.x)
    return RelevanceModel(
        w2.copy(),
        float(b2),
        config.threshold,
        hidden_weights=W1.copy(),
        hidden_bias=b1.copy(),
        seed=config.seed,
    )


@dataclass
class RelevanceStats:
    total: int = 0
    kept: int = 0
    kept_by_month: dict[str, int] = field(default_factory=dict)
    total_by_month: dict[str, int] = field(default_factory=dict)


def apply_relevance(
    model: RelevanceModel,
    pairs: Iterable[tuple[Article, np.ndarray]],
    stats: Optional[RelevanceStats] = None,
) -> Iterator[tuple[Article, np.ndarray, float]]:
    """Keep articles whose relevance probability is at or above threshold.

    The boundary is inclusive: exactly-threshold probabilities pass.
    Kept counts per month are tallied into ``stats`` and logged when the
    stream ends.
    """
    stats = stats if stats is not None else RelevanceStats()
    for article, vector in pairs:
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (model.dimension,):
            raise ValueError(
                f"article {article.id}: dimension mismatch "
                f"(model {model.dimension}, embedding {vector.shape})"
            )
        key = month_key(article.date)
        stats.total += 1
        stats.total_by_month[key] = stats.total_by_month.get(key, 0) + 1
        prob = float(model.predict_prob(vector[None, :])[0])
        if prob >= model.threshold:
            stats.kept += 1
            stats.kept_by_month[key] = stats.kept_by_month.get(key, 0) + 1
            yield article, vector, prob
    for key in sorted(stats.total_by_month):
        logger.info(
            "relevance %s: kept %d of %d",
            key,
            stats.kept_by_month.get(key, 0),
            stats.total_by_month[key],
        )


def precision_recall(
    y_true: np.ndarray, probs: np.ndarray, thresholds: Iterable[float]
) -> list[tuple[float, float, float]]:
    """(threshold, precision, recall) at each threshold, inclusive rule.

    With no predicted positives, precision is reported as 1.0 (none of
    zero claims were wrong), which keeps it monotone at the top end.
    """
    y_true = np.asarray(y_true).astype(bool)
    probs = np.asarray(probs, dtype=np.float64)
    positives = int(y_true.sum())
    if positives == 0:
        raise ValueError("no positive examples; recall undefined")
    out = []
    for threshold in thresholds:
        predicted = probs >= threshold
        recall = float(np.sum(y_true & predicted) / positives)
        out.append((float(threshold), _precision(y_true, predicted), recall))
    return out


# --- serialization -----------------------------------------------------------

_RELV_MAGIC = b"RELV"
_BLOB_VERSION = 1


def save_relevance(model: RelevanceModel, path: str | Path) -> None:
    hidden = 0 if model.hidden_weights is None else model.hidden_weights.shape[0]
    with Path(path).open("wb") as handle:
        handle.write(_RELV_MAGIC)
        handle.write(struct.pack("<IIIdd", _BLOB_VERSION, model.dimension, hidden,
                                 model.threshold, model.bias))
        if hidden:
            handle.write(model.hidden_weights.astype("<f8").tobytes())
            handle.write(model.hidden_bias.astype("<f8").tobytes())
        handle.write(np.asarray(model.weights, dtype="<f8").tobytes())


def load_relevance(path: str | Path) -> RelevanceModel:
    data = Path(path).read_bytes()
    if data[:4] != _RELV_MAGIC:
        raise ValueError(f"{path}: not a relevance model blob")
    version, dimension, hidden, threshold, bias = struct.unpack_from("<IIIdd", data, 4)
    if version != _BLOB_VERSION:
        raise ValueError(f"{path}: unsupported blob version {version}")
    offset = 4 + struct.calcsize("<IIIdd")
    hidden_weights = hidden_bias = None
    if hidden:
        hidden_weights = (
            np.frombuffer(data, dtype="<f8", count=hidden * dimension, offset=offset)
            .reshape(hidden, dimension)
            .copy()
        )
        offset += 8 * hidden * dimension
        hidden_bias = np.frombuffer(data, dtype="<f8", count=hidden, offset=offset).copy()
        offset += 8 * hidden
    out_dim = hidden if hidden else dimension
    weights = np.frombuffer(data, dtype="<f8", count=out_dim, offset=offset).copy()
    return RelevanceModel(weights, bias, threshold, hidden_weights, hidden_bias)
