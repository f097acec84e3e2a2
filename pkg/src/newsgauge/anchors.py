"""Labeled anchor articles and the experiments built on them.

Anchors are short synthetic news articles with a known polarity (1 =
positive outlook, 0 = negative) and a sector tag. The full set is 128
positive plus 128 negative, spread over eight sectors, and serves as the
training data for the sentiment classifier, replacing hand-labeled real
articles.

Two experiments probe that substitution. The stability experiment
retrains on balanced subsamples of increasing size and measures how much
the resulting indicator wobbles across draws. The extremes experiment
rebuilds the anchor set from the highest- and lowest-scored real
articles of a reference year and checks that the indicator survives the
swap.
"""

from __future__ import annotations

import csv
import json
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.stats import pearsonr

from .corpus import Article
from .embeddings import EmbeddingStore
from .indicator import IndicatorSeries
from .sentiment import LogisticModel, train_logistic

logger = logging.getLogger(__name__)

SECTORS = (
    "general",
    "financial_markets",
    "labor_market",
    "real_estate",
    "international_trade",
    "consumption",
    "business_situation",
    "macro_outlook",
)
FULL_SIZE_PER_CLASS = 128


@dataclass(frozen=True)
class AnchorArticle:
    id: int
    polarity: int  # 1 = positive outlook, 0 = negative
    sector: str
    text: str
    embedding: np.ndarray

    def __post_init__(self):
        if self.polarity not in (0, 1):
            raise ValueError(f"anchor {self.id}: polarity must be 0 or 1")
        if self.sector not in SECTORS:
            raise ValueError(f"anchor {self.id}: unknown sector {self.sector!r}")


@dataclass(frozen=True)
class AnchorCollection:
    anchors: tuple[AnchorArticle, ...]

    def __post_init__(self):
        if not self.anchors:
            raise ValueError("empty anchor collection")
        dims = {a.embedding.shape for a in self.anchors}
        if len(dims) > 1:
            raise ValueError(f"inconsistent embedding dimensions {sorted(dims)}")

    def __len__(self):
        return len(self.anchors)

    @property
    def dimension(self) -> int:
        return int(self.anchors[0].embedding.shape[0])

    def counts(self) -> dict[tuple[int, str], int]:
        out: dict[tuple[int, str], int] = {}
        for anchor in self.anchors:
            key = (anchor.polarity, anchor.sector)
            out[key] = out.get(key, 0) + 1
        return out

    def count_per_class(self) -> tuple[int, int]:
        positive = sum(1 for a in self.anchors if a.polarity == 1)
        return len(self.anchors) - positive, positive

    def embedding_matrix(self) -> np.ndarray:
        return np.vstack([a.embedding for a in self.anchors])

    def labels(self) -> np.ndarray:
        return np.array([float(a.polarity) for a in self.anchors])

    def sectors(self) -> list[str]:
        return [a.sector for a in self.anchors]

    def subsample(self, per_class: int, rng: np.random.Generator) -> "AnchorCollection":
        """Balanced draw of ``per_class`` anchors per polarity.

        Selected indices are sorted, so drawing the full size returns the
        collection itself, not a permutation of it.
        """
        negative, positive = self.count_per_class()
        if per_class > min(negative, positive):
            raise ValueError(
                f"subsample of {per_class} per class exceeds available "
                f"({negative} negative, {positive} positive)"
            )
        chosen: list[AnchorArticle] = []
        for polarity in (0, 1):
            members = [a for a in self.anchors if a.polarity == polarity]
            picks = rng.choice(len(members), size=per_class, replace=False)
            chosen.extend(members[i] for i in sorted(picks))
        return AnchorCollection(tuple(chosen))


def load_anchors(path: str | Path, store: EmbeddingStore) -> AnchorCollection:
    """Load anchors from line-delimited records and join their embeddings.

    Each line is a JSON object with id, polarity, sector, and text.
    Anchors are few and all required, so a missing embedding is fatal.
    """
    path = Path(path)
    anchors = []
    with path.open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                anchor_id = int(record["id"])
                polarity = int(record["polarity"])
                sector = str(record["sector"])
                text = str(record["text"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{line_no}: bad anchor record: {exc}") from exc
            if anchor_id not in store:
                raise ValueError(f"{path}:{line_no}: no embedding for anchor {anchor_id}")
            anchors.append(
                AnchorArticle(anchor_id, polarity, sector, text, store.get(anchor_id))
            )
    collection = AnchorCollection(tuple(anchors))
    negative, positive = collection.count_per_class()
    logger.info("loaded %d anchors: %d positive, %d negative", len(collection), positive, negative)
    if min(negative, positive) < FULL_SIZE_PER_CLASS:
        warnings.warn(
            f"anchor set below stability size: {positive} positive / {negative} negative "
            f"per class, stability analysis used {FULL_SIZE_PER_CLASS}",
            stacklevel=2,
        )
    return collection


@dataclass(frozen=True)
class StabilityRow:
    size: int
    repeat: int
    seed: int
    correlation: float
    dispersion: float  # identical across repeats of one size


@dataclass(frozen=True)
class StabilityReport:
    rows: tuple[StabilityRow, ...]

    def dispersions(self) -> dict[int, float]:
        return {row.size: row.dispersion for row in self.rows}

    def correlations(self) -> dict[int, list[float]]:
        out: dict[int, list[float]] = {}
        for row in self.rows:
            out.setdefault(row.size, []).append(row.correlation)
        return out


def stability_experiment(
    anchors: AnchorCollection,
    indicator_fn: Callable[[LogisticModel], IndicatorSeries],
    sizes: Sequence[int],
    repeats: int,
    seed: int = 0,
    l2_lambda: float = 1.0,
) -> StabilityReport:
    """Measure indicator stability under anchor subsampling.

    For each size, draws ``repeats`` balanced subsamples, retrains the
    sentiment model, and recomputes the indicator through
    ``indicator_fn``. Reports each subsample indicator's correlation with
    the full-anchor indicator and, per size, the dispersion across
    repeats (mean over months of the cross-repeat standard deviation).
    """
    if repeats < 2:
        raise ValueError("need at least two repeats per size")
    negative, positive = anchors.count_per_class()
    available = min(negative, positive)
    oversized = [s for s in sizes if s > available]
    if oversized:
        raise ValueError(f"size {oversized[0]} exceeds available anchors ({available} per class)")

    full_model = train_logistic(
        anchors.embedding_matrix(), anchors.labels(), l2_lambda=l2_lambda
    )
    reference = indicator_fn(full_model)
    reference_values = reference.values()
    if reference_values.size < 2:
        raise ValueError("reference indicator too short to correlate")

    rows = []
    seed_sequence = np.random.SeedSequence(seed)
    for size in sizes:
        child_seeds = seed_sequence.spawn(repeats)
        values = np.empty((repeats, reference_values.size))
        correlations = []
        repeat_seeds = []
        for repeat, child in enumerate(child_seeds):
            repeat_seed = int(child.generate_state(1)[0])
            repeat_seeds.append(repeat_seed)
            rng = np.random.default_rng(repeat_seed)
            subset = anchors.subsample(size, rng)
            model = train_logistic(subset.embedding_matrix(), subset.labels(), l2_lambda=l2_lambda)
            series = indicator_fn(model)
            if series.periods() != reference.periods():
                raise ValueError("subsample indicator covers different months than reference")
            values[repeat] = series.values()
            correlations.append(float(pearsonr(values[repeat], reference_values).statistic))
        dispersion = float(values.std(axis=0).mean())
        rows.extend(
            StabilityRow(size, repeat, repeat_seeds[repeat], correlations[repeat], dispersion)
            for repeat in range(repeats)
        )
        logger.info(
            "stability size %d: dispersion %.6g, mean correlation %.4f",
            size,
            dispersion,
            float(np.mean(correlations)),
        )
    return StabilityReport(tuple(rows))


def write_stability_csv(report: StabilityReport, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["size", "repeat", "seed", "correlation", "dispersion"])
        for row in report.rows:
            writer.writerow(
                [row.size, row.repeat, row.seed, repr(row.correlation), repr(row.dispersion)]
            )


def anchors_from_extremes(
    scored: Iterable[tuple[Article, np.ndarray, float]],
    year: int,
    k_per_side: int = FULL_SIZE_PER_CLASS,
) -> AnchorCollection:
    """Rebuild the anchor set from extreme-scored real articles of a year.

    The ``k_per_side`` highest-probability articles become positive
    anchors and the lowest become negative ones, sector "general". Ties
    at either cutoff are broken by ascending article id.
    """
    in_year = [(a, v, p) for a, v, p in scored if a.date.year == year]
    if len(in_year) < 2 * k_per_side:
        raise ValueError(
            f"need {2 * k_per_side} scored articles in {year} for {k_per_side} per side, "
            f"have {len(in_year)}"
        )
    by_score = sorted(in_year, key=lambda item: (item[2], item[0].id))
    bottom = by_score[:k_per_side]
    top = sorted(in_year, key=lambda item: (-item[2], item[0].id))[:k_per_side]
    anchors = [
        AnchorArticle(a.id, 0, "general", a.text, np.asarray(v, dtype=np.float64))
        for a, v, _ in bottom
    ] + [
        AnchorArticle(a.id, 1, "general", a.text, np.asarray(v, dtype=np.float64))
        for a, v, _ in top
    ]
    collection = AnchorCollection(tuple(anchors))
    min_positive = min(p for _, _, p in top)
    max_negative = max(p for _, _, p in bottom)
    if min_positive <= max_negative:
        logger.warning(
            "extreme-anchor sides touch: min positive score %.6f <= max negative %.6f",
            min_positive,
            max_negative,
        )
    return collection


def write_anchors(anchors: Iterable[AnchorArticle], path: str | Path) -> int:
    """Write anchors as line-delimited records (embeddings stay in a store)."""
    count = 0
    with Path(path).open("w", encoding="utf-8") as handle:
        for anchor in anchors:
            handle.write(
                json.dumps(
                    {
                        "id": anchor.id,
                        "polarity": anchor.polarity,
                        "sector": anchor.sector,
                        "text": anchor.text,
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
                + "\n"
            )
            count += 1
    return count
