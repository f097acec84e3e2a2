"""Monthly aggregation of article scores into an indicator series.

An article's score enters its publication month with weight 1/N_t, where
N_t is the number of scored articles in month t, so the monthly value is
the arithmetic mean and is invariant to how many articles a month has.
Timelier variants restrict to the first 7, 14, or 21 calendar days; the
daily series carries the month-to-date running mean. Summation is
sequential in (date, article id) order everywhere, so the final
month-to-date value of a month equals the monthly value exactly, not
merely within rounding.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, replace
from datetime import date as Date
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

FREQUENCIES = ("monthly", "monthly_first7", "monthly_first14", "monthly_first21")
_WINDOW_DAYS = {
    "monthly": 31,
    "monthly_first7": 7,
    "monthly_first14": 14,
    "monthly_first21": 21,
}
DEFAULT_BANDS = ((0.0, 0.05), (0.45, 0.55), (0.95, 1.0))


@dataclass(frozen=True)
class ScoredArticle:
    """One article's positive-outlook probability, keyed by id and date."""

    article_id: int
    date: Date
    prob: float

    def __post_init__(self):
        if not np.isfinite(self.prob) or not 0.0 < self.prob < 1.0:
            raise ValueError(
                f"article {self.article_id}: prob must lie strictly in (0, 1), got {self.prob!r}"
            )


@dataclass(frozen=True)
class IndicatorPoint:
    period: str  # "YYYY-MM", or "YYYY-MM-DD" for daily points
    value: float
    count: int


@dataclass(frozen=True)
class IndicatorSeries:
    """Indicator values by period, optionally standardized.

    ``mean`` and ``std`` are set once `standardize` has been applied and
    record the raw-scale moments needed to invert the transform.
    """

    frequency: str
    points: tuple[IndicatorPoint, ...]
    mean: Optional[float] = None
    std: Optional[float] = None

    def __post_init__(self):
        periods = [p.period for p in self.points]
        if any(a >= b for a, b in zip(periods, periods[1:])):
            raise ValueError("periods must be strictly increasing")
        if any(p.count < 1 for p in self.points):
            raise ValueError("every point needs at least one article")

    @property
    def standardized(self) -> bool:
        return self.mean is not None

    def periods(self) -> tuple[str, ...]:
        return tuple(p.period for p in self.points)

    def values(self) -> np.ndarray:
        return np.array([p.value for p in self.points])

    def counts(self) -> np.ndarray:
        return np.array([p.count for p in self.points])

    def value_by_period(self) -> dict[str, float]:
        return {p.period: p.value for p in self.points}


def month_key(d: Date) -> str:
    return f"{d.year:04d}-{d.month:02d}"


def _sequential_mean(values: np.ndarray) -> float:
    # cumsum fixes one summation order shared with the month-to-date path
    return float(np.cumsum(values)[-1] / values.size)


def _sorted_by_month(
    records: Iterable[tuple[Date, int, float]]
) -> dict[str, list[tuple[Date, int, float]]]:
    by_month: dict[str, list[tuple[Date, int, float]]] = {}
    for d, article_id, value in records:
        by_month.setdefault(month_key(d), []).append((d, article_id, value))
    for bucket in by_month.values():
        bucket.sort(key=lambda rec: (rec[0], rec[1]))
    return by_month


def _month_range(keys: Sequence[str]) -> list[str]:
    first_year, first_month = map(int, min(keys).split("-"))
    last_year, last_month = map(int, max(keys).split("-"))
    out = []
    year, month = first_year, first_month
    while (year, month) <= (last_year, last_month):
        out.append(f"{year:04d}-{month:02d}")
        month += 1
        if month == 13:
            year, month = year + 1, 1
    return out


def aggregate_values(
    records: Iterable[tuple[Date, int, float]],
    frequency: str = "monthly",
    window_days: Optional[int] = None,
) -> IndicatorSeries:
    """Monthly mean of arbitrary per-article values (scores, contributions).

    ``records`` are (date, article_id, value) triples. ``window_days`` is
    implied by the first-k frequencies and only accepted when consistent.
    Months inside the covered range that end up with no contributing
    articles are logged and omitted rather than emitted as NaN.
    """
    if frequency not in FREQUENCIES:
        raise ValueError(f"unknown frequency {frequency!r}; expected one of {FREQUENCIES}")
    window = _WINDOW_DAYS[frequency]
    if window_days is not None:
        if frequency == "monthly":
            raise ValueError("window_days applies only to the first-k variants")
        if window_days != window:
            raise ValueError(f"window_days {window_days} contradicts frequency {frequency!r}")
    by_month = _sorted_by_month(records)
    if not by_month:
        raise ValueError("no records to aggregate")
    points = []
    for key in _month_range(sorted(by_month)):
        bucket = by_month.get(key, [])
        values = np.array([v for d, _, v in bucket if d.day <= window])
        if values.size == 0:
            logger.warning("month %s has no articles in window %s; omitted", key, frequency)
            continue
        points.append(IndicatorPoint(key, _sequential_mean(values), int(values.size)))
    return IndicatorSeries(frequency, tuple(points))


def aggregate(
    scored: Iterable[ScoredArticle],
    frequency: str = "monthly",
    window_days: Optional[int] = None,
) -> IndicatorSeries:
    """Aggregate scored articles into the indicator at the given frequency."""
    return aggregate_values(
        ((s.date, s.article_id, s.prob) for s in scored), frequency, window_days
    )


def daily_month_to_date(
    scored: Iterable[ScoredArticle], month: Optional[str] = None
) -> IndicatorSeries:
    """Running within-month mean, one point per day with coverage.

    Restricted to one "YYYY-MM" month when given, otherwise covering all
    months present. The point on the last covered day of a month equals
    that month's monthly value exactly (same summands, same order, same
    division).
    """
    by_month = _sorted_by_month((s.date, s.article_id, s.prob) for s in scored)
    if month is not None:
        if month not in by_month:
            raise ValueError(f"month {month} has no scored articles")
        by_month = {month: by_month[month]}
    if not by_month:
        raise ValueError("no records to aggregate")
    points = []
    for key in sorted(by_month):
        bucket = by_month[key]
        prefix = np.cumsum([v for _, _, v in bucket])
        seen = 0
        for day, group in _group_by_day(bucket):
            seen += len(group)
            points.append(
                IndicatorPoint(day.isoformat(), float(prefix[seen - 1] / seen), seen)
            )
    return IndicatorSeries("daily_mtd", tuple(points))


def _group_by_day(bucket):
    current_day = None
    group: list[tuple[Date, int, float]] = []
    for record in bucket:
        if record[0] != current_day:
            if group:
                yield current_day, group
            current_day, group = record[0], []
        group.append(record)
    if group:
        yield current_day, group


def standardize(series: IndicatorSeries, mode: str = "full") -> IndicatorSeries:
    """Shift to zero mean and unit variance (population convention).

    The divisor is N, not N-1. Requires at least two points and a
    non-constant series. The default full-sample mode stores the raw
    moments on the result so the transform can be inverted, and is a
    no-op on an already-standardized series. The expanding mode rescales
    each point by the moments of the series up to that point (strict
    real-time presentation); it is not invertible, so the result carries
    no stored moments, and leading points with zero dispersion are
    dropped.
    """
    if mode == "expanding":
        return _standardize_expanding(series)
    if mode != "full":
        raise ValueError(f"unknown standardization mode {mode!r}")
    if series.standardized:
        return series
    if len(series.points) < 2:
        raise ValueError("standardization needs at least two points")
    values = series.values()
    mean = float(values.mean())
    std = float(values.std())  # population: ddof=0
    if std == 0.0:
        raise ValueError("constant series cannot be standardized")
    points = tuple(
        replace(p, value=(p.value - mean) / std) for p in series.points
    )
    return IndicatorSeries(series.frequency, points, mean=mean, std=std)


def _standardize_expanding(series: IndicatorSeries) -> IndicatorSeries:
    if len(series.points) < 2:
        raise ValueError("standardization needs at least two points")
    values = series.values()
    points = []
    for t in range(1, len(values)):
        window = values[: t + 1]
        std = float(window.std())
        if std == 0.0:
            continue
        points.append(
            replace(series.points[t], value=(values[t] - float(window.mean())) / std)
        )
    if not points:
        raise ValueError("constant series cannot be standardized")
    if len(points) < len(series.points) - 1:
        logger.warning(
            "expanding standardization dropped %d constant-prefix points",
            len(series.points) - 1 - len(points),
        )
    return IndicatorSeries(series.frequency, tuple(points))


def destandardize(series: IndicatorSeries) -> IndicatorSeries:
    """Invert `standardize` using the stored raw-scale moments."""
    if not series.standardized:
        raise ValueError("series is not standardized")
    points = tuple(
        replace(p, value=p.value * series.std + series.mean) for p in series.points
    )
    return IndicatorSeries(series.frequency, points)


def export_labeling_sample(
    scored: Sequence[ScoredArticle],
    path: str | Path,
    bands: Sequence[tuple[float, float]] = DEFAULT_BANDS,
    k_per_band: int = 50,
    seed: int = 0,
    texts: Optional[dict[int, str]] = None,
) -> list[ScoredArticle]:
    """Draw a stratified sample across score-quantile bands for labeling.

    ``bands`` are disjoint quantile intervals over [0, 1]; an article at
    sorted position i out of n sits at quantile (i + 0.5)/n. Rank-based
    banding keeps the strata meaningful even when scores pile up near 0
    or 1, but a corpus where every score is identical has no usable
    ranking and is rejected. ``k_per_band`` articles are drawn uniformly
    per band with a seeded generator; too few articles in any band is an
    error. Writes a CSV of article_id, date, prob, band (plus the text
    when a lookup is provided).
    """
    _validate_bands(bands)
    ranked = sorted(scored, key=lambda s: (s.prob, s.article_id))
    n = len(ranked)
    if n == 0:
        raise ValueError("no scores to sample from")
    if len({s.prob for s in ranked}) == 1:
        raise ValueError("all scores identical; quantile bands are degenerate")
    rng = np.random.default_rng(seed)
    sample: list[tuple[int, ScoredArticle]] = []
    for band_index, (lo, hi) in enumerate(bands):
        members = [
            s
            for i, s in enumerate(ranked)
            if lo <= (i + 0.5) / n and ((i + 0.5) / n < hi or hi == 1.0)
        ]
        if len(members) < k_per_band:
            raise ValueError(
                f"band [{lo}, {hi}] has {len(members)} articles, need {k_per_band}"
            )
        if k_per_band > 0:
            chosen = rng.choice(len(members), size=k_per_band, replace=False)
            sample.extend((band_index, members[j]) for j in sorted(chosen))
    header = ["article_id", "date", "prob", "band"]
    if texts is not None:
        header.append("text")
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for band_index, s in sample:
            row = [s.article_id, s.date.isoformat(), repr(s.prob), band_index]
            if texts is not None:
                row.append(texts.get(s.article_id, ""))
            writer.writerow(row)
    return [s for _, s in sample]


def _validate_bands(bands: Sequence[tuple[float, float]]) -> None:
    if not bands:
        raise ValueError("need at least one band")
    for lo, hi in bands:
        if not (0.0 <= lo < hi <= 1.0):
            raise ValueError(f"band [{lo}, {hi}] is not a sub-interval of [0, 1]")
    ordered = sorted(bands)
    for (_, prev_hi), (lo, _) in zip(ordered, ordered[1:]):
        if lo < prev_hi:
            raise ValueError("bands must be disjoint")


# --- persistence -------------------------------------------------------------


def write_indicator_csv(series: IndicatorSeries, path: str | Path) -> None:
    """Write period,value,count rows; float text is round-trip exact.

    A standardized series also writes a ``<path>.meta.json`` sidecar with
    the raw-scale mean and standard deviation.
    """
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["period", "value", "count"])
        for point in series.points:
            writer.writerow([point.period, repr(point.value), point.count])
    if series.standardized:
        meta = {"frequency": series.frequency, "mean": series.mean, "std": series.std}
        Path(f"{path}.meta.json").write_text(json.dumps(meta, sort_keys=True))


def read_indicator_csv(path: str | Path, frequency: Optional[str] = None) -> IndicatorSeries:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["period", "value", "count"]:
            raise ValueError(f"{path}: unexpected header {header!r}")
        points = tuple(
            IndicatorPoint(row[0], float(row[1]), int(row[2])) for row in reader
        )
    mean = std = None
    meta_path = Path(f"{path}.meta.json")
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        mean, std = meta["mean"], meta["std"]
        frequency = frequency or meta.get("frequency")
    if frequency is None:
        frequency = "daily_mtd" if points and len(points[0].period) == 10 else "monthly"
    return IndicatorSeries(frequency, points, mean=mean, std=std)
