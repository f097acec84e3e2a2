"""Pseudo-out-of-sample GDP forecast evaluation against an AR(1) benchmark.

The evaluated model regresses GDP growth h quarters ahead on the latest
published GDP figure and the indicator for the current quarter,

    y_{t+h} = a + b y_{t-1} + g x_t + e,

re-estimated each quarter on an expanding window; the benchmark is the
same regression without the indicator term. At forecast origin t the
GDP series is known only through t-1 while the indicator is known
through t (that timeliness is the indicator's whole selling point), and
each horizon gets its own direct regression.

Model comparison uses the RMSE ratio and a Diebold-Mariano test on the
squared-error differential with Bartlett-kernel HAC variance. Lagged
correlation tables and a cumulative squared-error-difference series for
crisis episodes round out the diagnostics.
"""

from __future__ import annotations

import csv
import logging
import math
import re
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.stats import norm, pearsonr
from scipy.stats import t as student_t

logger = logging.getLogger(__name__)

SERIES_KINDS = ("gdp_yoy", "gdp_qoq", "indicator_quarterly")
_QUARTER_RE = re.compile(r"^(\d{4})Q([1-4])$")


class Quarter(NamedTuple):
    year: int
    quarter: int

    @classmethod
    def parse(cls, text: str) -> "Quarter":
        match = _QUARTER_RE.match(text.strip())
        if not match:
            raise ValueError(f"bad quarter {text!r}; expected e.g. 1999Q1")
        return cls(int(match.group(1)), int(match.group(2)))

    @classmethod
    def from_month(cls, month: str) -> "Quarter":
        year, mon = map(int, month.split("-"))
        return cls(year, (mon - 1) // 3 + 1)

    @classmethod
    def from_index(cls, index: int) -> "Quarter":
        return cls(index // 4, index % 4 + 1)

    @property
    def index(self) -> int:
        return self.year * 4 + self.quarter - 1

    def __add__(self, quarters: int) -> "Quarter":
        return Quarter.from_index(self.index + quarters)

    def __sub__(self, quarters: int) -> "Quarter":
        return Quarter.from_index(self.index - quarters)

    def months(self) -> tuple[str, str, str]:
        first = 3 * (self.quarter - 1) + 1
        return tuple(f"{self.year:04d}-{m:02d}" for m in range(first, first + 3))

    def __str__(self) -> str:
        return f"{self.year}Q{self.quarter}"


@dataclass(frozen=True)
class QuarterlySeries:
    """Ordered (quarter, value) pairs; gaps allowed, order strict."""

    quarters: tuple[Quarter, ...]
    values: np.ndarray
    kind: str = "indicator_quarterly"
    incomplete: frozenset = frozenset()  # quarters averaged from <3 months

    def __post_init__(self):
        if self.kind not in SERIES_KINDS:
            raise ValueError(f"unknown series kind {self.kind!r}")
        if len(self.quarters) != len(self.values):
            raise ValueError("quarters and values length mismatch")
        indices = [q.index for q in self.quarters]
        if any(a >= b for a, b in zip(indices, indices[1:])):
            raise ValueError("quarters must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite value in quarterly series")
        object.__setattr__(self, "_lookup", dict(zip(self.quarters, self.values)))

    def __len__(self):
        return len(self.quarters)

    def get(self, quarter: Quarter) -> Optional[float]:
        value = self._lookup.get(quarter)
        return None if value is None else float(value)

    def __contains__(self, quarter: Quarter) -> bool:
        return quarter in self._lookup


@dataclass
class ForecastConfig:
    horizons: tuple[int, ...] = (0, 1, 2)
    month_in_quarter: int = 2
    initial_window: int = 8  # training quarters required for the first forecast
    quarterly_mode: str = "month_m"  # or "three_month_mean", "passthrough"
    hac_lag: Optional[int] = None  # default max(h, 1)
    small_sample: bool = False

    def __post_init__(self):
        if any(h < 0 for h in self.horizons):
            raise ValueError("horizons must be non-negative")
        if self.month_in_quarter not in (1, 2, 3):
            raise ValueError("month_in_quarter must be 1, 2, or 3")
        if self.quarterly_mode not in ("month_m", "three_month_mean", "passthrough"):
            raise ValueError(f"unknown quarterly mode {self.quarterly_mode!r}")
        if self.initial_window < 3:
            raise ValueError("initial window too small to fit three coefficients")

    def check_frequency(self, frequency: str) -> None:
        # month 3 of the quarter is only in hand that early for partial-month series
        if self.month_in_quarter == 3 and self.quarterly_mode == "month_m":
            if frequency == "monthly":
                raise ValueError(
                    "month_in_quarter=3 requires a first-7/14/21-day indicator variant"
                )


def monthly_to_quarterly(
    series, mode: str = "month_m", m: int = 2, kind: str = "indicator_quarterly"
) -> QuarterlySeries:
    """Convert a monthly indicator series to quarterly frequency.

    "month_m" takes month m of each quarter and omits quarters missing
    that month; "three_month_mean" averages the months available in the
    quarter and flags quarters with fewer than three.
    """
    if mode not in ("month_m", "three_month_mean"):
        raise ValueError(f"unknown mode {mode!r}")
    if m not in (1, 2, 3):
        raise ValueError("m must be 1, 2, or 3")
    by_quarter: dict[Quarter, list[tuple[str, float]]] = {}
    for point in series.points:
        by_quarter.setdefault(Quarter.from_month(point.period), []).append(
            (point.period, point.value)
        )
    quarters = []
    values = []
    incomplete = set()
    for quarter in sorted(by_quarter, key=lambda q: q.index):
        months = dict(by_quarter[quarter])
        if mode == "month_m":
            wanted = quarter.months()[m - 1]
            if wanted not in months:
                logger.warning("quarter %s missing month %s; omitted", quarter, wanted)
                continue
            value = months[wanted]
        else:
            value = float(np.mean([months[key] for key in sorted(months)]))
            if len(months) < 3:
                incomplete.add(quarter)
        quarters.append(quarter)
        values.append(value)
    if not quarters:
        raise ValueError("no complete quarters in monthly series")
    return QuarterlySeries(tuple(quarters), np.array(values), kind, frozenset(incomplete))


class OlsFit(NamedTuple):
    coefficients: np.ndarray
    residuals: np.ndarray


def ols_fit(y: np.ndarray, X: np.ndarray) -> OlsFit:
    """Least squares with an explicit full-rank requirement."""
    y = np.asarray(y, dtype=np.float64).ravel()
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] != y.shape[0]:
        raise ValueError("response and design row counts differ")
    if X.shape[0] < X.shape[1]:
        raise ValueError(f"need at least {X.shape[1]} rows, have {X.shape[0]}")
    coefficients, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise ValueError(f"design is rank deficient (rank {rank} < {X.shape[1]} columns)")
    return OlsFit(coefficients, y - X @ coefficients)


class ForecastPoint(NamedTuple):
    origin: Quarter
    target: Quarter
    forecast: float
    actual: Optional[float]

    @property
    def error(self) -> Optional[float]:
        return None if self.actual is None else self.actual - self.forecast


def expanding_forecast(
    gdp: QuarterlySeries,
    indicator: Optional[QuarterlySeries],
    h: int,
    config: Optional[ForecastConfig] = None,
) -> list[ForecastPoint]:
    """Direct h-step forecasts from an expanding estimation window.

    At origin t the regression is fitted on all quarters s whose
    response y_{s+h} lies within the GDP known at t, i.e. s+h <= t-1,
    and whose regressors (y_{s-1} and, when used, x_s) exist. The first
    origin is the earliest with `initial_window` training rows. Passing
    ``indicator=None`` gives the AR(1) benchmark, the same regression
    without the indicator column.
    """
    config = config or ForecastConfig()
    if h < 0:
        raise ValueError("horizon must be non-negative")

    def row(s: Quarter) -> Optional[list[float]]:
        y_lag = gdp.get(s - 1)
        if y_lag is None:
            return None
        if indicator is None:
            return [1.0, y_lag]
        x = indicator.get(s)
        if x is None:
            return None
        return [1.0, y_lag, x]

    candidates = sorted(gdp.quarters, key=lambda q: q.index)
    points = []
    for t in candidates:
        train_X = []
        train_y = []
        for s_index in range(candidates[0].index, t.index - h):
            s = Quarter.from_index(s_index)
            response = gdp.get(s + h)
            regressors = row(s)
            if response is None or regressors is None:
                continue
            train_X.append(regressors)
            train_y.append(response)
        if len(train_X) < config.initial_window:
            continue
        regressors = row(t)
        if regressors is None:
            continue
        fit = ols_fit(np.array(train_y), np.array(train_X))
        forecast = float(np.array(regressors) @ fit.coefficients)
        points.append(ForecastPoint(t, t + h, forecast, gdp.get(t + h)))
    if not points:
        raise ValueError(
            f"insufficient history: no origin reaches {config.initial_window} training quarters"
        )
    return points


def rmse(errors: Sequence[float]) -> float:
    errors = np.asarray(errors, dtype=np.float64)
    return float(np.sqrt(np.mean(errors**2)))


def rmse_ratio(model_errors: Sequence[float], benchmark_errors: Sequence[float]) -> float:
    """RMSE(model)/RMSE(benchmark); below one favors the model."""
    model_errors = np.asarray(model_errors, dtype=np.float64)
    benchmark_errors = np.asarray(benchmark_errors, dtype=np.float64)
    if model_errors.shape != benchmark_errors.shape or model_errors.size == 0:
        raise ValueError("need aligned non-empty error vectors")
    bench = rmse(benchmark_errors)
    model = rmse(model_errors)
    if bench == 0.0:
        if model == 0.0:
            return 1.0
        warnings.warn("benchmark RMSE is zero; ratio is infinite", stacklevel=2)
        return math.inf
    return model / bench


class DmResult(NamedTuple):
    statistic: float
    p_value: float
    lag: int
    n: int


def dm_test(
    e1: Sequence[float],
    e2: Sequence[float],
    h: int = 1,
    lag: Optional[int] = None,
    small_sample: bool = False,
) -> DmResult:
    """Equal-accuracy test on the squared-error differential.

    d_t = e1_t^2 - e2_t^2; the statistic is mean(d) over the Bartlett
    HAC standard error with truncation lag max(h, 1) unless overridden.
    Two-sided p-value from the normal reference by default; the
    small-sample variant applies the Harvey-Leybourne-Newbold correction
    and a t reference with n-1 degrees of freedom. A degenerate zero-
    variance differential gives p=1 when the mean is zero (identical
    losses), else p=0 with a warning.
    """
    e1 = np.asarray(e1, dtype=np.float64)
    e2 = np.asarray(e2, dtype=np.float64)
    if e1.shape != e2.shape:
        raise ValueError("error vectors must be aligned")
    n = e1.size
    if n < 8:
        raise ValueError(f"need at least 8 observations, have {n}")
    lag = max(h, 1) if lag is None else lag
    if not 0 <= lag < n:
        raise ValueError(f"truncation lag {lag} out of range for n={n}")
    d = e1**2 - e2**2
    mean = float(d.mean())
    centered = d - mean
    variance = float(centered @ centered) / n
    for l in range(1, lag + 1):
        weight = 1.0 - l / (lag + 1.0)
        variance += 2.0 * weight * float(centered[l:] @ centered[:-l]) / n
    if variance <= 0.0:
        if mean == 0.0:
            return DmResult(0.0, 1.0, lag, n)
        warnings.warn(
            "degenerate DM variance with nonzero mean differential", stacklevel=2
        )
        return DmResult(math.copysign(math.inf, mean), 0.0, lag, n)
    statistic = mean / math.sqrt(variance / n)
    if small_sample:
        correction = math.sqrt((n + 1 - 2 * lag + lag * (lag - 1) / n) / n)
        statistic *= correction
        p_value = 2.0 * float(student_t.sf(abs(statistic), df=n - 1))
    else:
        p_value = 2.0 * float(norm.sf(abs(statistic)))
    return DmResult(statistic, p_value, lag, n)


@dataclass(frozen=True)
class HorizonResult:
    horizon: int
    targets: tuple[Quarter, ...]
    model_errors: np.ndarray
    benchmark_errors: np.ndarray
    rmse_model: float
    rmse_benchmark: float
    ratio: float
    dm: DmResult


@dataclass(frozen=True)
class ForecastReport:
    horizons: tuple[HorizonResult, ...]

    def by_horizon(self) -> dict[int, HorizonResult]:
        return {r.horizon: r for r in self.horizons}


def evaluate_indicator(
    gdp: QuarterlySeries,
    indicator,
    config: Optional[ForecastConfig] = None,
    frequency: Optional[str] = None,
) -> ForecastReport:
    """Run both models over all configured horizons and compare them.

    ``indicator`` is a monthly IndicatorSeries unless the config says
    passthrough, in which case it is already quarterly. Evaluation uses
    the targets where both models produced a forecast and the actual is
    known.
    """
    config = config or ForecastConfig()
    if config.quarterly_mode == "passthrough":
        quarterly = indicator
    else:
        config.check_frequency(frequency or indicator.frequency)
        quarterly = monthly_to_quarterly(
            indicator, mode=config.quarterly_mode, m=config.month_in_quarter
        )
    results = []
    for h in config.horizons:
        model_points = expanding_forecast(gdp, quarterly, h, config)
        bench_points = expanding_forecast(gdp, None, h, config)
        bench_by_target = {p.target: p for p in bench_points}
        targets = []
        model_errors = []
        bench_errors = []
        for point in model_points:
            bench = bench_by_target.get(point.target)
            if bench is None or point.error is None or bench.error is None:
                continue
            targets.append(point.target)
            model_errors.append(point.error)
            bench_errors.append(bench.error)
        if len(targets) < 8:
            raise ValueError(
                f"horizon {h}: only {len(targets)} comparable forecasts; need 8"
            )
        model_errors = np.array(model_errors)
        bench_errors = np.array(bench_errors)
        results.append(
            HorizonResult(
                h,
                tuple(targets),
                model_errors,
                bench_errors,
                rmse(model_errors),
                rmse(bench_errors),
                rmse_ratio(model_errors, bench_errors),
                dm_test(
                    model_errors,
                    bench_errors,
                    h,
                    lag=config.hac_lag,
                    small_sample=config.small_sample,
                ),
            )
        )
    return ForecastReport(tuple(results))


def lag_correlations(
    gdp: QuarterlySeries, indicator: QuarterlySeries, lags: Sequence[int] = range(5)
) -> dict:
    """Pearson correlation of y_t with x_{t-lag}, plus the table averages.

    Lags with fewer than 3 overlapping quarters are reported as None.
    The averages cover lags {0,1} and {0..4}, skipping absent entries.
    """
    by_lag: dict[int, Optional[float]] = {}
    for lag in lags:
        pairs = [
            (gdp.get(q), indicator.get(q - lag))
            for q in gdp.quarters
            if indicator.get(q - lag) is not None
        ]
        if len(pairs) < 3:
            by_lag[lag] = None
            continue
        y, x = zip(*pairs)
        by_lag[lag] = float(pearsonr(y, x).statistic)

    def average(keys):
        present = [by_lag[k] for k in keys if by_lag.get(k) is not None]
        return float(np.mean(present)) if present else None

    return {
        "by_lag": by_lag,
        "avg_0_1": average([0, 1]),
        "avg_0_4": average([0, 1, 2, 3, 4]),
    }


def crisis_diagnostic(
    model_errors: Sequence[float],
    benchmark_errors: Sequence[float],
    quarters: Sequence[Quarter],
) -> list[tuple[Quarter, float]]:
    """Cumulative sum of squared-error differences, per quarter.

    Declining stretches mark periods where the indicator model beats the
    benchmark. The final value equals n*(RMSE_model^2 - RMSE_bench^2).
    """
    model_errors = np.asarray(model_errors, dtype=np.float64)
    benchmark_errors = np.asarray(benchmark_errors, dtype=np.float64)
    if not len(model_errors) == len(benchmark_errors) == len(quarters):
        raise ValueError("errors and quarters must be aligned")
    cumulative = np.cumsum(model_errors**2 - benchmark_errors**2)
    return list(zip(quarters, (float(v) for v in cumulative)))


# --- persistence -------------------------------------------------------------


def read_gdp_csv(path: str | Path) -> tuple[QuarterlySeries, QuarterlySeries]:
    """Read quarter,yoy_growth,qoq_growth rows into the two GDP series."""
    path = Path(path)
    quarters = []
    yoy = []
    qoq = []
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["quarter", "yoy_growth", "qoq_growth"]:
            raise ValueError(f"{path}: unexpected header {header!r}")
        for row in reader:
            quarters.append(Quarter.parse(row[0]))
            yoy.append(float(row[1]))
            qoq.append(float(row[2]))
    return (
        QuarterlySeries(tuple(quarters), np.array(yoy), "gdp_yoy"),
        QuarterlySeries(tuple(quarters), np.array(qoq), "gdp_qoq"),
    )


def write_quarterly_csv(series: QuarterlySeries, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["quarter", "value", "incomplete"])
        for quarter, value in zip(series.quarters, series.values):
            writer.writerow(
                [str(quarter), repr(float(value)), int(quarter in series.incomplete)]
            )


def write_report_csv(report: ForecastReport, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["horizon", "n", "rmse_model", "rmse_benchmark", "ratio", "dm_stat", "dm_p"]
        )
        for result in report.horizons:
            writer.writerow(
                [
                    result.horizon,
                    result.dm.n,
                    repr(result.rmse_model),
                    repr(result.rmse_benchmark),
                    repr(result.ratio),
                    repr(result.dm.statistic),
                    repr(result.dm.p_value),
                ]
            )


def write_crisis_csv(series: list[tuple[Quarter, float]], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["quarter", "cumulative"])
        for quarter, value in series:
            writer.writerow([str(quarter), repr(value)])


def write_correlations_csv(table: dict, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["lag", "correlation"])
        for lag in sorted(table["by_lag"]):
            value = table["by_lag"][lag]
            writer.writerow([lag, "" if value is None else repr(value)])
        for label in ("avg_0_1", "avg_0_4"):
            value = table[label]
            writer.writerow([label, "" if value is None else repr(value)])
