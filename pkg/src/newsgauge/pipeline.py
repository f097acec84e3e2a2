"""End-to-end pipeline: config, staged execution, and manifests.

Stages run in a fixed order (ingest, filter, train, score, aggregate,
decompose, evaluate), each consuming the artifacts of earlier stages
from the output directory and writing its own artifacts plus a manifest
recording input/output content hashes, the seeds it used, and timing.
Artifacts are deterministic: a rerun on identical inputs reproduces
byte-identical CSVs and model blobs (manifest timing fields are the one
exception, which is why hashes live in the manifest rather than being
hashes of manifests).

A missing prerequisite artifact is reported with the name of the stage
that produces it.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from datetime import date as Date
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import anchors as anchors_mod
from . import corpus as corpus_mod
from . import decomposition as decomp_mod
from . import forecast as forecast_mod
from . import indicator as indicator_mod
from . import lexicon as lexicon_mod
from . import relevance as relevance_mod
from . import sentiment as sentiment_mod
from .embeddings import read_store

logger = logging.getLogger(__name__)

STAGES = ("ingest", "filter", "train", "score", "aggregate", "decompose", "evaluate")

# Sentiment probabilities saturate at the float boundary for extreme
# margins; downstream types require the open interval.
PROB_EPS = 1e-12


class DependencyError(RuntimeError):
    """A stage ran before the stage that produces its inputs."""


@dataclass
class PipelineConfig:
    corpus: Path
    embeddings: Path
    anchors: Path
    anchor_embeddings: Path
    output_dir: Path
    gdp: Optional[Path] = None
    lexicon: Optional[Path] = None
    stopwords: Optional[Path] = None
    corpus_filter: Optional[corpus_mod.CorpusFilter] = None
    relevance_allowlist: tuple[str, ...] = ("Wirtschaft", "Börse", "Finanzen")
    relevance_threshold: float = relevance_mod.DEFAULT_THRESHOLD
    relevance_lambda: float = 1.0
    relevance_kind: str = "logistic"
    sentiment_lambda: float = 1.0
    indicator_frequencies: tuple[str, ...] = indicator_mod.FREQUENCIES
    decompose_method: str = "classified"
    decompose_keywords: dict = field(default_factory=dict)
    decompose_clusters: int = 8
    decompose_reducer_dim: int = 10
    decompose_fit_month: Optional[str] = None
    forecast: forecast_mod.ForecastConfig = field(default_factory=forecast_mod.ForecastConfig)
    seed: int = 0

    def __post_init__(self):
        if self.decompose_method not in ("keyword", "classified", "clustering"):
            raise ValueError(f"unknown decomposition method {self.decompose_method!r}")
        if self.decompose_method == "keyword" and not self.decompose_keywords:
            raise ValueError("keyword decomposition needs a keywords mapping")

    @classmethod
    def from_yaml(cls, path: str | Path, output_dir: Optional[Path] = None) -> "PipelineConfig":
        path = Path(path)
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        base = path.parent

        def resolve(key, default=None):
            value = raw.get(key, default)
            return None if value is None else (base / value).resolve()

        filt = None
        if raw.get("corpus_filter"):
            cf = raw["corpus_filter"]
            filt = corpus_mod.CorpusFilter(
                date_from=Date.fromisoformat(cf["date_from"]) if cf.get("date_from") else None,
                date_to=Date.fromisoformat(cf["date_to"]) if cf.get("date_to") else None,
                languages=tuple(cf["languages"]) if cf.get("languages") else None,
                pubtypes=tuple(cf["pubtypes"]) if cf.get("pubtypes") else None,
                outlets=tuple(cf["outlets"]) if cf.get("outlets") else None,
            )
        rel = raw.get("relevance", {})
        sent = raw.get("sentiment", {})
        ind = raw.get("indicator", {})
        dec = raw.get("decompose", {})
        fc = raw.get("forecast", {})
        config = cls(
            corpus=resolve("corpus"),
            embeddings=resolve("embeddings"),
            anchors=resolve("anchors"),
            anchor_embeddings=resolve("anchor_embeddings"),
            output_dir=(
                output_dir
                if output_dir is not None
                else (base / raw.get("output_dir", "out")).resolve()
            ),
            gdp=resolve("gdp"),
            lexicon=resolve("lexicon"),
            stopwords=resolve("stopwords"),
            corpus_filter=filt,
            relevance_allowlist=tuple(rel.get("allowlist", cls.relevance_allowlist)),
            relevance_threshold=float(rel.get("threshold", relevance_mod.DEFAULT_THRESHOLD)),
            relevance_lambda=float(rel.get("lambda", 1.0)),
            relevance_kind=rel.get("kind", "logistic"),
            sentiment_lambda=float(sent.get("lambda", 1.0)),
            indicator_frequencies=tuple(ind.get("frequencies", indicator_mod.FREQUENCIES)),
            decompose_method=dec.get("method", "classified"),
            decompose_keywords={k: list(v) for k, v in dec.get("keywords", {}).items()},
            decompose_clusters=int(dec.get("clusters", 8)),
            decompose_reducer_dim=int(dec.get("reducer_dim", 10)),
            decompose_fit_month=dec.get("fit_month"),
            forecast=forecast_mod.ForecastConfig(
                horizons=tuple(fc.get("horizons", (0, 1, 2))),
                month_in_quarter=int(fc.get("month_in_quarter", 2)),
                initial_window=int(fc.get("initial_window", 8)),
                quarterly_mode=fc.get("mode", "month_m"),
            ),
            seed=int(raw.get("seed", 0)),
        )
        config.validate_paths()
        return config

    def validate_paths(self) -> None:
        for name in ("corpus", "embeddings", "anchors", "anchor_embeddings", "gdp",
                     "lexicon", "stopwords"):
            value = getattr(self, name)
            if value is not None and not Path(value).exists():
                raise FileNotFoundError(f"config path {name} does not exist: {value}")


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


class Pipeline:
    """Stage runner bound to one config and one output directory.

    ``jobs`` caps the worker count for the per-article scoring loop; the
    per-article arithmetic is identical either way, so the artifacts do
    not depend on it.
    """

    def __init__(self, config: PipelineConfig, jobs: int = 1):
        if jobs < 1:
            raise ValueError("jobs must be at least 1")
        self.config = config
        self.jobs = jobs
        self.out = Path(config.output_dir)

    # artifact paths ----------------------------------------------------------
    def path(self, name: str) -> Path:
        return self.out / name

    def _require(self, name: str, producer: str) -> Path:
        path = self.path(name)
        if not path.exists():
            raise DependencyError(
                f"missing artifact {name}; run stage '{producer}' first"
            )
        return path

    def _manifest(self, stage: str, inputs: list[Path], outputs: list[Path],
                  seeds: dict, elapsed: float) -> None:
        manifest = {
            "stage": stage,
            "inputs": {p.name: _sha256(p) for p in sorted(inputs)},
            "outputs": {p.name: _sha256(p) for p in sorted(outputs)},
            "seeds": seeds,
            "elapsed_seconds": round(elapsed, 3),
        }
        path = self.path(f"manifest_{stage}.json")
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        logger.info("stage %s: %d artifact(s), %.2fs", stage, len(outputs), elapsed)

    def run(self, stages=STAGES) -> list[Path]:
        unknown = [s for s in stages if s not in STAGES]
        if unknown:
            raise ValueError(f"unknown stage {unknown[0]!r}; expected subset of {STAGES}")
        self.out.mkdir(parents=True, exist_ok=True)
        written: list[Path] = []
        for stage in STAGES:  # fixed order regardless of request order
            if stage in stages:
                written.extend(getattr(self, f"stage_{stage}")())
        return written

    # stages -------------------------------------------------------------------
    def stage_ingest(self) -> list[Path]:
        start = time.monotonic()
        stats = corpus_mod.IngestStats()
        articles = list(
            corpus_mod.ingest(self.config.corpus, self.config.corpus_filter, stats=stats)
        )
        out = self.path("corpus_clean.jsonl")
        corpus_mod.write_corpus(articles, out)
        self._manifest("ingest", [Path(self.config.corpus)], [out],
                       {}, time.monotonic() - start)
        return [out]

    def stage_filter(self) -> list[Path]:
        start = time.monotonic()
        clean = self._require("corpus_clean.jsonl", "ingest")
        articles = list(corpus_mod.ingest(clean))
        store = read_store(self.config.embeddings)
        labels = relevance_mod.build_labels(
            articles, set(self.config.relevance_allowlist), seed=self.config.seed
        )
        rconfig = relevance_mod.RelevanceConfig(
            kind=self.config.relevance_kind,
            l2_lambda=self.config.relevance_lambda,
            threshold=self.config.relevance_threshold,
            seed=self.config.seed,
        )
        model = relevance_mod.train_relevance(labels, store, rconfig)
        blob = self.path("relevance.blob")
        relevance_mod.save_relevance(model, blob)
        pairs = ((a, store.get(a.id)) for a in articles if a.id in store)
        kept = [article for article, _, _ in relevance_mod.apply_relevance(model, pairs)]
        out = self.path("corpus_relevant.jsonl")
        corpus_mod.write_corpus(kept, out)
        self._manifest("filter", [clean, Path(self.config.embeddings)], [blob, out],
                       {"relevance": self.config.seed}, time.monotonic() - start)
        return [blob, out]

    def stage_train(self) -> list[Path]:
        start = time.monotonic()
        store = read_store(self.config.anchor_embeddings)
        collection = anchors_mod.load_anchors(self.config.anchors, store)
        sent_model = sentiment_mod.train_logistic(
            collection.embedding_matrix(),
            collection.labels(),
            l2_lambda=self.config.sentiment_lambda,
            seed=self.config.seed,
        )
        sent_blob = self.path("sentiment.blob")
        sentiment_mod.save_logistic(sent_model, sent_blob)
        topic_model = sentiment_mod.train_multinomial(
            collection.embedding_matrix(),
            collection.sectors(),
            l2_lambda=self.config.sentiment_lambda,
            seed=self.config.seed,
        )
        topic_blob = self.path("topics.blob")
        sentiment_mod.save_multinomial(topic_model, topic_blob)
        self._manifest(
            "train",
            [Path(self.config.anchors), Path(self.config.anchor_embeddings)],
            [sent_blob, topic_blob],
            {"sentiment": self.config.seed},
            time.monotonic() - start,
        )
        return [sent_blob, topic_blob]

    def stage_score(self) -> list[Path]:
        start = time.monotonic()
        relevant = self._require("corpus_relevant.jsonl", "filter")
        blob = self._require("sentiment.blob", "train")
        model = sentiment_mod.load_logistic(blob)
        store = read_store(self.config.embeddings)
        articles = list(corpus_mod.ingest(relevant))

        def one(article):
            prob = sentiment_mod.score(model, store.get(article.id))
            return float(np.clip(prob, PROB_EPS, 1.0 - PROB_EPS))

        if self.jobs > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=self.jobs) as pool:
                probs = list(pool.map(one, articles))
        else:
            probs = [one(article) for article in articles]
        out = self.path("scores.csv")
        with out.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["article_id", "date", "prob"])
            for article, prob in zip(articles, probs):
                writer.writerow([article.id, article.date.isoformat(), repr(prob)])
        self._manifest("score", [relevant, blob, Path(self.config.embeddings)], [out],
                       {}, time.monotonic() - start)
        return [out]

    def _read_scores(self) -> list[indicator_mod.ScoredArticle]:
        path = self._require("scores.csv", "score")
        scored = []
        with path.open(newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            next(reader)
            for row in reader:
                scored.append(
                    indicator_mod.ScoredArticle(
                        int(row[0]), Date.fromisoformat(row[1]), float(row[2])
                    )
                )
        return scored

    def stage_aggregate(self) -> list[Path]:
        start = time.monotonic()
        scored = self._read_scores()
        outputs = []
        monthly = None
        for frequency in self.config.indicator_frequencies:
            series = indicator_mod.aggregate(scored, frequency)
            out = self.path(f"indicator_{frequency}.csv")
            indicator_mod.write_indicator_csv(series, out)
            outputs.append(out)
            if frequency == "monthly":
                monthly = series
        if monthly is None:
            monthly = indicator_mod.aggregate(scored, "monthly")
        standardized = indicator_mod.standardize(monthly)
        out = self.path("indicator_standardized.csv")
        indicator_mod.write_indicator_csv(standardized, out)
        outputs.extend([out, Path(f"{out}.meta.json")])
        daily = indicator_mod.daily_month_to_date(scored)
        out = self.path("indicator_daily_mtd.csv")
        indicator_mod.write_indicator_csv(daily, out)
        outputs.append(out)
        self._manifest("aggregate", [self.path("scores.csv")], outputs,
                       {}, time.monotonic() - start)
        return outputs

    def stage_decompose(self) -> list[Path]:
        start = time.monotonic()
        scored = self._read_scores()
        relevant = self._require("corpus_relevant.jsonl", "filter")
        articles = list(corpus_mod.ingest(relevant))
        standardized = indicator_mod.read_indicator_csv(
            self._require("indicator_standardized.csv", "aggregate")
        )
        method = self.config.decompose_method
        outputs = []
        seeds = {"decompose": self.config.seed}
        if method == "keyword":
            assignments = decomp_mod.assign_keyword(articles, self.config.decompose_keywords)
        elif method == "classified":
            blob = self._require("topics.blob", "train")
            model = sentiment_mod.load_multinomial(blob)
            store = read_store(self.config.embeddings)
            ids = [a.id for a in articles]
            X = np.vstack([store.get(i) for i in ids])
            assignments = decomp_mod.assign_classified(model, ids, X)
        else:
            store = read_store(self.config.embeddings)
            fit_month = self.config.decompose_fit_month or max(
                indicator_mod.month_key(a.date) for a in articles
            )
            fit_ids = [
                a.id for a in articles if indicator_mod.month_key(a.date) == fit_month
            ]
            cluster_model = decomp_mod.fit_clusters(
                np.vstack([store.get(i) for i in fit_ids]),
                k=self.config.decompose_clusters,
                reducer_dim=self.config.decompose_reducer_dim,
                seed=self.config.seed,
                fit_month=fit_month,
            )
            blob = self.path("clusters.blob")
            decomp_mod.save_clusters(cluster_model, blob)
            outputs.append(blob)
            ids = [a.id for a in articles]
            X = np.vstack([store.get(i) for i in ids])
            assignments = decomp_mod.assign_clusters(cluster_model, ids, X)

        out = self.path("assignments.csv")
        decomp_mod.write_assignments_csv(assignments, out)
        outputs.append(out)
        raw = decomp_mod.contributions(assignments, scored)
        out = self.path("contributions_raw.csv")
        decomp_mod.write_contributions_csv(raw, out)
        outputs.append(out)
        standardized_contrib = decomp_mod.contributions(
            assignments, scored, standardization=(standardized.mean, standardized.std)
        )
        out = self.path("contributions_standardized.csv")
        decomp_mod.write_contributions_csv(standardized_contrib, out)
        outputs.append(out)
        inputs = [self.path("scores.csv"), relevant]
        self._manifest("decompose", inputs, outputs, seeds, time.monotonic() - start)
        return outputs

    def stage_evaluate(self) -> list[Path]:
        start = time.monotonic()
        if self.config.gdp is None:
            raise DependencyError("evaluate needs a gdp path in the config")
        monthly = indicator_mod.read_indicator_csv(
            self._require("indicator_monthly.csv", "aggregate"), frequency="monthly"
        )
        gdp_yoy, _ = forecast_mod.read_gdp_csv(self.config.gdp)
        report = forecast_mod.evaluate_indicator(gdp_yoy, monthly, self.config.forecast)
        outputs = []
        out = self.path("forecast_report.csv")
        forecast_mod.write_report_csv(report, out)
        outputs.append(out)
        quarterly = forecast_mod.monthly_to_quarterly(monthly, mode="three_month_mean")
        out = self.path("indicator_quarterly.csv")
        forecast_mod.write_quarterly_csv(quarterly, out)
        outputs.append(out)
        table = forecast_mod.lag_correlations(gdp_yoy, quarterly)
        out = self.path("correlations.csv")
        forecast_mod.write_correlations_csv(table, out)
        outputs.append(out)
        for result in report.horizons:
            crisis = forecast_mod.crisis_diagnostic(
                result.model_errors, result.benchmark_errors, result.targets
            )
            out = self.path(f"crisis_h{result.horizon}.csv")
            forecast_mod.write_crisis_csv(crisis, out)
            outputs.append(out)
        self._manifest(
            "evaluate",
            [self.path("indicator_monthly.csv"), Path(self.config.gdp)],
            outputs,
            {},
            time.monotonic() - start,
        )
        return outputs

    # extras outside the stage graph -------------------------------------------
    def lexicon_indicator(self) -> Path:
        if self.config.lexicon is None:
            raise DependencyError("lexicon indicator needs a lexicon path in the config")
        relevant = self._require("corpus_relevant.jsonl", "filter")
        lex = lexicon_mod.load_lexicon(self.config.lexicon)
        articles = corpus_mod.ingest(relevant)
        series = lexicon_mod.lexicon_indicator(articles, lex)
        self.out.mkdir(parents=True, exist_ok=True)
        out = self.path("indicator_lexicon.csv")
        indicator_mod.write_indicator_csv(series, out)
        return out
