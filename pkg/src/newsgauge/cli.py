"""Command-line interface.

One subcommand per pipeline step plus ``run`` for staged end-to-end
execution from a YAML config. All diagnostics go to standard error;
data goes to files only. Every config knob has a command-line override.
"""

from __future__ import annotations

import argparse
import csv
import logging
import shutil
import subprocess
import sys
from dataclasses import replace
from datetime import date as Date
from pathlib import Path

import numpy as np

from . import anchors as anchors_mod
from . import corpus as corpus_mod
from . import decomposition as decomp_mod
from . import forecast as forecast_mod
from . import indicator as indicator_mod
from . import lexicon as lexicon_mod
from . import relevance as relevance_mod
from . import sentiment as sentiment_mod
from .embeddings import read_store
from .pipeline import STAGES, DependencyError, Pipeline, PipelineConfig

logger = logging.getLogger(__name__)

# user-facing frequency tokens -> internal names
FREQUENCY_TOKENS = {
    "monthly": "monthly",
    "first7": "monthly_first7",
    "first14": "monthly_first14",
    "first21": "monthly_first21",
    "daily-mtd": "daily_mtd",
}


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part)


def _str_list(text: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def _bands(text: str) -> tuple[tuple[float, float], ...]:
    bands = []
    for part in text.split(","):
        lo, _, hi = part.partition(":")
        bands.append((float(lo), float(hi)))
    return tuple(bands)


def _read_scores(path: str | Path) -> list[indicator_mod.ScoredArticle]:
    with Path(path).open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["article_id", "date", "prob"]:
            raise ValueError(f"{path}: unexpected header {header!r}")
        return [
            indicator_mod.ScoredArticle(int(row[0]), Date.fromisoformat(row[1]), float(row[2]))
            for row in reader
        ]


def _add_filter_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--corpus-filter",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="filter condition (languages=de,fr pubtypes=print outlets=... "
        "date-from=YYYY-MM-DD date-to=YYYY-MM-DD); repeatable",
    )


# --- subcommand implementations ------------------------------------------------


def cmd_ingest(args) -> int:
    filt = corpus_mod.CorpusFilter.from_pairs(args.corpus_filter) if args.corpus_filter else None
    stats = corpus_mod.IngestStats()
    articles = list(corpus_mod.ingest(args.input, filt, stats=stats))
    corpus_mod.write_corpus(articles, args.output)
    logger.info("wrote %d articles to %s", len(articles), args.output)
    return 0


def cmd_train_relevance(args) -> int:
    articles = list(corpus_mod.ingest(args.corpus))
    store = read_store(args.embeddings)
    labels = relevance_mod.build_labels(
        articles, set(args.allowlist), seed=args.seed, max_per_class=args.max_per_class
    )
    config = relevance_mod.RelevanceConfig(
        kind=args.kind,
        l2_lambda=args.l2_lambda,
        threshold=args.threshold,
        seed=args.seed,
    )
    model = relevance_mod.train_relevance(labels, store, config)
    relevance_mod.save_relevance(model, args.output)
    logger.info("wrote relevance model to %s", args.output)
    return 0


def cmd_apply_relevance(args) -> int:
    model = relevance_mod.load_relevance(args.model)
    if args.threshold is not None:
        model.threshold = args.threshold
    store = read_store(args.embeddings)
    articles = corpus_mod.ingest(args.corpus)
    pairs = ((a, store.get(a.id)) for a in articles if a.id in store)
    kept = [article for article, _, _ in relevance_mod.apply_relevance(model, pairs)]
    corpus_mod.write_corpus(kept, args.output)
    logger.info("kept %d relevant articles in %s", len(kept), args.output)
    return 0


def cmd_train_sentiment(args) -> int:
    store = read_store(args.embeddings)
    collection = anchors_mod.load_anchors(args.anchors, store)
    model = sentiment_mod.train_logistic(
        collection.embedding_matrix(),
        collection.labels(),
        l2_lambda=args.l2_lambda,
        seed=args.seed,
    )
    sentiment_mod.save_logistic(model, args.output)
    logger.info("wrote sentiment model to %s", args.output)
    if args.topics_output:
        topics = sentiment_mod.train_multinomial(
            collection.embedding_matrix(),
            collection.sectors(),
            l2_lambda=args.l2_lambda,
            seed=args.seed,
        )
        sentiment_mod.save_multinomial(topics, args.topics_output)
        logger.info("wrote sector model to %s", args.topics_output)
    return 0


def cmd_score(args) -> int:
    from .pipeline import PROB_EPS

    model = sentiment_mod.load_logistic(args.model)
    store = read_store(args.embeddings)
    articles = list(corpus_mod.ingest(args.corpus))
    with Path(args.output).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["article_id", "date", "prob"])
        for article in articles:
            prob = sentiment_mod.score(model, store.get(article.id))
            prob = float(np.clip(prob, PROB_EPS, 1.0 - PROB_EPS))
            writer.writerow([article.id, article.date.isoformat(), repr(prob)])
    logger.info("scored %d articles into %s", len(articles), args.output)
    return 0


def cmd_build_indicator(args) -> int:
    scored = _read_scores(args.scores)
    frequency = FREQUENCY_TOKENS[args.frequency]
    if frequency == "daily_mtd":
        series = indicator_mod.daily_month_to_date(scored, month=args.month)
    else:
        series = indicator_mod.aggregate(scored, frequency)
    if args.standardize:
        series = indicator_mod.standardize(series, mode=args.standardize_mode)
    indicator_mod.write_indicator_csv(series, args.output)
    logger.info("wrote %d indicator points to %s", len(series.points), args.output)
    return 0


def cmd_decompose(args) -> int:
    scored = _read_scores(args.scores)
    articles = list(corpus_mod.ingest(args.corpus))
    if args.method == "keyword":
        if not args.keywords:
            raise ValueError("keyword method needs --keywords")
        import yaml

        keywords = yaml.safe_load(Path(args.keywords).read_text(encoding="utf-8"))
        assignments = decomp_mod.assign_keyword(articles, keywords, match=args.match)
    elif args.method == "classified":
        if not args.topics_model:
            raise ValueError("classified method needs --topics-model")
        model = sentiment_mod.load_multinomial(args.topics_model)
        store = read_store(args.embeddings)
        ids = [a.id for a in articles]
        X = np.vstack([store.get(i) for i in ids])
        assignments = decomp_mod.assign_classified(model, ids, X)
    else:
        store = read_store(args.embeddings)
        fit_month = args.fit_month or max(indicator_mod.month_key(a.date) for a in articles)
        fit_ids = [a.id for a in articles if indicator_mod.month_key(a.date) == fit_month]
        model = decomp_mod.fit_clusters(
            np.vstack([store.get(i) for i in fit_ids]),
            k=args.clusters,
            reducer_dim=args.reducer_dim,
            seed=args.seed,
            fit_month=fit_month,
        )
        if args.clusters_output:
            decomp_mod.save_clusters(model, args.clusters_output)
        ids = [a.id for a in articles]
        X = np.vstack([store.get(i) for i in ids])
        assignments = decomp_mod.assign_clusters(model, ids, X)

    standardization = None
    if args.standardize_from:
        series = indicator_mod.read_indicator_csv(args.standardize_from)
        if not series.standardized:
            raise ValueError(f"{args.standardize_from} carries no standardization moments")
        standardization = (series.mean, series.std)
    contributions = decomp_mod.contributions(assignments, scored, standardization)
    if args.fold_threshold is not None:
        contributions = decomp_mod.fold_minor_topics(contributions, args.fold_threshold)
    decomp_mod.write_contributions_csv(contributions, args.output)
    if args.assignments_output:
        decomp_mod.write_assignments_csv(assignments, args.assignments_output)
    logger.info("wrote contributions for %d topics to %s", len(contributions.topics), args.output)
    return 0


def cmd_evaluate_forecast(args) -> int:
    gdp_yoy, _ = forecast_mod.read_gdp_csv(args.gdp)
    series = indicator_mod.read_indicator_csv(args.indicator)
    config = forecast_mod.ForecastConfig(
        horizons=args.horizons,
        month_in_quarter=args.m,
        initial_window=args.initial_window,
        quarterly_mode=args.mode,
        small_sample=args.small_sample,
    )
    report = forecast_mod.evaluate_indicator(gdp_yoy, series, config)
    forecast_mod.write_report_csv(report, args.output)
    if args.crisis_prefix:
        for result in report.horizons:
            crisis = forecast_mod.crisis_diagnostic(
                result.model_errors, result.benchmark_errors, result.targets
            )
            forecast_mod.write_crisis_csv(crisis, f"{args.crisis_prefix}_h{result.horizon}.csv")
    for result in report.horizons:
        logger.info(
            "h=%d: rmse ratio %.4f, DM p=%.4f over %d quarters",
            result.horizon,
            result.ratio,
            result.dm.p_value,
            len(result.targets),
        )
    return 0


def cmd_correlations(args) -> int:
    gdp_yoy, _ = forecast_mod.read_gdp_csv(args.gdp)
    series = indicator_mod.read_indicator_csv(args.indicator)
    quarterly = forecast_mod.monthly_to_quarterly(series, mode=args.mode, m=args.m)
    table = forecast_mod.lag_correlations(gdp_yoy, quarterly, lags=range(args.lags + 1))
    forecast_mod.write_correlations_csv(table, args.output)
    logger.info(
        "lag correlations written to %s (avg over lags 0-1: %s)",
        args.output,
        table["avg_0_1"],
    )
    return 0


def cmd_lexicon_score(args) -> int:
    lex = lexicon_mod.load_lexicon(args.lexicon, language=args.language)
    articles = corpus_mod.ingest(args.corpus)
    series = lexicon_mod.lexicon_indicator(articles, lex)
    indicator_mod.write_indicator_csv(series, args.output)
    logger.info("wrote lexicon indicator (%d months) to %s", len(series.points), args.output)
    return 0


def cmd_stability(args) -> int:
    anchor_store = read_store(args.anchor_embeddings)
    collection = anchors_mod.load_anchors(args.anchors, anchor_store)
    store = read_store(args.embeddings)
    articles = list(corpus_mod.ingest(args.corpus))
    ids = [a.id for a in articles]
    X = np.vstack([store.get(i) for i in ids])
    dates = [a.date for a in articles]

    def indicator_fn(model):
        probs = np.clip(sentiment_mod.score_batch(model, X), 1e-12, 1.0 - 1e-12)
        scored = [
            indicator_mod.ScoredArticle(i, d, float(p)) for i, d, p in zip(ids, dates, probs)
        ]
        return indicator_mod.aggregate(scored, "monthly")

    report = anchors_mod.stability_experiment(
        collection,
        indicator_fn,
        sizes=args.sizes,
        repeats=args.repeats,
        seed=args.seed,
        l2_lambda=args.l2_lambda,
    )
    anchors_mod.write_stability_csv(report, args.output)
    logger.info("stability results for sizes %s written to %s", list(args.sizes), args.output)
    return 0


def cmd_sample_for_labeling(args) -> int:
    scored = _read_scores(args.scores)
    texts = None
    if args.corpus:
        texts = {a.id: a.text for a in corpus_mod.ingest(args.corpus)}
    indicator_mod.export_labeling_sample(
        scored,
        args.output,
        bands=args.bands,
        k_per_band=args.k,
        seed=args.seed,
        texts=texts,
    )
    logger.info("labeling sample written to %s", args.output)
    return 0


def cmd_embed_adapter(args) -> int:
    executable = shutil.which("outlook-adapter")
    if executable is None:
        logger.error(
            "secondary embedding adapter not installed; expected 'outlook-adapter' on PATH"
        )
        return 1
    result = subprocess.run([executable, *args.adapter_args])
    return result.returncode


def cmd_run(args) -> int:
    config = PipelineConfig.from_yaml(
        args.config, output_dir=Path(args.output_dir).resolve() if args.output_dir else None
    )
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.relevance_threshold is not None:
        overrides["relevance_threshold"] = args.relevance_threshold
    if args.relevance_allowlist is not None:
        overrides["relevance_allowlist"] = args.relevance_allowlist
    if args.relevance_lambda is not None:
        overrides["relevance_lambda"] = args.relevance_lambda
    if args.sentiment_lambda is not None:
        overrides["sentiment_lambda"] = args.sentiment_lambda
    if args.method is not None:
        overrides["decompose_method"] = args.method
    if args.clusters is not None:
        overrides["decompose_clusters"] = args.clusters
    if args.frequencies is not None:
        overrides["indicator_frequencies"] = tuple(
            FREQUENCY_TOKENS[f] for f in args.frequencies
        )
    if overrides:
        config = replace(config, **overrides)
    if args.horizons is not None:
        config = replace(config, forecast=replace(config.forecast, horizons=args.horizons))
    if args.m is not None:
        config = replace(config, forecast=replace(config.forecast, month_in_quarter=args.m))
    stages = args.stages if args.stages else STAGES
    pipeline = Pipeline(config, jobs=args.jobs)
    written = pipeline.run(stages)
    logger.info("pipeline wrote %d artifacts under %s", len(written), config.output_dir)
    return 0


# --- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="newsgauge",
        description="News-based economic outlook indicator pipeline.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument(
        "--jobs", type=int, default=1, help="worker count cap for parallel stages"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse, clean, and filter a raw corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    _add_filter_flag(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train-relevance", help="train the relevance filter from sections")
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--allowlist", type=_str_list, default=("Wirtschaft", "Börse", "Finanzen"))
    p.add_argument("--threshold", type=float, default=relevance_mod.DEFAULT_THRESHOLD)
    p.add_argument("--l2-lambda", type=float, default=1.0)
    p.add_argument("--kind", choices=("logistic", "mlp"), default="logistic")
    p.add_argument("--max-per-class", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_relevance)

    p = sub.add_parser("apply-relevance", help="keep articles at or above the threshold")
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--threshold", type=float, default=None, help="override stored threshold")
    p.set_defaults(func=cmd_apply_relevance)

    p = sub.add_parser("train-sentiment", help="train the sentiment model on anchors")
    p.add_argument("--anchors", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--topics-output", default=None, help="also train the sector classifier")
    p.add_argument("--l2-lambda", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_sentiment)

    p = sub.add_parser("score", help="score articles with a trained sentiment model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("build-indicator", help="aggregate scores into an indicator series")
    p.add_argument("--scores", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--frequency", choices=sorted(FREQUENCY_TOKENS), default="monthly")
    p.add_argument("--month", default=None, help="restrict daily-mtd to one YYYY-MM month")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--standardize-mode", choices=("full", "expanding"), default="full")
    p.set_defaults(func=cmd_build_indicator)

    p = sub.add_parser("decompose", help="split the indicator into topic contributions")
    p.add_argument("--scores", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--method", choices=("keyword", "classified", "clustering"), required=True)
    p.add_argument("--embeddings", default=None)
    p.add_argument("--keywords", default=None, help="YAML mapping of topic to term list")
    p.add_argument("--match", choices=("word", "prefix"), default="word")
    p.add_argument("--topics-model", default=None)
    p.add_argument("--clusters", type=int, default=8)
    p.add_argument("--reducer-dim", type=int, default=10)
    p.add_argument("--fit-month", default=None)
    p.add_argument("--clusters-output", default=None)
    p.add_argument("--assignments-output", default=None)
    p.add_argument("--standardize-from", default=None,
                   help="standardized indicator CSV supplying the moments")
    p.add_argument("--fold-threshold", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("evaluate-forecast", help="expanding-window forecast comparison")
    p.add_argument("--gdp", required=True)
    p.add_argument("--indicator", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--horizons", type=_int_list, default=(0, 1, 2))
    p.add_argument("--m", type=int, default=2, help="month of the quarter to sample")
    p.add_argument("--mode", choices=("month_m", "three_month_mean", "passthrough"),
                   default="month_m")
    p.add_argument("--initial-window", type=int, default=8)
    p.add_argument("--small-sample", action="store_true")
    p.add_argument("--crisis-prefix", default=None)
    p.set_defaults(func=cmd_evaluate_forecast)

    p = sub.add_parser("correlations", help="lagged GDP/indicator correlation table")
    p.add_argument("--gdp", required=True)
    p.add_argument("--indicator", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--lags", type=int, default=4)
    p.add_argument("--mode", choices=("month_m", "three_month_mean"), default="three_month_mean")
    p.add_argument("--m", type=int, default=2)
    p.set_defaults(func=cmd_correlations)

    p = sub.add_parser("lexicon-score", help="lexicon benchmark indicator")
    p.add_argument("--corpus", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--language", default="de")
    p.set_defaults(func=cmd_lexicon_score)

    p = sub.add_parser("stability", help="anchor-count stability experiment")
    p.add_argument("--anchors", required=True)
    p.add_argument("--anchor-embeddings", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--sizes", type=_int_list, default=(32, 64, 100, 128))
    p.add_argument("--repeats", type=int, default=12)
    p.add_argument("--l2-lambda", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("sample-for-labeling", help="stratified score sample for annotators")
    p.add_argument("--scores", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--corpus", default=None, help="include article text from this corpus")
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--bands", type=_bands,
                   default=indicator_mod.DEFAULT_BANDS,
                   help="comma-separated lo:hi quantile bands")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sample_for_labeling)

    p = sub.add_parser("embed-adapter", help="forward arguments to the embedding adapter")
    p.add_argument("adapter_args", nargs=argparse.REMAINDER)
    p.set_defaults(func=cmd_embed_adapter)

    p = sub.add_parser("run", help="run pipeline stages from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--stages", type=_str_list, default=None,
                   help=f"comma-separated subset of {','.join(STAGES)}")
    p.add_argument("--output-dir", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--relevance-threshold", type=float, default=None)
    p.add_argument("--relevance-allowlist", type=_str_list, default=None)
    p.add_argument("--relevance-lambda", type=float, default=None)
    p.add_argument("--sentiment-lambda", type=float, default=None)
    p.add_argument("--method", choices=("keyword", "classified", "clustering"), default=None)
    p.add_argument("--clusters", type=int, default=None)
    p.add_argument("--frequencies", type=_str_list, default=None,
                   help="comma-separated subset of monthly,first7,first14,first21")
    p.add_argument("--horizons", type=_int_list, default=None)
    p.add_argument("--m", type=int, default=None)
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except DependencyError as error:
        logger.error("%s", error)
        return 3
    except (ValueError, OSError, corpus_mod.CorpusError) as error:
        logger.error("%s", error)
        return 1


if __name__ == "__main__":
    sys.exit(main())
