"""News-based economic outlook indicator.

Builds a monthly sentiment indicator from news-article embeddings:
articles are filtered for economic relevance, scored by a logistic
classifier trained on synthetic labeled anchor articles, aggregated into
monthly (and timelier partial-month) series, decomposed additively into
topic contributions, and evaluated as a GDP-growth predictor against an
AR(1) benchmark.
"""

from .anchors import (
    SECTORS,
    AnchorArticle,
    AnchorCollection,
    anchors_from_extremes,
    load_anchors,
    stability_experiment,
)
from .corpus import Article, CorpusFilter, MarkupError, clean_text, ingest
from .decomposition import (
    ClusterModel,
    ContributionSeries,
    TopicAssignments,
    assign_classified,
    assign_clusters,
    assign_keyword,
    contributions,
    fit_clusters,
    fit_reducer,
    term_frequencies,
    top_articles,
)
from .embeddings import (
    EmbeddingStore,
    EmbeddingVector,
    StoreFormatError,
    join,
    l2_normalize,
    read_store,
    write_store,
)
from .forecast import (
    ForecastConfig,
    ForecastReport,
    Quarter,
    QuarterlySeries,
    crisis_diagnostic,
    dm_test,
    evaluate_indicator,
    expanding_forecast,
    lag_correlations,
    monthly_to_quarterly,
    ols_fit,
    rmse_ratio,
)
from .indicator import (
    IndicatorSeries,
    ScoredArticle,
    aggregate,
    daily_month_to_date,
    destandardize,
    export_labeling_sample,
    standardize,
)
from .lexicon import SentimentLexicon, lexicon_indicator, lexicon_score, load_lexicon
from .pipeline import Pipeline, PipelineConfig
from .relevance import (
    RelevanceConfig,
    RelevanceModel,
    apply_relevance,
    build_labels,
    train_relevance,
)
from .sentiment import (
    CosineScorer,
    LogisticModel,
    MultinomialModel,
    cosine_score,
    equivalence_report,
    score,
    score_batch,
    train_logistic,
    train_multinomial,
)

__version__ = "0.1.0"
