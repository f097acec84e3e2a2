"""Dictionary-based sentiment baseline.

Counts occurrences of predefined positive and negative terms in an
article and scores it (pos - neg)/(pos + neg), a bounded, count-
invariant normalized difference; no matches score 0. Word-count methods
cannot see context or negation ("not happy" counts as positive), which
is exactly why this baseline exists: the indicator has to beat it.
"""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .corpus import Article
from .indicator import IndicatorSeries, aggregate_values

logger = logging.getLogger(__name__)

_WORD_RE = re.compile(r"\w+", re.UNICODE)


@dataclass(frozen=True)
class SentimentLexicon:
    positive: frozenset[str]
    negative: frozenset[str]
    language: str = "de"

    def __post_init__(self):
        if not self.positive or not self.negative:
            raise ValueError("both term sets must be non-empty")
        overlap = self.positive & self.negative
        if overlap:
            raise ValueError(f"terms in both sets: {sorted(overlap)[:5]}")

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[str, str]], language: str = "de"):
        positive = set()
        negative = set()
        for term, polarity in terms:
            if polarity == "positive":
                positive.add(term.casefold())
            elif polarity == "negative":
                negative.add(term.casefold())
            else:
                raise ValueError(f"bad polarity {polarity!r} for term {term!r}")
        return cls(frozenset(positive), frozenset(negative), language)

    def swapped(self) -> "SentimentLexicon":
        return SentimentLexicon(self.negative, self.positive, self.language)


def load_lexicon(path: str | Path, language: str = "de") -> SentimentLexicon:
    """Read line-delimited term,polarity records."""
    with Path(path).open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        rows = [row for row in reader if row]
    if rows and rows[0][:2] == ["term", "polarity"]:
        rows = rows[1:]
    return SentimentLexicon.from_terms(((r[0], r[1]) for r in rows), language)


def lexicon_score(article: Article, lexicon: SentimentLexicon) -> float:
    """Normalized difference of positive and negative hits, in [-1, 1].

    Whole-word, case-insensitive counting over the article text; each
    token occurrence counts once. Language mismatch is a caller error
    here; the indicator loop skips such articles instead.
    """
    if article.language != lexicon.language:
        raise ValueError(
            f"article {article.id} language {article.language!r} does not match "
            f"lexicon {lexicon.language!r}"
        )
    positive = negative = 0
    for token in _WORD_RE.findall(article.text.casefold()):
        if token in lexicon.positive:
            positive += 1
        elif token in lexicon.negative:
            negative += 1
    if positive + negative == 0:
        return 0.0
    return (positive - negative) / (positive + negative)


def lexicon_indicator(
    articles: Iterable[Article], lexicon: SentimentLexicon
) -> IndicatorSeries:
    """Monthly mean of per-article lexicon scores.

    Same aggregation machinery as the main indicator; articles in other
    languages are skipped and counted.
    """
    records = []
    skipped = 0
    for article in articles:
        if article.language != lexicon.language:
            skipped += 1
            continue
        records.append((article.date, article.id, lexicon_score(article, lexicon)))
    if skipped:
        logger.info("lexicon indicator skipped %d articles in other languages", skipped)
    return aggregate_values(records, "monthly")
