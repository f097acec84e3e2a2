"""Prompt templates for generating labeled anchor articles offline.

Generation itself is deliberately not automated: the templates are
printed for use with whatever text generator is at hand, and the
resulting articles enter the pipeline as ordinary data files. That
keeps this package free of external-service dependencies.
"""

from __future__ import annotations

SECTORS = (
    "business_situation",
    "consumption",
    "financial_markets",
    "general",
    "international_trade",
    "labor_market",
    "macro_outlook",
    "real_estate",
)

POLARITIES = ("positive", "negative")

_SECTOR_TOPIC = {
    "business_situation": "the current business situation of companies",
    "consumption": "private consumption and retail demand",
    "financial_markets": "the financial markets",
    "general": "the economy in general",
    "international_trade": "international trade and exports",
    "labor_market": "the labor market",
    "macro_outlook": "the macroeconomic outlook for the coming quarters",
    "real_estate": "the real estate market",
}

_POLARITY_FRAMING = {
    "positive": "a clearly optimistic view of the economic outlook",
    "negative": "a clearly pessimistic view of the economic outlook",
}


def prompt_template(sector: str, polarity: str) -> str:
    """Fill the article-generation prompt for one sector/polarity pair."""
    if sector not in _SECTOR_TOPIC:
        raise ValueError(f"unknown sector {sector!r}; expected one of {', '.join(SECTORS)}")
    if polarity not in _POLARITY_FRAMING:
        raise ValueError(f"unknown polarity {polarity!r}; expected one of {', '.join(POLARITIES)}")
    topic = _SECTOR_TOPIC[sector]
    framing = _POLARITY_FRAMING[polarity]
    return (
        f"Write three short German newspaper articles about {topic}.\n"
        "\n"
        "Requirements:\n"
        f"- Every article must convey {framing}; the polarity has to be\n"
        "  unmistakable from the text alone.\n"
        "- Vary length, structure, and vocabulary across the three articles so\n"
        "  they do not read as drafts of one another.\n"
        "- Use the sober register of a broadsheet economics section and start\n"
        "  each article with a headline line.\n"
        "- State the outlook in plain, self-contained sentences. Avoid irony,\n"
        "  rhetorical questions, and references to anything outside the\n"
        "  article, so an embedding model can score the text unambiguously.\n"
        "- Do not mention that the articles are fictional or generated.\n"
    )


def prompt_templates() -> dict[tuple[str, str], str]:
    """All 16 (sector, polarity) templates, each distinct."""
    return {
        (sector, polarity): prompt_template(sector, polarity)
        for sector in SECTORS
        for polarity in POLARITIES
    }
