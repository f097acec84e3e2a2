"""Regenerate the committed synthetic fixtures under data/fixture/.

The fixtures are a miniature of the real setting: a German-language news
corpus with planted monthly sentiment, an anchor set of 256 labeled
synthetic articles over eight sectors, a GDP series driven by the
planted sentiment, a small demonstration lexicon, and embedding stores
produced by the deterministic hash-based pseudo-embedder. Everything is
seeded; rerunning this script reproduces the files byte for byte.

Two corpora are written. corpus_12m is a dense single-year corpus of
relevant articles with a sinusoidal sentiment path, used for the
decomposition, stability, and anchor-substitution tests. corpus_pipeline
spans six years, mixes in off-topic articles with section labels (for
the relevance filter) and raw-markup records (for the ingest path), and
comes with a GDP series generated from its own quarterly sentiment, used
for end-to-end pipeline and forecast runs.
"""

from __future__ import annotations

import json
import math
import sys
from datetime import date
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from newsgauge.anchors import SECTORS
from newsgauge.corpus import parse_markup
from newsgauge.embeddings import EmbeddingStore, write_store
from newsgauge.testing import hash_embed

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "data" / "fixture"
DIM = 64
EMBED_SEED = 7

POSITIVE = (
    "aufschwung wachstum gewinn optimismus erholung boom expansion zuversicht "
    "rekord verbesserung anstieg robust chancen erfolg steigerung belebung "
    "hoffnung zunahme aufwärtstrend stärke"
).split()

NEGATIVE = (
    "rezession krise verlust pessimismus einbruch abschwung stagnation sorge "
    "verschlechterung rückgang insolvenz unsicherheit risiko angst talfahrt "
    "flaute warnung abbau abwärtstrend schwäche"
).split()

SECTOR_TERMS = {
    "general": "wirtschaft konjunktur schweiz lage entwicklung quartal".split(),
    "financial_markets": "börse aktien franken kurse anleihen obligationen".split(),
    "labor_market": "arbeitsmarkt beschäftigung stellen löhne arbeitslosigkeit fachkräfte".split(),
    "real_estate": "immobilien wohnungen mieten bauwirtschaft hypotheken leerstand".split(),
    "international_trade": "zoll zölle export import handel aussenhandel".split(),
    "consumption": "konsum detailhandel kaufkraft preise haushalte nachfrage".split(),
    "business_situation": "unternehmen aufträge produktion industrie geschäftslage margen".split(),
    "macro_outlook": "prognose aussichten bruttoinlandprodukt inflation zinsen erwartungen".split(),
}

FILLER = (
    "der die das und in von mit für auf bericht meldung woche montag zürich "
    "bern heute gestern neue sagte erklärte laut gemäss zudem dabei bereits "
    "weiter jedoch auch gegenüber derzeit insgesamt zuletzt erneut demnach"
).split()

SPORT = "fussball match tor sieg saison trainer spiel liga turnier rennen".split()
CULTURE = (
    "theater film festival ausstellung museum konzert bühne roman künstler premiere"
).split()
FRENCH = (
    "économie croissance marché entreprises conjoncture semaine rapport selon "
    "hausse baisse prévision commerce"
).split()

ECON_SECTIONS = ("Wirtschaft", "Börse", "Finanzen")
OTHER_SECTIONS = ("Sport", "Kultur")
OUTLETS = ("Tagespost", "Morgenblatt", "Abendkurier", "Handelsblatt Ost")


def sentence(rng, pools, weights, n_tokens):
    pool_idx = rng.choice(len(pools), size=n_tokens, p=weights)
    return " ".join(pools[i][rng.integers(len(pools[i]))] for i in pool_idx)


def econ_body(rng, sector, polarity_prob, n_sentences=3):
    sentiment = POSITIVE if rng.random() < polarity_prob else NEGATIVE
    pools = (FILLER, SECTOR_TERMS[sector], sentiment)
    weights = (0.5, 0.25, 0.25)
    lines = [
        sentence(rng, pools, weights, int(rng.integers(10, 18)))
        for _ in range(n_sentences)
    ]
    title = sentence(rng, (SECTOR_TERMS[sector], sentiment), (0.5, 0.5), 4)
    return title, "\n".join(lines), sentiment is POSITIVE


def offtopic_body(rng, pool):
    pools = (FILLER, pool)
    weights = (0.45, 0.55)
    lines = [
        sentence(rng, pools, weights, int(rng.integers(10, 16))) for _ in range(3)
    ]
    return sentence(rng, (pool,), (1.0,), 4), "\n".join(lines)


def month_dates(rng, year, month, n):
    last_day = 28 if month == 2 else 30
    days = np.sort(rng.integers(1, last_day + 1, size=n))
    return [date(year, month, int(d)) for d in days]


def write_jsonl(records, path):
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def make_anchors(rng):
    """256 anchors: 8 sectors x 16 per polarity, ids 1..256."""
    records = []
    vectors = []
    anchor_id = 1
    for sector in SECTORS:
        for polarity in (1, 0):
            for _ in range(16):
                sentiment = POSITIVE if polarity else NEGATIVE
                pools = (SECTOR_TERMS[sector], sentiment, FILLER)
                weights = (0.25, 0.65, 0.1)
                n_tokens = int(rng.integers(25, 60))
                text = sentence(rng, pools, weights, n_tokens)
                records.append(
                    {"id": anchor_id, "polarity": polarity, "sector": sector, "text": text}
                )
                vectors.append(hash_embed(text, dim=DIM, seed=EMBED_SEED))
                anchor_id += 1
    write_jsonl(records, FIXTURE_DIR / "anchors.jsonl")
    store = EmbeddingStore(
        np.array([r["id"] for r in records], dtype=np.uint64),
        np.vstack(vectors),
        normalized=True,
    )
    write_store(store, FIXTURE_DIR / "anchor_embeddings.emb")


def make_corpus_12m(rng):
    """500 relevant articles over 2023 with sinusoidal monthly sentiment."""
    sizes = rng.multinomial(500, np.full(12, 1 / 12))
    records = []
    ids = []
    vectors = []
    article_id = 1000
    for month_index, n in enumerate(sizes):
        month = month_index + 1
        theta = 0.5 + 0.35 * math.sin(2 * math.pi * month_index / 12)
        for d in month_dates(rng, 2023, month, n):
            sector = SECTORS[rng.integers(len(SECTORS))]
            polarity_prob = float(np.clip(theta + rng.normal(0, 0.05), 0.02, 0.98))
            title, body, positive = econ_body(rng, sector, polarity_prob)
            records.append(
                {
                    "id": article_id,
                    "date": d.isoformat(),
                    "outlet": OUTLETS[rng.integers(len(OUTLETS))],
                    "pubtype": "print" if rng.random() < 0.5 else "online",
                    "language": "de",
                    "section": ECON_SECTIONS[rng.integers(len(ECON_SECTIONS))],
                    "title": title,
                    "body": body,
                    "planted_sector": sector,
                    "planted_positive": int(positive),
                }
            )
            ids.append(article_id)
            vectors.append(hash_embed(title + "\n" + body, dim=DIM, seed=EMBED_SEED))
            article_id += 1
    write_jsonl(records, FIXTURE_DIR / "corpus_12m.jsonl")
    store = EmbeddingStore(
        np.array(ids, dtype=np.uint64), np.vstack(vectors), normalized=True
    )
    write_store(store, FIXTURE_DIR / "embeddings_12m.emb")


def make_corpus_pipeline(rng):
    """Six years, 500 articles: econ majority, off-topic and French minorities.

    Econ sentiment follows a seeded AR(1) path; the GDP series is built
    from the quarterly means of that path, so the indicator genuinely
    leads GDP in this miniature world. A third of the records carry raw
    markup in a "content" field instead of cleaned title/body.
    """
    months = [(year, month) for year in range(2018, 2024) for month in range(1, 13)]
    theta = 0.5
    theta_by_month = {}
    for year, month in months:
        theta = 0.5 + 0.8 * (theta - 0.5) + rng.normal(0, 0.07)
        theta = float(np.clip(theta, 0.1, 0.9))
        theta_by_month[(year, month)] = theta

    n_econ, n_off, n_fr = 380, 100, 20
    econ_counts = rng.multinomial(n_econ, np.full(len(months), 1 / len(months)))
    off_counts = rng.multinomial(n_off, np.full(len(months), 1 / len(months)))
    fr_counts = rng.multinomial(n_fr, np.full(len(months), 1 / len(months)))

    records = []
    ids = []
    vectors = []
    article_id = 10000
    for i, (year, month) in enumerate(months):
        entries = []
        for d in month_dates(rng, year, month, econ_counts[i]):
            sector = SECTORS[rng.integers(len(SECTORS))]
            prob = float(np.clip(theta_by_month[(year, month)] + rng.normal(0, 0.05), 0.02, 0.98))
            title, body, _ = econ_body(rng, sector, prob)
            entries.append((d, ECON_SECTIONS[rng.integers(len(ECON_SECTIONS))], "de", title, body))
        for d in month_dates(rng, year, month, off_counts[i]):
            pool, section = (SPORT, "Sport") if rng.random() < 0.5 else (CULTURE, "Kultur")
            title, body = offtopic_body(rng, pool)
            entries.append((d, section, "de", title, body))
        for d in month_dates(rng, year, month, fr_counts[i]):
            title = sentence(rng, (FRENCH,), (1.0,), 4)
            body = "\n".join(
                sentence(rng, (FRENCH, FILLER), (0.7, 0.3), int(rng.integers(10, 16)))
                for _ in range(2)
            )
            entries.append((d, "Economie", "fr", title, body))
        entries.sort(key=lambda e: e[0])
        for d, section, language, title, body in entries:
            record = {
                "id": article_id,
                "date": d.isoformat(),
                "outlet": OUTLETS[rng.integers(len(OUTLETS))],
                "pubtype": "print" if rng.random() < 0.5 else "online",
                "language": language,
                "section": section,
            }
            if rng.random() < 1 / 3:
                paragraphs = "".join(f"<p>{line}</p>" for line in body.split("\n"))
                content = f"<title>{title}</title>{paragraphs}<box>kasten hinweis</box>"
                parsed_title, parsed_body = parse_markup(content)
                assert parsed_title == title and parsed_body == body
                record["content"] = content
            else:
                record["title"] = title
                record["body"] = body
            records.append(record)
            ids.append(article_id)
            vectors.append(hash_embed(title + "\n" + body, dim=DIM, seed=EMBED_SEED))
            article_id += 1
    write_jsonl(records, FIXTURE_DIR / "corpus_pipeline.jsonl")
    store = EmbeddingStore(
        np.array(ids, dtype=np.uint64), np.vstack(vectors), normalized=True
    )
    write_store(store, FIXTURE_DIR / "embeddings_pipeline.emb")

    quarters = []
    for year in range(2018, 2024):
        for q in range(1, 5):
            months_of_q = [(year, 3 * (q - 1) + k) for k in (1, 2, 3)]
            s = float(np.mean([theta_by_month[m] for m in months_of_q]))
            quarters.append((f"{year}Q{q}", s))
    rows = ["quarter,yoy_growth,qoq_growth"]
    y = 1.0
    for name, s in quarters:
        y = 0.5 * y + 6.0 * (s - 0.5) + rng.normal(0, 0.15)
        qoq = y / 4 + rng.normal(0, 0.1)
        rows.append(f"{name},{repr(round(y, 6))},{repr(round(qoq, 6))}")
    (FIXTURE_DIR / "gdp.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")


def make_lexicon():
    rows = ["term,polarity"]
    rows.extend(f"{term},positive" for term in sorted(POSITIVE))
    rows.extend(f"{term},negative" for term in sorted(NEGATIVE))
    (FIXTURE_DIR / "lexicon.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    (FIXTURE_DIR / "stopwords_de.txt").write_text(
        "\n".join(sorted(set(FILLER))) + "\n", encoding="utf-8"
    )


def main():
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20230115)
    make_anchors(rng)
    make_corpus_12m(rng)
    make_corpus_pipeline(rng)
    make_lexicon()
    for path in sorted(FIXTURE_DIR.iterdir()):
        print(f"{path.name}: {path.stat().st_size} bytes")


if __name__ == "__main__":
    main()
