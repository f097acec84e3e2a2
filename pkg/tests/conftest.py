"""Shared test fixtures: paths into the synthetic corpus shipped with the repo."""

from pathlib import Path

import pytest

from newsgauge.corpus import ingest
from newsgauge.embeddings import read_store

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "data" / "fixture"


@pytest.fixture(scope="session")
def fixture_dir() -> Path:
    return FIXTURE_DIR


@pytest.fixture(scope="session")
def corpus_12m():
    return list(ingest(FIXTURE_DIR / "corpus_12m.jsonl"))


@pytest.fixture(scope="session")
def store_12m():
    return read_store(FIXTURE_DIR / "embeddings_12m.emb")


@pytest.fixture(scope="session")
def corpus_pipeline():
    return list(ingest(FIXTURE_DIR / "corpus_pipeline.jsonl"))


@pytest.fixture(scope="session")
def store_pipeline():
    return read_store(FIXTURE_DIR / "embeddings_pipeline.emb")


@pytest.fixture(scope="session")
def anchor_store():
    return read_store(FIXTURE_DIR / "anchor_embeddings.emb")


@pytest.fixture(scope="session")
def anchor_collection(anchor_store):
    from newsgauge.anchors import load_anchors

    return load_anchors(FIXTURE_DIR / "anchors.jsonl", anchor_store)
