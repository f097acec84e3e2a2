"""Deterministic text-to-vector export in the pipeline's exchange format.

The only model available locally is the hash-based pseudo-embedder the
pipeline's fixtures use, addressed by a ``hash:<dim>`` or
``hash:<dim>:<seed>`` tag. Everything it produces is reproducible bit
for bit, which keeps the conformance tests and the downstream pipeline
honest. A real embedding backend would slot in behind the same
:func:`load_model` seam.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
from newsgauge.embeddings import EmbeddingStore, write_store
from newsgauge.testing import hash_embed

# Generous cap mirroring the long-document limit of typical embedding
# models; requests beyond it are omitted per item, never fatal.
TOKEN_LIMIT = 8192

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


class ModelError(RuntimeError):
    """The requested embedding model cannot be loaded."""


@dataclass(frozen=True)
class HashModel:
    """Seeded hash embedder with a fixed output dimension."""

    dimension: int
    seed: int = 0

    @property
    def tag(self) -> str:
        return f"hash:{self.dimension}:{self.seed}"

    def embed(self, text: str) -> np.ndarray:
        return hash_embed(text, dim=self.dimension, seed=self.seed)


def load_model(model_id: str | HashModel) -> HashModel:
    """Resolve a model tag. Only ``hash:<dim>[:<seed>]`` loads locally."""
    if isinstance(model_id, HashModel):
        return model_id
    parts = str(model_id).split(":")
    if parts[0] != "hash" or len(parts) not in (2, 3):
        raise ModelError(
            f"unknown model {model_id!r}; only hash:<dim>[:<seed>] is available locally"
        )
    try:
        dimension = int(parts[1])
        seed = int(parts[2]) if len(parts) == 3 else 0
    except ValueError:
        raise ModelError(f"malformed model tag {model_id!r}") from None
    if dimension < 1:
        raise ModelError(f"model dimension must be positive, got {dimension}")
    return HashModel(dimension, seed)


@dataclass(frozen=True)
class EmbedRequest:
    """One text to embed, keyed by the article id it belongs to."""

    article_id: int
    text: str
    language: str = "de"

    def __post_init__(self):
        if not isinstance(self.article_id, int) or self.article_id < 0:
            raise ValueError(f"article_id must be a non-negative int, got {self.article_id!r}")
        if not isinstance(self.text, str):
            raise ValueError(f"text must be a string for article {self.article_id}")


@dataclass(frozen=True)
class BatchSummary:
    """What one embed_batch call wrote and what it had to leave out."""

    written: int
    dimension: int
    omitted: tuple[tuple[int, str], ...]  # (article_id, reason)


def embed_texts(texts, model: str | HashModel) -> np.ndarray:
    """Embed plain strings into an (N, dim) float64 array of unit rows.

    Pure and deterministic in (texts, model). Raises on a text without
    word tokens; use :func:`embed_batch` when per-item omission is the
    wanted behavior.
    """
    resolved = load_model(model)
    texts = list(texts)
    out = np.empty((len(texts), resolved.dimension))
    for i, text in enumerate(texts):
        out[i] = resolved.embed(text)
    return out


def _rejection_reason(request: EmbedRequest, seen: set[int]) -> str | None:
    if request.article_id in seen:
        return "duplicate article id"
    tokens = _TOKEN_RE.findall(request.text)
    if not tokens:
        return "empty text"
    if len(tokens) > TOKEN_LIMIT:
        return f"text over the {TOKEN_LIMIT}-token limit ({len(tokens)} tokens)"
    return None


def embed_batch(requests, model: str | HashModel, out) -> BatchSummary:
    """Embed requests into one store file at ``out``.

    A model that cannot load is fatal. A request that cannot be embedded
    (empty text, over the token limit, duplicate id) is omitted and the
    summary records why; the remaining vectors are written in request
    order with the normalized flag set.
    """
    resolved = load_model(model)
    ids: list[int] = []
    rows: list[np.ndarray] = []
    omitted: list[tuple[int, str]] = []
    seen: set[int] = set()
    for request in requests:
        reason = _rejection_reason(request, seen)
        if reason is None:
            try:
                vector = resolved.embed(request.text)
            except ValueError as exc:
                reason = str(exc)
        if reason is not None:
            omitted.append((request.article_id, reason))
            continue
        seen.add(request.article_id)
        ids.append(request.article_id)
        rows.append(vector)
    values = np.vstack(rows) if rows else np.empty((0, resolved.dimension))
    store = EmbeddingStore(np.array(ids, dtype=np.uint64), values, normalized=True)
    write_store(store, out)
    return BatchSummary(written=len(ids), dimension=resolved.dimension, omitted=tuple(omitted))
