"""Deterministic pseudo-embedder for fixtures and tests.

Real embedding services are nondeterministic dependencies; tests instead
use a hash-based stand-in. Each token maps to a fixed Gaussian vector
seeded from a blake2b digest of the token, and a text embeds as the
L2-normalized sum of its token vectors. Shared vocabulary therefore
produces high cosine similarity, which is enough structure for anchor
classification and relevance filtering to behave like the real thing.
"""

from __future__ import annotations

import hashlib
import re

import numpy as np

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


def _token_vector(token: str, dim: int, seed: int) -> np.ndarray:
    digest = hashlib.blake2b(
        token.encode("utf-8"), digest_size=8, key=seed.to_bytes(8, "little")
    ).digest()
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest, "little")))
    return rng.standard_normal(dim)


def hash_embed(text: str, dim: int = 64, seed: int = 0) -> np.ndarray:
    """Embed one text as the normalized sum of its token vectors.

    Deterministic in (text, dim, seed). Raises on texts with no word
    tokens, mirroring how a real embedder rejects empty input.
    """
    tokens = _TOKEN_RE.findall(text.casefold())
    if not tokens:
        raise ValueError("cannot embed text with no word tokens")
    total = np.zeros(dim)
    for token in tokens:
        total += _token_vector(token, dim, seed)
    norm = float(np.linalg.norm(total))
    if norm == 0.0:
        raise ValueError("token vectors cancelled; cannot normalize")
    return total / norm


def hash_embed_texts(texts, dim: int = 64, seed: int = 0) -> np.ndarray:
    """Embed a sequence of texts into an (N, dim) float64 array."""
    texts = list(texts)
    out = np.empty((len(texts), dim))
    for i, text in enumerate(texts):
        out[i] = hash_embed(text, dim=dim, seed=seed)
    return out
