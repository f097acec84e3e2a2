"""Fixed-dimension document embeddings with a bit-exact exchange format.

On disk, vectors are 32-bit floats behind a small binary header; in
memory they are widened to float64 so that normalization and dot-product
accumulation run at full precision. A CSV variant of the format exists
for hand-written test fixtures.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from newsgauge.corpus import Article

logger = logging.getLogger(__name__)

MAGIC = b"EMB1"
VERSION = 1
_HEADER = struct.Struct("<4sIIQB7x")  # magic, version, dimension, count, normalized


class StoreFormatError(ValueError):
    """Fatal problem with an embedding exchange file."""


@dataclass(frozen=True)
class EmbeddingVector:
    """One embedding keyed by its article id."""

    article_id: int
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 1:
            raise ValueError("embedding must be one-dimensional")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"non-finite entries in embedding {self.article_id}")


@dataclass
class EmbeddingStore:
    """Immutable collection of same-dimension embeddings."""

    ids: np.ndarray  # (N,) uint64
    values: np.ndarray  # (N, D) float64
    normalized: bool = False

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.uint64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("store values must be a 2-d array")
        if self.ids.shape[0] != self.values.shape[0]:
            raise ValueError("id count does not match vector count")
        if self.values.shape[1] == 0:
            raise StoreFormatError("dimension 0 store")
        unique = np.unique(self.ids)
        if unique.size != self.ids.size:
            raise StoreFormatError("duplicate article ids in store")
        if self.normalized and self.count:
            norms = np.linalg.norm(self.values, axis=1)
            bad = np.abs(norms - 1.0) > 1e-5
            if np.any(bad):
                k = int(np.argmax(bad))
                raise StoreFormatError(
                    f"normalized flag set but record {k} has norm {norms[k]:.6g}"
                )
        self._index = {int(i): k for k, i in enumerate(self.ids)}

    @property
    def dimension(self) -> int:
        return int(self.values.shape[1])

    @property
    def count(self) -> int:
        return int(self.ids.shape[0])

    def __contains__(self, article_id: int) -> bool:
        return int(article_id) in self._index

    def get(self, article_id: int) -> np.ndarray:
        return self.values[self._index[int(article_id)]]

    def vector(self, article_id: int) -> EmbeddingVector:
        return EmbeddingVector(int(article_id), self.get(article_id))

    def __iter__(self) -> Iterator[EmbeddingVector]:
        for i in range(self.count):
            yield EmbeddingVector(int(self.ids[i]), self.values[i])

    def normalize_all(self) -> "EmbeddingStore":
        """Return a copy with every vector scaled to unit Euclidean norm."""
        norms = np.linalg.norm(self.values, axis=1)
        zero = norms == 0.0
        if np.any(zero):
            k = int(np.argmax(zero))
            raise ValueError(f"degenerate embedding (zero vector) at record {k}")
        return EmbeddingStore(self.ids.copy(), self.values / norms[:, None], True)


def l2_normalize(vector: EmbeddingVector | np.ndarray) -> EmbeddingVector | np.ndarray:
    """Scale to unit norm in float64; direction is preserved exactly."""
    if isinstance(vector, EmbeddingVector):
        return EmbeddingVector(vector.article_id, l2_normalize(vector.values))
    values = np.asarray(vector, dtype=np.float64)
    norm = float(np.linalg.norm(values))
    if norm == 0.0:
        raise ValueError("degenerate embedding (zero vector)")
    return values / norm


def _record_dtype(dimension: int) -> np.dtype:
    return np.dtype([("id", "<u8"), ("values", "<f4", (dimension,))])


def write_store(store: EmbeddingStore, path: str | Path) -> None:
    """Write the binary exchange format (float32 records, little-endian)."""
    records = np.empty(store.count, dtype=_record_dtype(store.dimension))
    records["id"] = store.ids
    records["values"] = store.values.astype("<f4")
    with Path(path).open("wb") as handle:
        handle.write(
            _HEADER.pack(MAGIC, VERSION, store.dimension, store.count, int(store.normalized))
        )
        handle.write(records.tobytes())


def read_store(path: str | Path) -> EmbeddingStore:
    """Read an exchange file; sniffs the binary magic, else parses CSV."""
    path = Path(path)
    with path.open("rb") as handle:
        head = handle.read(4)
    if head == MAGIC:
        return _read_binary(path)
    return _read_csv(path)


def _read_binary(path: Path) -> EmbeddingStore:
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise StoreFormatError(f"{path}: truncated header at offset {len(data)}")
    magic, version, dimension, count, normalized = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise StoreFormatError(f"{path}: bad magic {magic!r} at offset 0")
    if version != VERSION:
        raise StoreFormatError(f"{path}: unsupported version {version}")
    if dimension == 0:
        raise StoreFormatError(f"{path}: dimension 0 at offset 8")
    record_size = 8 + 4 * dimension
    expected = _HEADER.size + count * record_size
    if len(data) != expected:
        raise StoreFormatError(
            f"{path}: expected {expected} bytes for {count} records, "
            f"got {len(data)} (truncated at offset {len(data)})"
        )
    records = np.frombuffer(data, dtype=_record_dtype(dimension), count=count, offset=_HEADER.size)
    ids = records["id"].astype(np.uint64)
    values = records["values"].astype(np.float64)
    if values.size == 0:
        values = values.reshape(0, dimension)
    _reject_non_finite(values, path)
    return EmbeddingStore(ids, values, bool(normalized))


def _read_csv(path: Path) -> EmbeddingStore:
    ids: list[int] = []
    rows: list[list[float]] = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if lineno == 1 and fields[0].strip().lower() == "id":
                continue
            ids.append(int(fields[0]))
            rows.append([float(x) for x in fields[1:]])
    if not rows:
        raise StoreFormatError(f"{path}: empty CSV store")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise StoreFormatError(f"{path}: inconsistent CSV record widths {sorted(widths)}")
    values = np.asarray(rows, dtype=np.float64)
    _reject_non_finite(values, path)
    return EmbeddingStore(np.asarray(ids, dtype=np.uint64), values, False)


def _reject_non_finite(values: np.ndarray, path: Path) -> None:
    finite = np.isfinite(values).all(axis=1)
    if not finite.all():
        k = int(np.argmin(finite))
        raise StoreFormatError(f"{path}: non-finite value at record {k}")


def write_store_csv(store: EmbeddingStore, path: str | Path) -> None:
    """CSV variant of the exchange format, for fixtures."""
    dimension = store.dimension
    header = "id," + ",".join(f"v{i}" for i in range(dimension))
    with Path(path).open("w", encoding="utf-8") as handle:
        handle.write(header + "\n")
        for i in range(store.count):
            row = ",".join(repr(float(x)) for x in store.values[i])
            handle.write(f"{int(store.ids[i])},{row}\n")


@dataclass
class JoinResult:
    """Inner join of an article stream with an embedding store."""

    pairs: list[tuple[Article, np.ndarray]]
    unmatched_articles: list[int]
    unmatched_embeddings: list[int]


def join(articles: Iterable[Article], store: EmbeddingStore) -> JoinResult:
    """Join articles to their embeddings on id, ordered by (date, id).

    Missing embeddings are reported, not fatal; ids present only in the
    store are reported symmetrically.
    """
    matched: list[tuple[Article, np.ndarray]] = []
    unmatched_articles: list[int] = []
    seen: set[int] = set()
    for article in articles:
        if article.id in store:
            matched.append((article, store.get(article.id)))
            seen.add(article.id)
        else:
            unmatched_articles.append(article.id)
    matched.sort(key=lambda pair: (pair[0].date, pair[0].id))
    unmatched_embeddings = sorted(int(i) for i in store.ids if int(i) not in seen)
    if unmatched_articles or unmatched_embeddings:
        logger.info(
            "join: %d matched, %d articles without embedding, %d embeddings without article",
            len(matched),
            len(unmatched_articles),
            len(unmatched_embeddings),
        )
    return JoinResult(matched, unmatched_articles, unmatched_embeddings)
