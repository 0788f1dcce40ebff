"""Dense retrieval over the reference corpus.

The index is deliberately exhaustive: corpora here are domain-sized
(thousands of sentences, not millions), so a brute-force cosine scan is
both exact and fast enough, and it keeps ranking behaviour easy to reason
about.  Ties are broken by insertion order, which makes every search
reproducible across runs and platforms.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
import requests

from .corpus import Corpus, DocOrigin
from .errors import BackendError, DataError, TransientBackendError
from .fileio import atomic_write, dumps, make_header, read_jsonl


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity between two 1-d vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1:
        raise ValueError("cosine expects 1-d vectors")
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine is undefined for zero vectors")
    return float(np.dot(a, b) / (na * nb))


@dataclass(frozen=True)
class SearchHit:
    """One ranked retrieval result."""

    doc_id: str
    score: float
    rank: int  # 1-based


class VectorIndex:
    """Immutable exhaustive cosine index over document vectors.

    Vectors are stored as float64 with cached norms.  ``search`` scores
    every document and sorts descending with a stable sort, so equal
    scores keep insertion order.
    """

    def __init__(self, doc_ids: Sequence[str], vectors: np.ndarray):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise ValueError("vectors must be a 2-d array")
        if len(doc_ids) != vectors.shape[0]:
            raise ValueError(
                f"{len(doc_ids)} ids for {vectors.shape[0]} vectors"
            )
        if len(set(doc_ids)) != len(doc_ids):
            raise ValueError("duplicate doc ids in index")
        if vectors.shape[0] and not np.all(np.isfinite(vectors)):
            raise ValueError("index vectors must be finite")
        norms = np.linalg.norm(vectors, axis=1) if vectors.shape[0] else np.zeros(0)
        if vectors.shape[0] and np.any(norms == 0.0):
            raise ValueError("index vectors must be non-zero")
        self._ids = tuple(doc_ids)
        self._vectors = vectors
        self._vectors.setflags(write=False)
        self._norms = norms

    @property
    def doc_ids(self) -> tuple:
        return self._ids

    @property
    def dim(self) -> int:
        return int(self._vectors.shape[1]) if self._vectors.size else 0

    def __len__(self) -> int:
        return len(self._ids)

    def vector_for(self, doc_id: str) -> np.ndarray:
        try:
            pos = self._ids.index(doc_id)
        except ValueError:
            raise KeyError(doc_id) from None
        return self._vectors[pos]

    def search(self, query: np.ndarray, k: int) -> list:
        """Top-``k`` documents by cosine similarity, stable on ties."""
        if k < 1:
            raise ValueError("k must be >= 1")
        if not self._ids:
            return []
        query = np.asarray(query, dtype=np.float64)
        if query.ndim != 1 or query.shape[0] != self._vectors.shape[1]:
            raise ValueError("query dimension does not match index")
        qnorm = float(np.linalg.norm(query))
        if qnorm == 0.0 or not np.isfinite(qnorm):
            raise ValueError("query vector must be non-zero and finite")
        scores = (self._vectors @ query) / (self._norms * qnorm)
        order = np.argsort(-scores, kind="stable")[:k]
        return [
            SearchHit(doc_id=self._ids[i], score=float(scores[i]), rank=r + 1)
            for r, i in enumerate(order)
        ]


def save_index(
    path, index: VectorIndex, config_hash: str = "unset", seed: int = 0, **extra
) -> None:
    header = make_header("index", config_hash=config_hash, seed=seed, dim=index.dim, **extra)
    with atomic_write(path) as fh:
        fh.write(dumps(header) + "\n")
        for doc_id, vec in zip(index.doc_ids, index._vectors):
            fh.write(dumps({"doc_id": doc_id, "vector": [float(v) for v in vec]}) + "\n")


def load_index(path) -> VectorIndex:
    header, records = read_jsonl(path)
    if header is None or header.get("kind") != "index":
        raise DataError(f"{path}: not an index file")
    dim = header.get("dim")
    ids = []
    rows = []
    for rec in records:
        try:
            ids.append(rec["doc_id"])
            rows.append(rec["vector"])
        except (KeyError, TypeError) as exc:
            raise DataError(f"{path}: malformed index record: {exc}") from exc
    vectors = np.asarray(rows, dtype=np.float64) if rows else np.zeros((0, dim or 0))
    if rows and dim is not None and vectors.shape[1] != dim:
        raise DataError(f"{path}: header dim {dim} != vector dim {vectors.shape[1]}")
    return VectorIndex(ids, vectors)


class EmbedBackend(Protocol):
    def embed(self, texts: Sequence[str]) -> np.ndarray:
        """Return one embedding row per input text."""


class HttpEmbedBackend:
    """Client for an embedding service speaking the ``/embed`` protocol.

    Request: ``POST {url}/embed`` with ``{"texts": [...]}``.
    Response: ``{"embeddings": [[...], ...], "dim": n}``.
    """

    def __init__(self, url: str, timeout: float = 30.0, max_retries: int = 3):
        if not url:
            raise ValueError("embed backend url must be non-empty")
        self.url = url.rstrip("/")
        self.timeout = timeout
        self.max_retries = max_retries

    def _post_once(self, texts: Sequence[str]) -> np.ndarray:
        try:
            resp = requests.post(
                f"{self.url}/embed",
                json={"texts": list(texts)},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise TransientBackendError(f"embed request failed: {exc}") from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientBackendError(f"embed backend returned {resp.status_code}")
        if resp.status_code != 200:
            raise BackendError(f"embed backend returned {resp.status_code}")
        try:
            payload = resp.json()
            rows = payload["embeddings"]
            dim = payload["dim"]
        except (ValueError, KeyError, TypeError) as exc:
            raise BackendError(f"malformed embed response: {exc}") from exc
        arr = np.asarray(rows, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != len(texts) or arr.shape[1] != dim:
            raise BackendError(
                f"embed response shape {arr.shape} does not match "
                f"{len(texts)} texts of dim {dim}"
            )
        return arr

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        last = None
        for _ in range(self.max_retries + 1):
            try:
                return self._post_once(texts)
            except TransientBackendError as exc:
                last = exc
        raise BackendError(f"embed backend failed after retries: {last}") from last


class HashEmbedBackend:
    """Deterministic offline embedder used for tests and dry runs.

    Each character maps to a fixed pseudo-random unit-scale vector (seeded
    from sha256 of the character plus the backend seed); a text embeds to
    the normalized sum of its character vectors.  Texts sharing many
    characters land close together, which is enough structure for the
    retrieval pipeline to be exercised end to end without a model.
    """

    def __init__(self, dim: int = 64, seed: int = 0):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.seed = seed
        self._char_cache: dict = {}

    def _char_vector(self, ch: str) -> np.ndarray:
        vec = self._char_cache.get(ch)
        if vec is None:
            digest = hashlib.sha256(f"{self.seed}:{ch}".encode("utf-8")).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
            vec = rng.standard_normal(self.dim)
            self._char_cache[ch] = vec
        return vec

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        rows = np.zeros((len(texts), self.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            if not text:
                raise ValueError("cannot embed empty text")
            total = np.zeros(self.dim, dtype=np.float64)
            for ch in text:
                total += self._char_vector(ch)
            norm = float(np.linalg.norm(total))
            if norm == 0.0:
                # Character vectors can cancel in principle; nudge off zero
                # deterministically rather than fail the whole batch.
                total = self._char_vector(text[0]).copy()
                norm = float(np.linalg.norm(total))
            rows[i] = total / norm
        return rows


def embed_in_batches(
    texts: Sequence[str],
    backend: EmbedBackend,
    batch_size: int = 32,
    workers: int = 4,
) -> np.ndarray:
    """Embed ``texts`` in parallel batches, preserving input order."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if not texts:
        raise ValueError("no texts to embed")
    batches = [texts[i : i + batch_size] for i in range(0, len(texts), batch_size)]
    if len(batches) == 1 or workers <= 1:
        parts = [backend.embed(batch) for batch in batches]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(backend.embed, batches))
    return np.vstack(parts)


def index_corpus(
    corpus: Corpus,
    backend: EmbedBackend,
    batch_size: int = 32,
    workers: int = 4,
) -> VectorIndex:
    """Embed and index every retrievable document in ``corpus``.

    Background documents are context for prompts only; they are never
    indexed, so retrieval can never surface them.
    """
    docs = [d for d in corpus.docs if d.origin != DocOrigin.BACKGROUND]
    if not docs:
        raise DataError("corpus has no retrievable documents")
    vectors = embed_in_batches(
        [d.text for d in docs], backend, batch_size=batch_size, workers=workers
    )
    return VectorIndex([d.doc_id for d in docs], vectors)


def load_embed_vectors(path) -> dict:
    """Read a saved index back as a plain ``{doc_id: vector}`` mapping."""
    index = load_index(path)
    return {doc_id: index.vector_for(doc_id) for doc_id in index.doc_ids}


@dataclass(frozen=True)
class Retriever:
    """Corpus + index + embedder, bundled for context lookup."""

    corpus: Corpus
    index: VectorIndex
    backend: EmbedBackend

    def context_for(self, text: str, k: int) -> list:
        """Texts of the top-k documents for ``text``, best first."""
        query_vec = self.backend.embed([text])[0]
        hits = self.index.search(query_vec, k)
        return [self.corpus.text_of(hit.doc_id) for hit in hits]
