"""Contrastive training data for the retriever, plus retrieval quality metrics.

A training sample pairs an erroneous source sentence with sentences that do
contain its corrected characters (positives) and sentences that are close in
embedding space but contain none of them (hard negatives).  The loss here is
the standard temperature-scaled contrastive objective, implemented as a pure
function so any trainer can be checked against it.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .chars import nfc
from .errors import DataError
from .corpus import Corpus
from .fileio import read_jsonl, write_jsonl
from .retrieval import EmbedBackend, VectorIndex, cosine
from .tasks import SentencePair, TaskKind


@dataclass(frozen=True)
class ErrorChar:
    """A single character substitution between source and target."""

    position: int  # 0-based index into the target
    wrong: str
    correct: str

    def __post_init__(self) -> None:
        if self.wrong == self.correct:
            raise ValueError("error char must actually differ")


def extract_error_chars(pair: SentencePair) -> list[ErrorChar]:
    """Positional character diffs for an equal-length spelling pair."""
    if pair.task is not TaskKind.SPELLING:
        raise DataError(f"pair {pair.id}: error chars are defined for spelling pairs only")
    src = nfc(pair.source)
    tgt = nfc(pair.target)
    if len(src) != len(tgt):
        raise DataError(f"pair {pair.id}: source/target lengths differ")
    return [
        ErrorChar(position=i, wrong=s, correct=t)
        for i, (s, t) in enumerate(zip(src, tgt))
        if s != t
    ]


def corrected_chars(pair: SentencePair) -> list[str]:
    """Distinct corrected characters in position order."""
    seen = []
    for err in extract_error_chars(pair):
        if err.correct not in seen:
            seen.append(err.correct)
    return seen


@dataclass(frozen=True)
class RetrieverTrainingSample:
    query: str
    positives: tuple[str, ...]
    negatives: tuple[str, ...]
    # Set when the corpus could not supply n_neg admissible negatives.
    underfilled: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        if not self.positives:
            raise ValueError("training sample needs at least one positive")
        if self.query in self.positives or self.query in self.negatives:
            raise ValueError("query must not appear among its own samples")
        if set(self.positives) & set(self.negatives):
            raise ValueError("positives and negatives must be disjoint")


def build_training_sample(
    pair: SentencePair,
    corpus: Corpus,
    base_index: VectorIndex,
    embed: EmbedBackend,
    n_neg: int = 5,
    seed: int = 0,
) -> RetrieverTrainingSample:
    """Mine positives and hard negatives for one spelling pair.

    Positives are the target sentence plus, per distinct corrected
    character, the corpus sentence containing it that scores highest
    against the source under the base (untuned) index.  The query and the
    target are excluded from that per-character pool — the target contains
    every corrected character and would otherwise absorb all slots.

    Negatives are the best-scoring index hits that contain none of the
    corrected characters, padded with seeded random picks from the rest of
    the corpus under the same no-corrected-character filter.  When the
    corpus cannot supply ``n_neg`` admissible sentences the sample comes
    back short with ``underfilled`` set.
    """
    if n_neg < 0:
        raise ValueError("n_neg must be >= 0")
    chars = corrected_chars(pair)
    if not chars:
        raise DataError(f"pair {pair.id}: no corrected characters to mine from")
    query = nfc(pair.source)
    target = nfc(pair.target)

    query_vec = embed.embed([query])[0]
    ranked = base_index.search(query_vec, k=max(1, len(base_index)))
    texts = {hit.doc_id: nfc(corpus.text_of(hit.doc_id)) for hit in ranked}

    positives = [target]
    for ch in chars:
        for hit in ranked:  # descending score, stable ties
            text = texts[hit.doc_id]
            if text in (query, target) or text in positives:
                continue
            if ch in text:
                positives.append(text)
                break

    banned = set(chars)
    def admissible(text: str) -> bool:
        return (
            text != query
            and text not in positives
            and not any(ch in text for ch in banned)
        )

    negatives: list[str] = []
    for hit in ranked[: 2 * n_neg]:
        text = texts[hit.doc_id]
        if len(negatives) >= n_neg:
            break
        if admissible(text) and text not in negatives:
            negatives.append(text)

    underfilled = False
    if len(negatives) < n_neg:
        pool = sorted(
            {t for t in texts.values() if admissible(t) and t not in negatives}
        )
        rng = random.Random(seed)
        rng.shuffle(pool)
        negatives.extend(pool[: n_neg - len(negatives)])
        if len(negatives) < n_neg:
            underfilled = True

    return RetrieverTrainingSample(
        query=query,
        positives=tuple(positives),
        negatives=tuple(negatives),
        underfilled=underfilled,
    )


def build_training_samples(
    pairs: Sequence[SentencePair],
    corpus: Corpus,
    base_index: VectorIndex,
    embed: EmbedBackend,
    n_neg: int = 5,
    seed: int = 0,
) -> list[RetrieverTrainingSample]:
    """Mine a sample per pair, skipping pairs with nothing corrected."""
    samples = []
    for pair in pairs:
        if not extract_error_chars(pair):
            continue
        samples.append(
            build_training_sample(pair, corpus, base_index, embed, n_neg=n_neg, seed=seed)
        )
    return samples


def contrastive_loss_from_sims(
    pos_sims: Sequence[float], neg_sims: Sequence[float], tau: float = 0.2
) -> float:
    """Temperature-scaled contrastive loss on precomputed similarities.

    Each positive is scored against the pool of all negatives:

        L = -(1/m) sum_i log( e^(p_i/tau) / (e^(p_i/tau) + sum_j e^(n_j/tau)) )

    computed in log space for stability.  With no negatives every term's
    denominator equals its numerator, so the loss is exactly 0.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    if not pos_sims:
        raise ValueError("at least one positive similarity required")
    if not neg_sims:
        return 0.0
    neg = np.asarray(neg_sims, dtype=np.float64) / tau
    total = 0.0
    for p in pos_sims:
        # -log sigmoid form: log(1 + sum_j exp(n_j - p)) in scaled units
        shifted = neg - (p / tau)
        m = float(np.max(shifted))
        lse = m + float(np.log(np.sum(np.exp(shifted - m))))
        total += float(np.logaddexp(0.0, lse))
    return total / len(pos_sims)


def contrastive_loss(
    query_vec: np.ndarray,
    pos_vecs: Sequence[np.ndarray],
    neg_vecs: Sequence[np.ndarray],
    tau: float = 0.2,
) -> float:
    """Contrastive loss over raw vectors, with cosine as the similarity."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    if not len(pos_vecs):
        raise ValueError("at least one positive vector required")
    pos = [cosine(query_vec, v) for v in pos_vecs]
    neg = [cosine(query_vec, v) for v in neg_vecs]
    return contrastive_loss_from_sims(pos, neg, tau=tau)


def hit_at_k(
    pairs: Sequence[SentencePair],
    corpus: Corpus,
    index: VectorIndex,
    embed: EmbedBackend,
    k: int = 5,
) -> tuple[int, int]:
    """Count corrected characters found within each source's top-k hits.

    Returns ``(hits, total_errors)``; pairs without errors contribute to
    neither count.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    hits = 0
    total = 0
    for pair in pairs:
        errs = extract_error_chars(pair)
        if not errs:
            continue
        total += len(errs)
        query_vec = embed.embed([nfc(pair.source)])[0]
        retrieved = [nfc(corpus.text_of(h.doc_id)) for h in index.search(query_vec, k)]
        for err in errs:
            if any(err.correct in text for text in retrieved):
                hits += 1
    return hits, total


def mrr(
    queries: Sequence[tuple[str, Callable[[str], bool]]],
    corpus: Corpus,
    index: VectorIndex,
    embed: EmbedBackend,
    k: int = 5,
) -> float:
    """Mean reciprocal rank of the first relevant hit within top-k.

    Each query carries its own relevance predicate over document text; a
    query with no relevant hit in the top-k contributes 0.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not queries:
        raise ValueError("mrr needs at least one query")
    total = 0.0
    for source, relevant in queries:
        query_vec = embed.embed([nfc(source)])[0]
        for hit in index.search(query_vec, k):
            if relevant(nfc(corpus.text_of(hit.doc_id))):
                total += 1.0 / hit.rank
                break
    return total / len(queries)


def mrr_for_pairs(
    pairs: Sequence[SentencePair],
    corpus: Corpus,
    index: VectorIndex,
    embed: EmbedBackend,
    k: int = 5,
) -> float:
    """MRR over spelling pairs; a doc is relevant when it contains any of
    the pair's corrected characters.  Pairs with nothing corrected are
    skipped (they have no relevant documents by definition)."""

    def predicate_for(chars: list[str]) -> Callable[[str], bool]:
        return lambda text: any(ch in text for ch in chars)

    queries = []
    for pair in pairs:
        chars = corrected_chars(pair)
        if chars:
            queries.append((pair.source, predicate_for(chars)))
    if not queries:
        raise DataError("no pairs with corrected characters to rank")
    return mrr(queries, corpus, index, embed, k=k)


def save_samples(
    samples: Sequence[RetrieverTrainingSample],
    path: str | Path,
    header: dict | None = None,
) -> None:
    records = (
        {"query": s.query, "pos": list(s.positives), "neg": list(s.negatives)}
        for s in samples
    )
    write_jsonl(path, records, header=header)


def load_samples(path: str | Path) -> list[RetrieverTrainingSample]:
    _, records = read_jsonl(path)
    samples = []
    for i, rec in enumerate(records):
        try:
            samples.append(
                RetrieverTrainingSample(
                    query=rec["query"],
                    positives=tuple(rec["pos"]),
                    negatives=tuple(rec["neg"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: bad sample record {i + 1}: {exc}") from exc
    return samples
