"""Retrieval corpus construction.

The corpus is assembled from three document sources: reference targets
taken from training pairs, LLM-expanded paragraphs around those targets
(split into sentences), and LLM explanations of domain terms.  When no
training data exists at all, a per-sentence background paragraph is
generated instead and attached to that sentence only, never to the
shared index.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .chars import nfc
from .errors import BackendError, DataError, ExpansionError
from .fileio import read_jsonl, write_jsonl
from .llm import ChatBackend, chat
from .tasks import SentencePair

log = logging.getLogger(__name__)

SENTENCE_DELIMITERS = "。！？\n"

TERM_EXPLANATION_PROMPT = "请你作为领域专家，用一段话详细解释下列术语的含义：{term}"
SENTENCE_EXPANSION_PROMPT = "请基于下列句子生成一段连贯的段落：{sentence}"
BACKGROUND_PROMPT = "请为下列句子撰写一段相关的背景描述，不要直接修改句子本身：{sentence}"


class DocOrigin(str, Enum):
    TRAIN_TARGET = "train"
    TRAIN_EXPANSION = "expansion"
    TERM_EXPLANATION = "term"
    BACKGROUND = "background"


@dataclass(frozen=True)
class CorpusDoc:
    doc_id: str
    text: str
    origin: DocOrigin
    meta: str | None = None

    def __post_init__(self) -> None:
        if not self.text:
            raise DataError(f"doc {self.doc_id}: empty text")


@dataclass(frozen=True)
class Corpus:
    """Deduplicated document collection with stable insertion order."""

    docs: tuple[CorpusDoc, ...]
    domain_tag: str = ""

    def __len__(self) -> int:
        return len(self.docs)

    def text_of(self, doc_id: str) -> str:
        return self._by_id()[doc_id]

    def _by_id(self) -> dict[str, str]:
        cached = getattr(self, "_id_map", None)
        if cached is None:
            cached = {d.doc_id: d.text for d in self.docs}
            object.__setattr__(self, "_id_map", cached)
        return cached


def split_sentences(paragraph: str) -> list[str]:
    """Split a paragraph on 。！？ and newline, delimiter kept on its sentence.

    Fragments that carry no content beyond delimiters and whitespace are
    dropped; a paragraph without any delimiter comes back whole.
    """
    fragments: list[str] = []
    buf: list[str] = []
    for ch in paragraph:
        buf.append(ch)
        if ch in SENTENCE_DELIMITERS:
            fragments.append("".join(buf))
            buf = []
    if buf:
        fragments.append("".join(buf))
    # fragments stay verbatim so joining them reconstructs the paragraph;
    # only pieces with no content beyond delimiters/whitespace are dropped
    return [frag for frag in fragments if frag.strip(SENTENCE_DELIMITERS).strip()]


def ingest_training_targets(pairs: Sequence[SentencePair]) -> list[CorpusDoc]:
    """One document per distinct target sentence, first occurrence kept."""
    docs: list[CorpusDoc] = []
    seen: set[str] = set()
    for pair in pairs:
        text = nfc(pair.target)
        if text in seen:
            continue
        seen.add(text)
        docs.append(CorpusDoc(doc_id=f"train-{len(docs)}", text=text, origin=DocOrigin.TRAIN_TARGET))
    return docs


def expand_term(term: str, llm: ChatBackend) -> CorpusDoc:
    """Ask the backend to explain one domain term; the reply is one document."""
    if not term:
        raise DataError("cannot expand an empty term")
    try:
        reply = chat(TERM_EXPLANATION_PROMPT.format(term=term), llm)
    except BackendError as exc:
        raise ExpansionError(f"term expansion failed for {term!r}: {exc}", term=term) from exc
    return CorpusDoc(doc_id=f"term-{term}", text=nfc(reply.strip()), origin=DocOrigin.TERM_EXPLANATION, meta=term)


def expand_sentence(sentence: str, llm: ChatBackend) -> list[CorpusDoc]:
    """Grow a paragraph around one sentence and split it back into sentences."""
    if not sentence:
        raise DataError("cannot expand an empty sentence")
    try:
        paragraph = chat(SENTENCE_EXPANSION_PROMPT.format(sentence=sentence), llm)
    except BackendError as exc:
        raise ExpansionError(f"sentence expansion failed: {exc}") from exc
    return [
        CorpusDoc(doc_id=f"exp-{i}", text=nfc(frag), origin=DocOrigin.TRAIN_EXPANSION)
        for i, frag in enumerate(split_sentences(paragraph))
    ]


def expand_terms(terms: Sequence[str], llm: ChatBackend, max_workers: int = 4) -> list[CorpusDoc]:
    """Expand terms concurrently; output order matches input order."""
    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        return list(pool.map(lambda t: expand_term(t, llm), terms))


def expand_sentences(sentences: Sequence[str], llm: ChatBackend, max_workers: int = 4) -> list[list[CorpusDoc]]:
    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        return list(pool.map(lambda s: expand_sentence(s, llm), sentences))


def generate_background(source: str, llm: ChatBackend, source_id: str | None = None) -> list[CorpusDoc]:
    """Generate a background paragraph for one test sentence.

    The paragraph is kept whole and keyed to its source; it never enters
    the shared index, so nothing generated for one sentence can leak into
    another sentence's retrieval context.  Backend failure degrades to an
    empty context instead of raising.
    """
    if not source:
        raise DataError("cannot generate background for an empty sentence")
    key = source_id if source_id is not None else source
    try:
        paragraph = chat(BACKGROUND_PROMPT.format(sentence=source), llm)
    except BackendError as exc:
        log.warning("background generation failed for %r: %s", key, exc)
        return []
    return [CorpusDoc(doc_id=f"bg-{key}", text=nfc(paragraph.strip()), origin=DocOrigin.BACKGROUND, meta=key)]


def build_corpus(
    train_docs: Sequence[CorpusDoc],
    expansion_docs: Sequence[CorpusDoc] = (),
    term_docs: Sequence[CorpusDoc] = (),
    domain_tag: str = "",
) -> Corpus:
    """Union of the three document sources.

    Concatenation order is train, expansion, term; exact-text duplicates
    (after NFC) keep their first occurrence; ids are reassigned
    sequentially so the corpus is reproducible from its inputs.
    """
    merged: list[CorpusDoc] = []
    seen: set[str] = set()
    for doc in [*train_docs, *expansion_docs, *term_docs]:
        text = nfc(doc.text)
        if text in seen:
            continue
        seen.add(text)
        merged.append(CorpusDoc(doc_id=f"d{len(merged):06d}", text=text, origin=doc.origin, meta=doc.meta))
    return Corpus(docs=tuple(merged), domain_tag=domain_tag)


def partition_by_origin(corpus: Corpus) -> tuple[list[CorpusDoc], list[CorpusDoc], list[CorpusDoc]]:
    train = [d for d in corpus.docs if d.origin is DocOrigin.TRAIN_TARGET]
    expansion = [d for d in corpus.docs if d.origin is DocOrigin.TRAIN_EXPANSION]
    term = [d for d in corpus.docs if d.origin is DocOrigin.TERM_EXPLANATION]
    return train, expansion, term


def save_corpus(corpus: Corpus, path: str | Path, header: dict | None = None) -> None:
    records = (
        {"doc_id": d.doc_id, "text": d.text, "origin": d.origin.value, "meta": d.meta}
        for d in corpus.docs
    )
    write_jsonl(path, records, header=header)


def load_corpus(path: str | Path) -> Corpus:
    header, records = read_jsonl(path)
    docs = []
    for rec in records:
        try:
            docs.append(
                CorpusDoc(
                    doc_id=str(rec["doc_id"]),
                    text=rec["text"],
                    origin=DocOrigin(rec["origin"]),
                    meta=rec.get("meta"),
                )
            )
        except (KeyError, ValueError) as exc:
            raise DataError(f"{path}: bad corpus record {rec!r} ({exc})") from exc
    tag = (header or {}).get("domain_tag", "")
    return Corpus(docs=tuple(docs), domain_tag=tag)


def load_terms(path: str | Path) -> list[str]:
    """Term list file: one term per line, blanks skipped."""
    terms = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            term = line.strip()
            if term:
                terms.append(term)
    return terms


def background_map(docs: Iterable[CorpusDoc]) -> dict[str, list[str]]:
    """Group background docs by the source id they were generated for."""
    mapping: dict[str, list[str]] = {}
    for doc in docs:
        if doc.origin is not DocOrigin.BACKGROUND:
            continue
        mapping.setdefault(doc.meta or "", []).append(doc.text)
    return mapping
