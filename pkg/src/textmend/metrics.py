"""Evaluation metrics: edit distance, CER/CERR, sentence-level P/R/F1,
length accuracy, and reflection-round histograms.

All text measures operate on Unicode scalar values after NFC
normalization, matching how lengths are counted everywhere else.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .chars import length_of, nfc
from .errors import DataError
from .tasks import TaskKind


@dataclass(frozen=True)
class EvalItem:
    """One scored item: what went in, what came out, what should have."""

    id: str
    source: str | tuple  # candidate tuple for N-best items
    hypothesis: str
    reference: str

    @property
    def source_text(self) -> str:
        if isinstance(self.source, str):
            return self.source
        return self.source[0] if self.source else ""


@dataclass(frozen=True)
class PRFReport:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class CERReport:
    total_edits: int
    total_ref_chars: int
    cer: float
    macro: bool = False


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance over code points, unit costs."""
    a = nfc(a)
    b = nfc(b)
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost)
            )
        previous = current
    return previous[-1]


def cer(items: Sequence[EvalItem], macro: bool = False) -> CERReport:
    """Character error rate over a set of items.

    Default pools edit counts and reference lengths across the whole set;
    ``macro=True`` averages per-item ratios instead.
    """
    if not items:
        raise ValueError("cer needs at least one item")
    total_edits = 0
    total_chars = 0
    ratios = []
    for item in items:
        ref_len = length_of(item.reference)
        if ref_len == 0:
            raise DataError(f"item {item.id}: empty reference")
        d = edit_distance(item.hypothesis, item.reference)
        total_edits += d
        total_chars += ref_len
        ratios.append(d / ref_len)
    value = sum(ratios) / len(ratios) if macro else total_edits / total_chars
    return CERReport(
        total_edits=total_edits, total_ref_chars=total_chars, cer=value, macro=macro
    )


def cerr(cer_baseline: float, cer_improved: float) -> float:
    """Relative CER reduction versus a baseline; positive = improvement."""
    if cer_baseline <= 0:
        raise ValueError("baseline CER must be positive")
    return (cer_baseline - cer_improved) / cer_baseline


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def sentence_prf(items: Sequence[EvalItem]) -> PRFReport:
    """Sentence-level precision/recall/F1 under exact-match scoring.

    An item is a predicted positive when the hypothesis changed the
    source, a condition positive when the reference differs from the
    source, and a true positive when the changed hypothesis exactly
    matches the reference.
    """
    tp = fp = fn = 0
    for item in items:
        src = nfc(item.source_text)
        hyp = nfc(item.hypothesis)
        ref = nfc(item.reference)
        predicted = hyp != src
        condition = ref != src
        if predicted and hyp == ref:
            tp += 1
        elif predicted:
            fp += 1
        if condition and not (predicted and hyp == ref):
            fn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return PRFReport(
        precision=precision,
        recall=recall,
        f1=f1_score(precision, recall),
        tp=tp,
        fp=fp,
        fn=fn,
    )


def length_satisfies(task: TaskKind, source, hypothesis: str) -> bool:
    """Length constraint check usable on bare eval records."""
    ly = length_of(hypothesis)
    if task is TaskKind.SPELLING:
        return ly == length_of(source)
    if task is TaskKind.SPLITTING:
        return ly <= length_of(source)
    lengths = [length_of(c) for c in (source if not isinstance(source, str) else (source,))]
    return min(lengths) <= ly <= max(lengths)


def length_accuracy(items: Sequence[EvalItem], task: TaskKind = TaskKind.SPELLING) -> int:
    """Count items whose hypothesis satisfies the task's length rule
    (plain equal-length count for spelling)."""
    return sum(
        1 for item in items if length_satisfies(task, item.source, item.hypothesis)
    )


def round_histogram(results: Sequence, max_rounds: int) -> list:
    """Bucket counts of reflection rounds 1..max_rounds.

    Only results that needed reflection and ended up satisfying the
    length rule are counted; never-reflected and exhausted-unsatisfied
    results fall outside every bucket.  Accepts anything exposing
    ``rounds_used`` and ``satisfied``.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    buckets = [0] * max_rounds
    for result in results:
        rounds = result.rounds_used
        if result.satisfied and 1 <= rounds <= max_rounds:
            buckets[rounds - 1] += 1
    return buckets
