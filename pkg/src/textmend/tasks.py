"""Task kinds and the input records the correction engine operates on."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .chars import length_of
from .errors import DataError
from .fileio import read_jsonl, write_jsonl


class TaskKind(str, Enum):
    SPELLING = "spelling"    # equal-length character substitution
    SPLITTING = "splitting"  # merge split characters, output may shrink
    NBEST = "nbest"          # fuse recognizer candidates into one sentence

    @classmethod
    def parse(cls, value: str) -> "TaskKind":
        try:
            return cls(value.lower())
        except ValueError:
            raise DataError(f"unknown task kind: {value!r}") from None


@dataclass(frozen=True)
class SentencePair:
    """One (possibly erroneous) source sentence with its reference target."""

    id: str
    source: str
    target: str
    task: TaskKind

    def __post_init__(self) -> None:
        if self.task is TaskKind.NBEST:
            raise DataError(f"pair {self.id}: candidate-list inputs use NBestGroup")
        if self.task is TaskKind.SPELLING and length_of(self.source) != length_of(self.target):
            raise DataError(
                f"pair {self.id}: source and target must be the same length "
                f"({length_of(self.source)} vs {length_of(self.target)})"
            )
        if self.task is TaskKind.SPLITTING and length_of(self.target) > length_of(self.source):
            raise DataError(f"pair {self.id}: target may not be longer than the source")


@dataclass(frozen=True)
class NBestGroup:
    """Ordered recognizer candidates (rank 1 first) plus the reference."""

    id: str
    candidates: tuple[str, ...]
    target: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if not self.candidates:
            raise DataError(f"group {self.id}: candidate list is empty")


@dataclass(frozen=True)
class CorrectionTask:
    """One unit of correction work: a sentence or a candidate list."""

    id: str
    kind: TaskKind
    x: str | None = None
    candidates: tuple[str, ...] | None = None
    has_training_set: bool = True
    reference: str | None = None

    def __post_init__(self) -> None:
        if self.kind is TaskKind.NBEST:
            if self.candidates is None or self.x is not None:
                raise DataError(f"task {self.id}: n-best tasks carry candidates only")
            object.__setattr__(self, "candidates", tuple(self.candidates))
            if not self.candidates:
                raise DataError(f"task {self.id}: candidate list is empty")
        else:
            if self.x is None or self.candidates is not None:
                raise DataError(f"task {self.id}: sentence tasks carry x only")

    @property
    def query_text(self) -> str:
        """Sentence used for retrieval: x, or the rank-1 candidate."""
        if self.x is not None:
            return self.x
        assert self.candidates is not None
        return self.candidates[0]

    def top_candidates(self, n: int) -> "CorrectionTask":
        """Restrict an n-best task to its first ``n`` candidates."""
        if self.kind is not TaskKind.NBEST or self.candidates is None:
            return self
        return replace(self, candidates=self.candidates[:n])


def pair_from_record(rec: dict) -> SentencePair:
    try:
        return SentencePair(
            id=str(rec["id"]),
            source=rec["source"],
            target=rec["target"],
            task=TaskKind.parse(rec["task"]),
        )
    except KeyError as exc:
        raise DataError(f"pair record missing field {exc}") from exc


def group_from_record(rec: dict) -> NBestGroup:
    try:
        return NBestGroup(id=str(rec["id"]), candidates=tuple(rec["candidates"]), target=rec["target"])
    except KeyError as exc:
        raise DataError(f"n-best record missing field {exc}") from exc


def load_pairs(path: str | Path) -> list[SentencePair]:
    _, records = read_jsonl(path)
    pairs = [pair_from_record(rec) for rec in records]
    _check_unique_ids(pairs, path)
    return pairs


def load_nbest(path: str | Path) -> list[NBestGroup]:
    _, records = read_jsonl(path)
    groups = [group_from_record(rec) for rec in records]
    _check_unique_ids(groups, path)
    return groups


def save_pairs(pairs: Iterable[SentencePair], path: str | Path, header: dict | None = None) -> None:
    write_jsonl(
        path,
        ({"id": p.id, "source": p.source, "target": p.target, "task": p.task.value} for p in pairs),
        header=header,
    )


def save_nbest(groups: Iterable[NBestGroup], path: str | Path, header: dict | None = None) -> None:
    write_jsonl(
        path,
        ({"id": g.id, "candidates": list(g.candidates), "target": g.target} for g in groups),
        header=header,
    )


def tasks_from_pairs(pairs: Sequence[SentencePair], has_training_set: bool = True) -> list[CorrectionTask]:
    return [
        CorrectionTask(id=p.id, kind=p.task, x=p.source,
                       has_training_set=has_training_set, reference=p.target)
        for p in pairs
    ]


def tasks_from_nbest(groups: Sequence[NBestGroup], has_training_set: bool = True) -> list[CorrectionTask]:
    return [
        CorrectionTask(id=g.id, kind=TaskKind.NBEST, candidates=g.candidates,
                       has_training_set=has_training_set, reference=g.target)
        for g in groups
    ]


def load_tasks(path: str | Path, kind: TaskKind, has_training_set: bool = True) -> list[CorrectionTask]:
    if kind is TaskKind.NBEST:
        return tasks_from_nbest(load_nbest(path), has_training_set)
    return tasks_from_pairs(load_pairs(path), has_training_set)


def _check_unique_ids(items: Sequence, path: str | Path) -> None:
    seen: set[str] = set()
    for item in items:
        if item.id in seen:
            raise DataError(f"{path}: duplicate id {item.id!r}")
        seen.add(item.id)
