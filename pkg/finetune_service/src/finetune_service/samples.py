"""Reader for the retriever training-sample file.

One JSON object per line with fields ``query`` (string), ``pos`` and
``neg`` (lists of strings).  The producer may prepend a metadata line
whose only key is ``_header``; it is skipped.  Samples with an empty
positive list cannot contribute to the contrastive objective and are
skipped with a warning; anything structurally wrong is rejected with its
line number.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .errors import SampleFormatError

log = logging.getLogger("finetune_service")


@dataclass(frozen=True)
class TrainingSample:
    query: str
    positives: tuple[str, ...]
    negatives: tuple[str, ...]


def _string_list(value, name: str) -> tuple[str, ...]:
    if not isinstance(value, list) or not all(
        isinstance(t, str) and t for t in value
    ):
        raise ValueError(f"{name} must be a list of non-empty strings")
    return tuple(value)


def _parse_record(record) -> TrainingSample:
    if not isinstance(record, dict):
        raise ValueError("sample line must be a JSON object")
    missing = {"query", "pos", "neg"} - set(record)
    if missing:
        raise ValueError(f"missing fields: {', '.join(sorted(missing))}")
    query = record["query"]
    if not isinstance(query, str) or not query:
        raise ValueError("query must be a non-empty string")
    return TrainingSample(
        query=query,
        positives=_string_list(record["pos"], "pos"),
        negatives=_string_list(record["neg"], "neg"),
    )


def read_samples(path: str | Path) -> list[TrainingSample]:
    """Load every usable sample, preserving file order."""
    path = Path(path)
    samples: list[TrainingSample] = []
    skipped = 0
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SampleFormatError(f"{path}: line {lineno}: {exc}") from exc
            if lineno == 1 and isinstance(record, dict) and "_header" in record:
                continue
            try:
                sample = _parse_record(record)
            except ValueError as exc:
                raise SampleFormatError(f"{path}: line {lineno}: {exc}") from exc
            if not sample.positives:
                log.warning(
                    "%s: line %d: sample has no positives, skipping", path, lineno
                )
                skipped += 1
                continue
            samples.append(sample)
    if skipped:
        log.warning("%s: skipped %d sample(s) without positives", path, skipped)
    return samples
