"""Multi-turn length reflection.

A correction attempt is only accepted when its length satisfies the
task's constraint: equal length for spelling, no longer than the source
for splitting, and within the candidate min/max range for n-best fusion.
When the constraint is violated, a length report is rendered and fed
back to the model for another round, up to a fixed limit; the last
attempt is returned unconditionally once the limit is reached.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .chars import length_of
from .errors import BackendError
from .llm import ChatBackend, chat
from .prompts import render_reflection_prompt
from .tasks import CorrectionTask, TaskKind
from . import prompts as _prompts


def _report_template(name: str) -> str:
    return _prompts._read_asset(f"report_{name}.txt")


@dataclass(frozen=True)
class LengthReport:
    satisfied: bool
    report_text: str
    input_lengths: tuple[int, ...]
    output_length: int


@dataclass(frozen=True)
class ReflectionRound:
    prompt: str
    output: str
    report: LengthReport  # the report that triggered this round


@dataclass(frozen=True)
class ReflectionTrace:
    rounds: tuple[ReflectionRound, ...]
    rounds_used: int
    final: str
    satisfied: bool
    error: str | None = None


def input_lengths_of(task: CorrectionTask) -> tuple[int, ...]:
    if task.kind is TaskKind.NBEST:
        assert task.candidates is not None
        return tuple(length_of(c) for c in task.candidates)
    assert task.x is not None
    return (length_of(task.x),)


def length_satisfied(task: CorrectionTask, y: str) -> bool:
    """Task-specific length constraint on a candidate output ``y``."""
    ly = length_of(y)
    lengths = input_lengths_of(task)
    if task.kind is TaskKind.SPELLING:
        return ly == lengths[0]
    if task.kind is TaskKind.SPLITTING:
        return ly <= lengths[0]
    return min(lengths) <= ly <= max(lengths)


def render_length_report(task: CorrectionTask, y: str) -> LengthReport:
    """Length report handed back to the model when the constraint fails."""
    lengths = input_lengths_of(task)
    ly = length_of(y)
    ok = length_satisfied(task, y)
    if ok:
        text = _report_template("satisfied")
    else:
        values = {
            "Lx": lengths[0],
            "Ly": ly,
            "Lmin": min(lengths),
            "Lmax": max(lengths),
        }
        text = _report_template(task.kind.value).format(**values)
    return LengthReport(satisfied=ok, report_text=text, input_lengths=lengths, output_length=ly)


def mlr(
    task: CorrectionTask,
    y0: str,
    m: int,
    llm: ChatBackend,
    *,
    context: Sequence[str] = (),
    backoff_base: float | None = None,
) -> ReflectionTrace:
    """Refine ``y0`` until its length satisfies the task, up to ``m`` rounds.

    Returns as soon as an attempt satisfies the constraint (zero rounds
    when ``y0`` already does).  After ``m`` unsatisfying rounds the m-th
    attempt is returned as-is.  A backend failure mid-loop ends the trace
    with the last good attempt and an error note.
    """
    if m < 1:
        raise ValueError("round limit must be >= 1")
    rounds: list[ReflectionRound] = []
    y = y0
    for i in range(m):
        report = render_length_report(task, y)
        if report.satisfied:
            return ReflectionTrace(rounds=tuple(rounds), rounds_used=i, final=y, satisfied=True)
        prompt = render_reflection_prompt(task, y, report.report_text, context)
        try:
            y_next = chat(prompt, llm, backoff_base=backoff_base)
        except BackendError as exc:
            return ReflectionTrace(
                rounds=tuple(rounds), rounds_used=i, final=y, satisfied=False, error=str(exc)
            )
        rounds.append(ReflectionRound(prompt=prompt, output=y_next, report=report))
        y = y_next
    # limit reached: hand back the last attempt unconditionally
    return ReflectionTrace(
        rounds=tuple(rounds),
        rounds_used=m,
        final=y,
        satisfied=length_satisfied(task, y),
    )
