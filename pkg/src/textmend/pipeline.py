"""Correction orchestration: direct, retrieval-augmented, and adaptive.

The adaptive path runs one method (retrieval-augmented when a training
corpus exists, direct otherwise), retrying the full refinement loop up to
a bounded number of attempts; once the budget is exhausted it switches to
the alternative method exactly once and returns whatever that produces.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .errors import BackendError, DataError
from .fileio import read_jsonl, write_jsonl
from .llm import ChatBackend, chat
from .prompts import render_prompt
from .reflection import ReflectionTrace, mlr
from .retrieval import Retriever
from .tasks import CorrectionTask, TaskKind


class Method(str, Enum):
    RETRIEVAL = "retrieval"
    DIRECT = "direct"


@dataclass(frozen=True)
class PipelineConfig:
    retrieve_top_k: int = 5
    mlr_rounds: int = 4
    adse_limit: int = 4
    nbest_top: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("retrieve_top_k", "mlr_rounds", "adse_limit", "nbest_top"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")


@dataclass(frozen=True)
class CorrectionResult:
    id: str
    output: str
    method: Method
    rounds_used: int
    switched: bool
    satisfied: bool
    counter: int
    traces: tuple
    error: str | None = None


# A context source is a Retriever, a per-id mapping of background texts,
# or a plain sequence of texts applied to every task.
def _context_for(task: CorrectionTask, source, k: int) -> tuple:
    if source is None:
        return ()
    if isinstance(source, Retriever):
        return tuple(source.context_for(task.query_text, k))
    if isinstance(source, Mapping):
        return tuple(source.get(task.id, ()))
    return tuple(source)


def _capped(task: CorrectionTask, cfg: PipelineConfig) -> CorrectionTask:
    if task.kind is TaskKind.NBEST:
        return task.top_candidates(cfg.nbest_top)
    return task


def _attempt(
    task: CorrectionTask,
    llm: ChatBackend,
    cfg: PipelineConfig,
    context: tuple,
    backoff_base: float | None,
) -> ReflectionTrace:
    """One full correction attempt: first-round prompt, then refinement."""
    prompt = render_prompt(task, context)
    try:
        y0 = chat(prompt, llm, backoff_base=backoff_base)
    except BackendError as exc:
        return ReflectionTrace(
            rounds=(), rounds_used=0, final="", satisfied=False, error=str(exc)
        )
    return mlr(task, y0, cfg.mlr_rounds, llm, context=context, backoff_base=backoff_base)


def _result_from(
    task: CorrectionTask,
    trace: ReflectionTrace,
    method: Method,
    switched: bool,
    counter: int,
    traces: Sequence[ReflectionTrace],
    error: str | None = None,
) -> CorrectionResult:
    return CorrectionResult(
        id=task.id,
        output=trace.final,
        method=method,
        rounds_used=trace.rounds_used,
        switched=switched,
        satisfied=trace.satisfied,
        counter=counter,
        traces=tuple(traces),
        error=error if error is not None else trace.error,
    )


def correct_direct(
    task: CorrectionTask,
    llm: ChatBackend,
    cfg: PipelineConfig | None = None,
    *,
    backoff_base: float | None = None,
) -> CorrectionResult:
    """Base-prompt correction with length refinement; no retrieval."""
    cfg = cfg or PipelineConfig()
    task = _capped(task, cfg)
    trace = _attempt(task, llm, cfg, (), backoff_base)
    return _result_from(task, trace, Method.DIRECT, False, 0, (trace,))


def correct_with_retrieval(
    task: CorrectionTask,
    llm: ChatBackend,
    context_source,
    cfg: PipelineConfig | None = None,
    *,
    backoff_base: float | None = None,
) -> CorrectionResult:
    """Context-augmented correction.

    ``context_source`` is a Retriever (training-set mode), a mapping of
    task id to background texts (no-training-set mode), or a plain list of
    texts.  An empty context degrades gracefully to the direct prompt.
    """
    cfg = cfg or PipelineConfig()
    task = _capped(task, cfg)
    context = _context_for(task, context_source, cfg.retrieve_top_k)
    trace = _attempt(task, llm, cfg, context, backoff_base)
    return _result_from(task, trace, Method.RETRIEVAL, False, 0, (trace,))


def adaptive_correct(
    task: CorrectionTask,
    llm: ChatBackend,
    context_source,
    cfg: PipelineConfig | None = None,
    *,
    llm_alternative: ChatBackend | None = None,
    backoff_base: float | None = None,
) -> CorrectionResult:
    """Adaptive selection between retrieval-augmented and direct correction.

    The first method is retrieval-augmented when the task has a training
    set behind it, direct otherwise.  Each failed full attempt (refinement
    included) bumps a counter; at the attempt limit the pipeline switches
    to the alternative method exactly once, resets the counter, and
    returns the alternative's result unconditionally.
    """
    cfg = cfg or PipelineConfig()
    task = _capped(task, cfg)
    first = Method.RETRIEVAL if task.has_training_set else Method.DIRECT
    second = Method.DIRECT if first is Method.RETRIEVAL else Method.RETRIEVAL
    second_llm = llm_alternative if llm_alternative is not None else llm

    def run(method: Method, backend: ChatBackend) -> ReflectionTrace:
        context = (
            _context_for(task, context_source, cfg.retrieve_top_k)
            if method is Method.RETRIEVAL
            else ()
        )
        return _attempt(task, backend, cfg, context, backoff_base)

    traces: list = []
    counter = 0
    first_error: str | None = None
    while counter < cfg.adse_limit:
        trace = run(first, llm)
        traces.append(trace)
        if trace.satisfied:
            return _result_from(task, trace, first, False, counter, traces)
        counter += 1
        if trace.error is not None:
            # A dead backend cannot satisfy on retry; go straight to the
            # alternative instead of burning the remaining attempts.
            first_error = trace.error
            break

    counter = 0
    trace = run(second, second_llm)
    traces.append(trace)
    error = trace.error
    if first_error is not None and trace.error is not None:
        error = f"first method: {first_error}; second method: {trace.error}"
    return _result_from(task, trace, second, True, counter, traces, error=error)


def correct_batch(
    tasks: Sequence[CorrectionTask],
    backend_for: Callable[[CorrectionTask], ChatBackend],
    cfg: PipelineConfig | None = None,
    *,
    context_source=None,
    mode: str = "adaptive",
    backend_alternative_for: Callable[[CorrectionTask], ChatBackend] | None = None,
    workers: int = 4,
    backoff_base: float | None = None,
) -> list:
    """Correct a dataset concurrently; results come back in input order.

    ``backend_for`` builds (or returns) the chat backend for one task —
    handing every task its own scripted backend keeps batch output
    independent of worker scheduling.  Failures land in the result's
    ``error`` field; the batch never aborts.
    """
    cfg = cfg or PipelineConfig()
    if mode not in ("adaptive", "direct", "retrieval"):
        raise ValueError(f"unknown mode {mode!r}")

    def run_one(task: CorrectionTask) -> CorrectionResult:
        llm = backend_for(task)
        if mode == "direct":
            return correct_direct(task, llm, cfg, backoff_base=backoff_base)
        if mode == "retrieval":
            return correct_with_retrieval(
                task, llm, context_source, cfg, backoff_base=backoff_base
            )
        alt = backend_alternative_for(task) if backend_alternative_for else None
        return adaptive_correct(
            task,
            llm,
            context_source,
            cfg,
            llm_alternative=alt,
            backoff_base=backoff_base,
        )

    if not tasks:
        return []
    if workers <= 1 or len(tasks) == 1:
        return [run_one(task) for task in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_one, tasks))


def save_predictions(
    results: Sequence[CorrectionResult],
    path: str | Path,
    header: dict | None = None,
) -> None:
    records = (
        {
            "id": r.id,
            "output": r.output,
            "method": r.method.value,
            "rounds_used": r.rounds_used,
            "switched": r.switched,
        }
        for r in results
    )
    write_jsonl(path, records, header=header)


def load_predictions(path: str | Path) -> list:
    """Prediction records as dicts, validated for required fields."""
    _, records = read_jsonl(path)
    required = ("id", "output", "method", "rounds_used", "switched")
    for i, rec in enumerate(records):
        missing = [key for key in required if key not in rec]
        if missing:
            raise DataError(f"{path}: record {i + 1} missing {', '.join(missing)}")
    return records
