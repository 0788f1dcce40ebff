"""Prompt rendering: the three task prompts plus the retrieval context block.

Prompt bodies live as UTF-8 asset files, one per task kind, each holding
the literal placeholder ``<input_sentence>`` exactly once.  The Chinese
texts are the ones used at runtime.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Sequence

from .errors import ConfigError
from .tasks import CorrectionTask, TaskKind

PLACEHOLDER = "<input_sentence>"
NBEST_SEPARATOR = "｜"
CONTEXT_HEADER = "以下是一些可供参考的正确句子："
PREVIOUS_OUTPUT_LABEL = "上一轮的输出句："


@dataclass(frozen=True)
class PromptTemplate:
    task: TaskKind
    body: str

    def __post_init__(self) -> None:
        if self.body.count(PLACEHOLDER) != 1:
            raise ConfigError(
                f"template for {self.task.value} must contain {PLACEHOLDER} exactly once"
            )


_TEMPLATES: dict[TaskKind, PromptTemplate] = {}


def _read_asset(name: str) -> str:
    path = resources.files("textmend").joinpath("assets", name)
    try:
        return path.read_text(encoding="utf-8").rstrip("\n")
    except FileNotFoundError as exc:
        raise ConfigError(f"missing template asset: {name}") from exc


def get_template(task: TaskKind) -> PromptTemplate:
    if task not in _TEMPLATES:
        _TEMPLATES[task] = PromptTemplate(task=task, body=_read_asset(f"prompt_{task.value}.txt"))
    return _TEMPLATES[task]


def input_sentence_for(task: CorrectionTask) -> str:
    """What goes into the placeholder: x, or the candidates joined with ｜."""
    if task.kind is TaskKind.NBEST:
        assert task.candidates is not None
        return NBEST_SEPARATOR.join(task.candidates)
    assert task.x is not None
    return task.x


def render_prompt(task: CorrectionTask, context: Sequence[str] = ()) -> str:
    """Fill the task template; retrieved sentences, when present, are listed
    in rank order in a numbered block before the instruction."""
    template = get_template(task.kind)
    body = template.body.replace(PLACEHOLDER, input_sentence_for(task))
    if not context:
        return body
    lines = [CONTEXT_HEADER]
    lines.extend(f"{i}. {sentence}" for i, sentence in enumerate(context, 1))
    return "\n".join(lines) + "\n\n" + body


def render_reflection_prompt(
    task: CorrectionTask,
    previous_output: str,
    report_text: str,
    context: Sequence[str] = (),
) -> str:
    """Fresh single-turn prompt for one refinement round.

    The base prompt (with the original input and any retrieval context),
    the previous round's output, and the length report are joined by
    blank lines, so every round sees the full picture without carrying
    conversation state.
    """
    base = render_prompt(task, context)
    return f"{base}\n\n{PREVIOUS_OUTPUT_LABEL}{previous_output}\n\n{report_text}"
