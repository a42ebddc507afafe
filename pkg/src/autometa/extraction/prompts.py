"""Prompt templates for the three zero-shot tasks.

Templates live next to this module as plain text files so that a change to a
prompt shows up as a reviewable diff. Bump ``PROMPT_VERSION`` whenever one
changes; cached responses are keyed on the rendered prompt, so old cache
entries simply stop matching.
"""

from __future__ import annotations

import enum
from functools import lru_cache
from importlib import resources
from typing import Optional

from autometa.corpus.dataset import ICORecord
from autometa.corpus.text import Chunk
from autometa.exceptions import ContractViolation
from autometa.findings import OutcomeType

PROMPT_VERSION = "1"


class Task(str, enum.Enum):
    INFER_TYPE = "infer_type"
    EXTRACT_BINARY = "extract_binary"
    EXTRACT_CONTINUOUS = "extract_continuous"

    @classmethod
    def for_outcome(cls, outcome_type: OutcomeType) -> "Task":
        if outcome_type is OutcomeType.BINARY:
            return cls.EXTRACT_BINARY
        if outcome_type is OutcomeType.CONTINUOUS:
            return cls.EXTRACT_CONTINUOUS
        raise ContractViolation(f"no extraction task for outcome type {outcome_type!r}")


@lru_cache(maxsize=None)
def load_template(task: Task) -> str:
    return resources.files("autometa.extraction").joinpath("templates", f"{Task(task).value}.txt").read_text(encoding="utf-8")


def render_prompt(task: Task, ico: ICORecord, chunk: Optional[Chunk] = None) -> str:
    task = Task(task)
    if task is Task.INFER_TYPE:
        if chunk is not None:
            raise ContractViolation("outcome type inference does not take document text")
        return load_template(task).format(outcome=ico.outcome)
    if chunk is None:
        raise ContractViolation(f"{task.value} needs a document chunk")
    return load_template(task).format(
        chunk=chunk.text,
        intervention=ico.intervention,
        comparator=ico.comparator,
        outcome=ico.outcome,
    )
