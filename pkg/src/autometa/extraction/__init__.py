"""Zero-shot outcome-type inference and numerical extraction."""

from autometa.extraction.client import (
    ChatClient,
    CompletionClient,
    ModelConfig,
    ReplayClient,
    ResponseCache,
    prompt_hash,
)
from autometa.extraction.parsing import (
    ParsedFinding,
    ParsedType,
    find_conflicts,
    merge_chunk_findings,
    parse_finding,
    parse_outcome_type,
    serialize_finding,
)
from autometa.extraction.pipeline import (
    ExtractionTrace,
    OutcomeExtractor,
    chunk_token_limit,
    chunks_for,
    infer_outcome_type,
    run_record,
)
from autometa.extraction.prompts import PROMPT_VERSION, Task, render_prompt

__all__ = [
    "ChatClient",
    "CompletionClient",
    "ExtractionTrace",
    "ModelConfig",
    "OutcomeExtractor",
    "PROMPT_VERSION",
    "ParsedFinding",
    "ParsedType",
    "ReplayClient",
    "ResponseCache",
    "Task",
    "chunk_token_limit",
    "chunks_for",
    "find_conflicts",
    "infer_outcome_type",
    "merge_chunk_findings",
    "parse_finding",
    "parse_outcome_type",
    "prompt_hash",
    "render_prompt",
    "run_record",
    "serialize_finding",
]
