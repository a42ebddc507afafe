"""Per-record orchestration: infer the outcome type, extract over chunks, merge."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from sklearn.base import BaseEstimator

from autometa.corpus.dataset import ICORecord
from autometa.corpus.documents import TrialDocument
from autometa.corpus.text import Chunk, Tokenizer, chunk_document, count_tokens, get_tokenizer
from autometa.exceptions import ConfigError, ContractViolation, TransportError
from autometa.extraction.client import CompletionClient, ModelConfig, prompt_hash
from autometa.extraction.parsing import (
    find_conflicts,
    merge_chunk_findings,
    parse_finding,
    parse_outcome_type,
)
from autometa.extraction.prompts import PROMPT_VERSION, Task, render_prompt
from autometa.findings import Finding, OutcomeType, finding_class, finding_from_dict


@dataclass
class ExtractionTrace:
    """Everything one record's extraction produced, raw and parsed.

    ``finding`` is None when extraction was skipped because the outcome type
    came back unknown; :meth:`finding_as` then yields an all-unknown finding.
    """

    record_id: str
    model_name: str = ""
    predicted_type: OutcomeType = OutcomeType.UNKNOWN
    type_source: str = "inferred"
    type_response: Optional[str] = None
    type_format_error: bool = False
    chunk_responses: list[str] = field(default_factory=list)
    chunk_findings: list[Finding] = field(default_factory=list)
    chunk_format_errors: list[bool] = field(default_factory=list)
    finding: Optional[Finding] = None
    conflicts: list[dict] = field(default_factory=list)
    calls: list[dict] = field(default_factory=list)
    prompt_version: str = PROMPT_VERSION

    @property
    def format_error_count(self) -> int:
        return sum(self.chunk_format_errors)

    @property
    def extraction_type(self) -> Optional[OutcomeType]:
        return type(self.finding).outcome_type if self.finding is not None else None

    def finding_as(self, outcome_type: OutcomeType) -> Finding:
        """The merged finding in the requested shape; unknown if shapes differ."""
        cls = finding_class(outcome_type)
        if isinstance(self.finding, cls):
            return self.finding
        return cls.unknown()

    def to_dict(self) -> dict:
        shape = self.extraction_type
        return {
            "record_id": self.record_id,
            "model_name": self.model_name,
            "prompt_version": self.prompt_version,
            "predicted_type": self.predicted_type.value,
            "type_source": self.type_source,
            "type_response": self.type_response,
            "type_format_error": self.type_format_error,
            "extraction_type": shape.value if shape else None,
            "chunk_responses": list(self.chunk_responses),
            "chunk_findings": [f.as_dict() for f in self.chunk_findings],
            "chunk_format_errors": list(self.chunk_format_errors),
            "format_error_count": self.format_error_count,
            "finding": self.finding.as_dict() if self.finding is not None else None,
            "conflicts": list(self.conflicts),
            "calls": list(self.calls),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_dict(cls, data: Mapping) -> "ExtractionTrace":
        shape = OutcomeType(data["extraction_type"]) if data.get("extraction_type") else None
        return cls(
            record_id=data["record_id"],
            model_name=data.get("model_name", ""),
            prompt_version=data.get("prompt_version", PROMPT_VERSION),
            predicted_type=OutcomeType(data.get("predicted_type", "x")),
            type_source=data.get("type_source", "inferred"),
            type_response=data.get("type_response"),
            type_format_error=bool(data.get("type_format_error", False)),
            chunk_responses=list(data.get("chunk_responses", [])),
            chunk_findings=[finding_from_dict(f, shape) for f in data.get("chunk_findings", [])] if shape else [],
            chunk_format_errors=[bool(x) for x in data.get("chunk_format_errors", [])],
            finding=finding_from_dict(data.get("finding"), shape) if shape else None,
            conflicts=list(data.get("conflicts", [])),
            calls=list(data.get("calls", [])),
        )

    @classmethod
    def from_json(cls, line: str) -> "ExtractionTrace":
        return cls.from_dict(json.loads(line))


def chunk_token_limit(config: ModelConfig, ico: ICORecord, tokenizer: Tokenizer | None = None) -> int:
    """Room left for document text once the prompt scaffold and output are reserved."""
    empty = Chunk(ico.document_id, 0, "", 0)
    scaffold = max(
        count_tokens(render_prompt(task, ico, empty), tokenizer)
        for task in (Task.EXTRACT_BINARY, Task.EXTRACT_CONTINUOUS)
    )
    limit = config.max_context_tokens - scaffold - config.output_reserve
    if limit <= 0:
        raise ConfigError(
            f"context of {config.max_context_tokens} tokens leaves no room for text "
            f"(scaffold {scaffold}, reserve {config.output_reserve})"
        )
    return limit


def _call(client: CompletionClient, task: Task, prompt: str, calls: list[dict]) -> str:
    calls.append({"task": task.value, "prompt_sha256": prompt_hash(client.model_name, prompt)})
    return client.complete(prompt)


def infer_outcome_type(client: CompletionClient, ico: ICORecord) -> tuple[str, OutcomeType, bool, dict]:
    prompt = render_prompt(Task.INFER_TYPE, ico)
    calls: list[dict] = []
    raw = _call(client, Task.INFER_TYPE, prompt, calls)
    parsed = parse_outcome_type(raw)
    return raw, parsed.outcome_type, parsed.format_error, calls[0]


def run_record(
    client: CompletionClient,
    config: Optional[ModelConfig],
    ico: ICORecord,
    chunks: list[Chunk],
    type_override: Optional[OutcomeType] = None,
) -> ExtractionTrace:
    """Run the stepwise extraction for one record.

    The outcome type is inferred from the outcome description alone unless
    ``type_override`` is given. An unknown type skips extraction.
    """
    if not chunks:
        raise ContractViolation(f"{ico.record_id}: no chunks to extract from")
    trace = ExtractionTrace(record_id=ico.record_id, model_name=client.model_name)
    try:
        if type_override is None:
            raw, kind, bad, call = infer_outcome_type(client, ico)
            trace.type_response = raw
            trace.type_format_error = bad
            trace.calls.append(call)
        else:
            kind = OutcomeType(type_override)
            trace.type_source = "override"
        trace.predicted_type = kind
        if kind is OutcomeType.UNKNOWN:
            return trace

        task = Task.for_outcome(kind)
        for chunk in chunks:
            raw = _call(client, task, render_prompt(task, ico, chunk), trace.calls)
            parsed = parse_finding(raw, kind)
            trace.chunk_responses.append(raw)
            trace.chunk_findings.append(parsed.finding)
            trace.chunk_format_errors.append(parsed.format_error)
    except TransportError as exc:
        exc.record_id = ico.record_id
        raise
    trace.finding = merge_chunk_findings(trace.chunk_findings)
    trace.conflicts = find_conflicts(trace.chunk_findings)
    return trace


def chunks_for(ico: ICORecord, document: TrialDocument, config: ModelConfig, tokenizer: Tokenizer | None = None) -> list[Chunk]:
    limit = chunk_token_limit(config, ico, tokenizer)
    chunks = chunk_document(document.markdown, limit, document.id, tokenizer)
    return chunks or [Chunk(document.id, 0, "", 0)]


class OutcomeExtractor(BaseEstimator):
    """Estimator-style wrapper around :func:`run_record`.

    ``predict`` takes ICO records plus a mapping of document id to
    :class:`TrialDocument` and returns one :class:`ExtractionTrace` per record,
    in input order.

    Parameters
    ----------
    client : object with ``model_name`` and ``complete(prompt) -> str``
    config : ModelConfig
    type_source : {"inferred", "reference"}
        ``"reference"`` still asks the model for the outcome type (so type
        inference can be scored) but extracts with the annotated type, which
        keeps the three tasks independent of each other.
    n_jobs : int
        Records processed concurrently.
    tokenizer : str
        Name understood by :func:`autometa.corpus.get_tokenizer`.
    """

    def __init__(self, client=None, config=None, type_source="inferred", n_jobs=4, tokenizer=None):
        self.client = client
        self.config = config
        self.type_source = type_source
        self.n_jobs = n_jobs
        self.tokenizer = tokenizer

    def fit(self, records=None, documents=None):
        if self.client is None or self.config is None:
            raise ConfigError("OutcomeExtractor needs both a client and a ModelConfig")
        if self.type_source not in ("inferred", "reference"):
            raise ConfigError(f"type_source must be 'inferred' or 'reference', not {self.type_source!r}")
        if int(self.n_jobs) < 1:
            raise ConfigError("n_jobs must be >= 1")
        self.tokenizer_ = get_tokenizer(self.tokenizer)
        return self

    def predict_one(self, ico: ICORecord, document: TrialDocument) -> ExtractionTrace:
        chunks = chunks_for(ico, document, self.config, self.tokenizer_)
        if self.type_source == "inferred":
            return run_record(self.client, self.config, ico, chunks)
        raw, kind, bad, call = infer_outcome_type(self.client, ico)
        if ico.reference_type is OutcomeType.UNKNOWN:
            trace = ExtractionTrace(record_id=ico.record_id, model_name=self.client.model_name)
        else:
            trace = run_record(self.client, self.config, ico, chunks, type_override=ico.reference_type)
        trace.type_source = "reference"
        trace.predicted_type = kind
        trace.type_response = raw
        trace.type_format_error = bad
        trace.calls.insert(0, call)
        return trace

    def predict(self, records: Iterable[ICORecord], documents: Mapping[str, TrialDocument]) -> list[ExtractionTrace]:
        if not hasattr(self, "tokenizer_"):
            self.fit()
        records = list(records)
        missing = sorted({r.document_id for r in records} - set(documents))
        if missing:
            raise ContractViolation(f"no document for ids {missing}")
        if int(self.n_jobs) == 1:
            return [self.predict_one(r, documents[r.document_id]) for r in records]
        with ThreadPoolExecutor(max_workers=int(self.n_jobs)) as pool:
            return list(pool.map(lambda r: self.predict_one(r, documents[r.document_id]), records))
