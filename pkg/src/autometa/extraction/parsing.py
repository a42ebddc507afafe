"""Total parsers for model output.

Nothing in here raises on model text. Anything that cannot be read degrades
to the unknown token, with ``format_error`` set when the whole answer was
unusable.
"""

from __future__ import annotations

import re
from typing import NamedTuple, Optional

import yaml

from autometa.exceptions import ContractViolation
from autometa.findings import Finding, OutcomeType, finding_class


class ParsedType(NamedTuple):
    outcome_type: OutcomeType
    format_error: bool = False


class ParsedFinding(NamedTuple):
    finding: Finding
    format_error: bool = False


_TYPE_WORDS = {
    "binary": OutcomeType.BINARY,
    "continuous": OutcomeType.CONTINUOUS,
    "x": OutcomeType.UNKNOWN,
}
_TRIM = " \t\r\n\"'`.*"


def parse_outcome_type(model_text: str) -> ParsedType:
    """Read a one-word ``binary``/``continuous``/``x`` answer."""
    word = str(model_text or "").strip(_TRIM).lower()
    if word in _TYPE_WORDS:
        return ParsedType(_TYPE_WORDS[word], False)
    return ParsedType(OutcomeType.UNKNOWN, True)


_FENCE = re.compile(r"```[ \t]*(?:ya?ml)?[ \t]*\r?\n(.*?)(?:```|\Z)", re.DOTALL | re.IGNORECASE)
_KEY_VALUE = re.compile(r"^\s*[-*]?\s*([A-Za-z][A-Za-z _]*?)\s*:\s*(.*?)\s*$")


def _normalize_key(key) -> str:
    return re.sub(r"[\s-]+", "_", str(key).strip().lower())


def _yaml_mapping(text: str) -> Optional[dict]:
    # BaseLoader keeps every scalar as text, so decimals survive unrounded
    # and "010" is not read as octal.
    try:
        data = yaml.load(text, Loader=yaml.BaseLoader)
    except Exception:
        return None
    if isinstance(data, list) and len(data) == 1 and isinstance(data[0], dict):
        data = data[0]
    if not isinstance(data, dict):
        return None
    return {_normalize_key(k): v for k, v in data.items()}


def _line_mapping(text: str) -> dict:
    found = {}
    for line in text.splitlines():
        m = _KEY_VALUE.match(line)
        if m:
            value = m.group(2).split("#", 1)[0].strip().strip("\"'")
            found.setdefault(_normalize_key(m.group(1)), value)
    return found


def extract_mapping(model_text: str) -> dict:
    """Best-effort key/value view of a YAML-ish answer."""
    text = str(model_text or "")
    candidates = [m.group(1) for m in _FENCE.finditer(text)] + [text]
    for candidate in candidates:
        mapping = _yaml_mapping(candidate)
        if mapping:
            return mapping
    for candidate in candidates:
        mapping = _line_mapping(candidate)
        if mapping:
            return mapping
    return {}


def parse_finding(model_text: str, outcome_type: OutcomeType) -> ParsedFinding:
    """Read the extraction YAML for ``outcome_type``.

    Missing keys and values that are not numbers become unknown. When none of
    the expected keys can be found the whole finding is unknown and flagged.
    """
    cls = finding_class(outcome_type)
    mapping = extract_mapping(model_text)
    if not any(name in mapping for name in cls.FIELDS):
        return ParsedFinding(cls.unknown(), True)
    return ParsedFinding(cls.from_mapping(mapping), False)


def serialize_finding(finding: Finding) -> str:
    return finding.to_yaml()


def merge_chunk_findings(findings: list[Finding]) -> Finding:
    """Field-wise union across chunks; the earliest known value wins."""
    cls = _common_class(findings)
    merged = {}
    for name in cls.FIELDS:
        merged[name] = next((getattr(f, name) for f in findings if getattr(f, name) is not None), None)
    return cls(**merged)


def find_conflicts(findings: list[Finding]) -> list[dict]:
    """Fields where a later chunk reported a different known value than the kept one."""
    cls = _common_class(findings)
    conflicts = []
    for name in cls.FIELDS:
        kept = None
        for index, finding in enumerate(findings):
            value = getattr(finding, name)
            if value is None:
                continue
            if kept is None:
                kept = (index, value)
            elif value != kept[1]:
                conflicts.append(
                    {"field": name, "kept": str(kept[1]), "kept_chunk": kept[0], "other": str(value), "chunk": index}
                )
    return conflicts


def _common_class(findings: list[Finding]) -> type:
    if not findings:
        raise ContractViolation("nothing to merge")
    classes = {type(f) for f in findings}
    if len(classes) != 1:
        raise ContractViolation(f"cannot merge findings of different shapes: {sorted(c.__name__ for c in classes)}")
    return classes.pop()
