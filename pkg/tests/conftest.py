from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import pytest

from _synth import MODEL, build_replay_cache, make_records, unknown_responder, write_corpus
from autometa.corpus import ICORecord, TrialDocument, load_documents
from autometa.extraction import ModelConfig


@dataclass
class Corpus:
    records: list[ICORecord]
    dataset: Path
    xml_dir: Path
    documents: dict[str, TrialDocument]
    config: ModelConfig
    echo_cache: Path
    unknown_cache: Path


@pytest.fixture(scope="session")
def dev_corpus(tmp_path_factory) -> Corpus:
    root = tmp_path_factory.mktemp("dev")
    records = make_records()
    dataset, xml_dir = write_corpus(root, records)
    documents = load_documents(xml_dir)
    config = ModelConfig(MODEL)
    build_replay_cache(root / "echo", records, documents, config)
    build_replay_cache(root / "unknown", records, documents, config, responder=unknown_responder)
    return Corpus(records, dataset, xml_dir, documents, config, root / "echo", root / "unknown")


@pytest.fixture
def api_key(monkeypatch):
    monkeypatch.setenv("AUTOMETA_TEST_KEY", "sk-test")
    return "AUTOMETA_TEST_KEY"


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
