from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from autometa.corpus.text import Tokenizer, count_tokens
from autometa.corpus.xml import preprocess_xml, split_sections, xml_to_markdown


@dataclass(frozen=True)
class TrialDocument:
    id: str
    abstract_xml: str = ""
    results_xml: str = ""
    markdown: str = ""
    token_count: int = 0


def build_document(doc_id: str, abstract_xml: str = "", results_xml: str = "", tokenizer: Tokenizer | None = None) -> TrialDocument:
    """Compact both sections and render them as one markdown text."""
    parts = []
    compact = []
    for section in (abstract_xml, results_xml):
        if section.strip():
            xml = preprocess_xml(section)
            compact.append(xml)
            parts.append(xml_to_markdown(xml))
        else:
            compact.append("")
    markdown = "\n\n".join(p for p in parts if p)
    return TrialDocument(doc_id, compact[0], compact[1], markdown, count_tokens(markdown, tokenizer))


def document_from_xml_file(path, tokenizer: Tokenizer | None = None) -> TrialDocument:
    path = Path(path)
    abstract, results = split_sections(path.read_text(encoding="utf-8"), source=str(path))
    return build_document(path.stem, abstract, results, tokenizer)


def load_documents(directory, tokenizer: Tokenizer | None = None) -> dict[str, TrialDocument]:
    """Read ``<id>.md`` and ``<id>.xml`` files; markdown wins when both exist."""
    directory = Path(directory)
    docs: dict[str, TrialDocument] = {}
    for path in sorted(directory.glob("*.xml")):
        docs[path.stem] = document_from_xml_file(path, tokenizer)
    for path in sorted(directory.glob("*.md")):
        text = path.read_text(encoding="utf-8")
        docs[path.stem] = TrialDocument(path.stem, markdown=text, token_count=count_tokens(text, tokenizer))
    return docs
