"""Trial report loading, XML cleanup, markdown conversion and chunking."""

from autometa.corpus.dataset import (
    DatasetError,
    ICORecord,
    dump_annotations,
    load_annotations,
)
from autometa.corpus.documents import (
    TrialDocument,
    build_document,
    document_from_xml_file,
    load_documents,
)
from autometa.corpus.text import (
    Chunk,
    RegexTokenizer,
    Tokenizer,
    chunk_document,
    count_tokens,
    get_tokenizer,
    normalize_numbers,
    segment_markdown,
)
from autometa.corpus.xml import XMLParseError, preprocess_xml, split_sections, xml_to_markdown

__all__ = [
    "Chunk",
    "DatasetError",
    "ICORecord",
    "RegexTokenizer",
    "Tokenizer",
    "TrialDocument",
    "XMLParseError",
    "build_document",
    "chunk_document",
    "count_tokens",
    "document_from_xml_file",
    "dump_annotations",
    "get_tokenizer",
    "load_annotations",
    "load_documents",
    "normalize_numbers",
    "segment_markdown",
    "preprocess_xml",
    "split_sections",
    "xml_to_markdown",
]
