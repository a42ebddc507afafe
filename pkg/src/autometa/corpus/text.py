"""Token counting, number normalization and token-budget chunking."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Protocol


class Tokenizer(Protocol):
    def count(self, text: str) -> int: ...

    def split(self, text: str, limit: int) -> list[str]:
        """Cut ``text`` into consecutive pieces of at most ``limit`` tokens."""
        ...


class RegexTokenizer:
    """Offline stand-in for a BPE tokenizer.

    A token is a run of at most 4 letters, a run of at most 3 digits, or a
    single non-space symbol. On English prose this lands within a few percent
    of the common byte-pair vocabularies, and it is fully deterministic.
    """

    pattern = re.compile(r"[^\W\d_]{1,4}|\d{1,3}|[^\s]", re.UNICODE)

    def count(self, text: str) -> int:
        return sum(1 for _ in self.pattern.finditer(text))

    def split(self, text: str, limit: int) -> list[str]:
        if limit <= 0:
            raise ValueError("limit must be positive")
        spans = [m.span() for m in self.pattern.finditer(text)]
        pieces = []
        for i in range(0, len(spans), limit):
            group = spans[i : i + limit]
            pieces.append(text[group[0][0] : group[-1][1]])
        return pieces


class TiktokenTokenizer:
    """Adapter for OpenAI's ``tiktoken`` encodings (optional dependency)."""

    def __init__(self, encoding: str = "cl100k_base"):
        import tiktoken

        self._enc = tiktoken.get_encoding(encoding)

    def count(self, text: str) -> int:
        return len(self._enc.encode(text, disallowed_special=()))

    def split(self, text: str, limit: int) -> list[str]:
        ids = self._enc.encode(text, disallowed_special=())
        return [self._enc.decode(ids[i : i + limit]) for i in range(0, len(ids), limit)]


DEFAULT_TOKENIZER = RegexTokenizer()


def get_tokenizer(name: str | None = None) -> Tokenizer:
    if name in (None, "", "regex"):
        return DEFAULT_TOKENIZER
    if name.startswith("tiktoken"):
        _, _, encoding = name.partition(":")
        return TiktokenTokenizer(encoding or "cl100k_base")
    raise ValueError(f"unknown tokenizer {name!r}")


def count_tokens(text: str, tokenizer: Tokenizer | None = None) -> int:
    return (tokenizer or DEFAULT_TOKENIZER).count(text)


# ---------------------------------------------------------------------------
# number words
# ---------------------------------------------------------------------------

_UNITS = {
    "zero": 0, "one": 1, "two": 2, "three": 3, "four": 4, "five": 5, "six": 6,
    "seven": 7, "eight": 8, "nine": 9, "ten": 10, "eleven": 11, "twelve": 12,
    "thirteen": 13, "fourteen": 14, "fifteen": 15, "sixteen": 16,
    "seventeen": 17, "eighteen": 18, "nineteen": 19,
}
_TENS = {
    "twenty": 20, "thirty": 30, "forty": 40, "fifty": 50,
    "sixty": 60, "seventy": 70, "eighty": 80, "ninety": 90,
}
_SMALL = {**_UNITS, **_TENS}

_unit_re = "|".join(sorted(_UNITS, key=len, reverse=True))
_tens_re = "|".join(_TENS)
_under_100 = rf"(?:(?:{_tens_re})(?:[- ](?:{'|'.join(k for k, v in _UNITS.items() if 0 < v < 10)}))?|(?:{_unit_re}))"
_NUMBER_WORDS = re.compile(
    rf"(?<![\w-])(?:(?:(?:a|one|{'|'.join(k for k, v in _UNITS.items() if 1 < v < 10)})\s+)?hundred(?:\s+(?:and\s+)?{_under_100})?|{_under_100})(?![\w-])",
    re.IGNORECASE,
)
_DOUBLE_HYPHEN = re.compile(r"-{2,}(?=\d)")


def _word_value(phrase: str) -> int:
    words = re.split(r"[\s-]+", phrase.lower())
    total = 0
    current = 0
    for word in words:
        if word == "and":
            continue
        if word == "hundred":
            total += (current or 1) * 100
            current = 0
        elif word == "a":
            current = 1
        else:
            current += _SMALL[word]
    return total + current


def normalize_numbers(text: str) -> str:
    """Rewrite cardinal number words as digits and ``--5`` as ``-5``.

    Ordinals and hyphenated modifiers such as "one-way" are left alone.

    >>> normalize_numbers("twenty-one of one hundred patients, change --5.2")
    '21 of 100 patients, change -5.2'
    """
    text = _NUMBER_WORDS.sub(lambda m: str(_word_value(m.group(0))), text)
    return _DOUBLE_HYPHEN.sub("-", text)


# ---------------------------------------------------------------------------
# chunking
# ---------------------------------------------------------------------------

_SENTENCE_END = re.compile(r"(?<=[.!?])\s+(?=[A-Z0-9(\[])")
_DIGIT = re.compile(r"\d")


@dataclass(frozen=True)
class Chunk:
    document_id: str
    index: int
    text: str
    token_count: int
    hard_split: bool = False


def segment_markdown(markdown: str) -> list[str]:
    """Split markdown into sentences, with each table row kept whole."""
    segments: list[str] = []
    for line in markdown.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("|"):
            segments.append(line)
            continue
        segments.extend(s.strip() for s in _SENTENCE_END.split(line) if s.strip())
    return segments


def chunk_document(
    markdown: str,
    token_limit: int,
    document_id: str = "",
    tokenizer: Tokenizer | None = None,
    normalize: bool = True,
) -> list[Chunk]:
    """Greedily pack the digit-bearing segments of a document into chunks.

    Segments without any digit are dropped. A segment longer than the limit
    on its own is cut at token boundaries into chunks marked ``hard_split``.
    """
    if token_limit <= 0:
        raise ValueError("token_limit must be positive")
    tok = tokenizer or DEFAULT_TOKENIZER
    if normalize:
        markdown = normalize_numbers(markdown)
    segments = [s for s in segment_markdown(markdown) if _DIGIT.search(s)]

    packed: list[tuple[str, bool]] = []
    current: list[str] = []
    for segment in segments:
        if tok.count(segment) > token_limit:
            if current:
                packed.append(("\n".join(current), False))
                current = []
            packed.extend((piece, True) for piece in tok.split(segment, token_limit))
            continue
        if current and tok.count("\n".join(current + [segment])) > token_limit:
            packed.append(("\n".join(current), False))
            current = []
        current.append(segment)
    if current:
        packed.append(("\n".join(current), False))

    return [
        Chunk(document_id, i, text, tok.count(text), hard)
        for i, (text, hard) in enumerate(packed)
    ]
