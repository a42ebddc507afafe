"""XML compaction and XML -> markdown conversion for trial report sections."""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET

# Removed by preprocess_xml. Anything not listed here is kept, including
# structural table attributes such as colspan/rowspan.
PRESENTATIONAL_ATTRIBUTES = frozenset(
    {
        "style",
        "class",
        "align",
        "valign",
        "width",
        "height",
        "border",
        "cellpadding",
        "cellspacing",
        "frame",
        "rules",
        "bgcolor",
        "color",
        "face",
        "size",
        "char",
        "charoff",
        "orientation",
        "position",
        "hspace",
        "vspace",
        "nowrap",
    }
)

# Attributes in these namespaces are rendering hints (XSL-FO, legacy Office).
PRESENTATIONAL_NAMESPACES = (
    "http://www.w3.org/1999/XSL/Format",
    "urn:schemas-microsoft-com:office:office",
)

for _prefix, _uri in {
    "xlink": "http://www.w3.org/1999/xlink",
    "mml": "http://www.w3.org/1998/Math/MathML",
    "ali": "http://www.niso.org/schemas/ali/1.0/",
    "xsi": "http://www.w3.org/2001/XMLSchema-instance",
}.items():
    ET.register_namespace(_prefix, _uri)


class XMLParseError(ValueError):
    """Malformed XML. ``position`` is a (line, column) pair when known."""

    def __init__(self, message: str, position: tuple[int, int] | None = None, source: str | None = None):
        self.position = position
        self.source = source
        where = f" at line {position[0]}, column {position[1]}" if position else ""
        prefix = f"{source}: " if source else ""
        super().__init__(f"{prefix}{message}{where}")


def parse_xml(raw_xml: str, source: str | None = None) -> ET.Element:
    try:
        return ET.fromstring(raw_xml)
    except ET.ParseError as exc:
        raise XMLParseError(str(exc).split(":")[0], getattr(exc, "position", None), source) from None


def _local(tag) -> str:
    if not isinstance(tag, str):
        return ""
    return tag.rsplit("}", 1)[-1]


def _is_presentational(name: str) -> bool:
    if name.startswith("{"):
        return name[1:].split("}", 1)[0] in PRESENTATIONAL_NAMESPACES
    return name.lower() in PRESENTATIONAL_ATTRIBUTES


def _blank(text: str | None) -> bool:
    return text is None or text.strip() == ""


def _compact(elem: ET.Element) -> None:
    for name in [n for n in elem.attrib if _is_presentational(n)]:
        del elem.attrib[name]
    children = list(elem)
    # Whitespace is only insignificant when the element holds no character
    # data of its own; mixed content keeps its spaces.
    mixed = not _blank(elem.text) or any(not _blank(c.tail) for c in children)
    if not mixed:
        if children:
            elem.text = None
        for child in children:
            child.tail = None
    for child in children:
        _compact(child)


def preprocess_xml(raw_xml: str) -> str:
    """Minify XML and strip presentational attributes.

    >>> preprocess_xml('<p   style="x">5 mg</p>')
    '<p>5 mg</p>'
    """
    root = parse_xml(raw_xml)
    _compact(root)
    return ET.tostring(root, encoding="unicode", short_empty_elements=True)


# ---------------------------------------------------------------------------
# markdown
# ---------------------------------------------------------------------------

SECTION_TAGS = {"sec", "abstract", "trans-abstract", "app"}
BLOCK_TAGS = SECTION_TAGS | {
    "article",
    "front",
    "body",
    "back",
    "article-meta",
    "title",
    "article-title",
    "p",
    "table-wrap",
    "table-wrap-foot",
    "table",
    "fig",
    "list",
    "list-item",
    "caption",
    "disp-quote",
    "boxed-text",
    "fn",
    "fn-group",
    "statement",
    "def-list",
    "def-item",
    "ref-list",
    "ref",
    "supplementary-material",
}
_WS = re.compile(r"\s+")


def _inline(elem: ET.Element) -> str:
    """Flatten an element to one line of text."""
    pieces: list[str] = []

    def add(text: str | None) -> None:
        if not text:
            return
        # keep adjacent numbers from different nodes apart
        if pieces and pieces[-1][-1:].isdigit() and text[:1].isdigit():
            pieces.append(" ")
        pieces.append(text)

    def walk(node: ET.Element) -> None:
        tag = _local(node.tag)
        if tag == "sup":
            add("^")
        elif tag == "sub":
            add("~")
        add(node.text)
        for child in node:
            walk(child)
            add(child.tail)
        if tag == "sup":
            add("^")
        elif tag == "sub":
            add("~")

    walk(elem)
    return _WS.sub(" ", "".join(pieces)).strip()


def _has_block(elem: ET.Element) -> bool:
    return any(_local(d.tag) in BLOCK_TAGS for d in elem.iter() if d is not elem)


def _cell(elem: ET.Element) -> str:
    return _inline(elem).replace("|", "\\|")


def _table(elem: ET.Element) -> str:
    head: list[list[str]] = []
    body: list[list[str]] = []

    def row(tr: ET.Element) -> list[str]:
        return [_cell(c) for c in tr if _local(c.tag) in ("td", "th")]

    for part in elem:
        tag = _local(part.tag)
        if tag == "tr":
            body.append(row(part))
        elif tag in ("thead", "tbody", "tfoot"):
            target = head if tag == "thead" else body
            target.extend(row(tr) for tr in part if _local(tr.tag) == "tr")
    header = head[0] if head else []
    body = head[1:] + body
    width = max([len(r) for r in body] + [len(header), 1])
    header = header + [""] * (width - len(header))
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * width]
    for cells in body:
        cells = cells + [""] * (width - len(cells))
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines)


def _heading_depth(ancestors: list[str]) -> int:
    return max(1, sum(1 for tag in ancestors if tag in SECTION_TAGS))


def _blocks(elem: ET.Element, ancestors: list[str], out: list[str]) -> None:
    tag = _local(elem.tag)
    if tag in ("title", "article-title"):
        text = _inline(elem)
        if text:
            out.append("#" * _heading_depth(ancestors) + " " + text)
        return
    if tag == "table":
        out.append(_table(elem))
        return
    if tag in ("caption", "label") or (tag not in BLOCK_TAGS and not _has_block(elem)):
        text = _inline(elem)
        if text:
            out.append(text)
        return
    if tag == "p" and not _has_block(elem):
        text = _inline(elem)
        if text:
            out.append(text)
        return
    if tag == "list-item":
        sub: list[str] = []
        if not _blank(elem.text):
            sub.append(_WS.sub(" ", elem.text).strip())
        for child in elem:
            _blocks(child, ancestors + [tag], sub)
            if not _blank(child.tail):
                sub.append(_WS.sub(" ", child.tail).strip())
        if sub:
            out.append("- " + " ".join(s.replace("\n", " ") for s in sub))
        return

    if not _blank(elem.text):
        out.append(_WS.sub(" ", elem.text).strip())
    children = list(elem)
    i = 0
    while i < len(children):
        child = children[i]
        nxt = children[i + 1] if i + 1 < len(children) else None
        if (
            _local(child.tag) == "label"
            and _blank(child.tail)
            and nxt is not None
            and _local(nxt.tag) in ("title", "caption")
        ):
            label = _inline(child)
            if _local(nxt.tag) == "title":
                out.append("#" * _heading_depth(ancestors + [tag]) + " " + (label + " " + _inline(nxt)).strip())
            else:
                text = (label + ": " + _inline(nxt)).strip(": ")
                if text:
                    out.append(text)
            consumed = [nxt]
            i += 2
        else:
            _blocks(child, ancestors + [tag], out)
            consumed = [child]
            i += 1
        for node in consumed:
            if not _blank(node.tail):
                out.append(_WS.sub(" ", node.tail).strip())


def xml_to_markdown(compact_xml: str) -> str:
    """Render section XML as markdown.

    Section titles become ATX headings with one ``#`` per enclosing section,
    tables become pipe tables, everything else becomes plain paragraphs.
    ``<sup>``/``<sub>`` are written as ``^..^``/``~..~``.
    """
    root = parse_xml(compact_xml)
    out: list[str] = []
    _blocks(root, [], out)
    return "\n\n".join(block for block in out if block)


def split_sections(raw_xml: str, source: str | None = None) -> tuple[str, str]:
    """Pull the abstract and results sections out of a full-text article.

    Returns ``(abstract_xml, results_xml)``. A document with neither is
    treated as a results section in its entirety.
    """
    root = parse_xml(raw_xml, source)
    abstracts = [e for e in root.iter() if _local(e.tag) == "abstract"]
    results = []
    for sec in root.iter():
        if _local(sec.tag) != "sec":
            continue
        kind = (sec.get("sec-type") or "").lower()
        title = next((c for c in sec if _local(c.tag) == "title"), None)
        title_text = _inline(title).lower() if title is not None else ""
        if "result" in kind or title_text.startswith("result") or re.match(r"^\d*\.?\s*results?\b", title_text):
            if not any(sec in list(r.iter()) for r in results):
                results.append(sec)
    if not abstracts and not results:
        return "", raw_xml
    for elem in abstracts[:1] + results:
        elem.tail = None
    abstract_xml = ET.tostring(abstracts[0], encoding="unicode") if abstracts else ""
    if len(results) > 1:
        wrapper = ET.Element("body")
        wrapper.extend(results)
        results_xml = ET.tostring(wrapper, encoding="unicode")
    else:
        results_xml = ET.tostring(results[0], encoding="unicode") if results else ""
    return abstract_xml, results_xml
