"""Reading and writing the ICO annotation dataset (CSV or JSON lines)."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from autometa.findings import (
    BinaryFinding,
    ContinuousFinding,
    Finding,
    OutcomeType,
)

BINARY_COLUMNS = BinaryFinding.FIELDS
CONTINUOUS_COLUMNS = ContinuousFinding.FIELDS
TEXT_COLUMNS = ("pmcid", "intervention", "comparator", "outcome", "outcome_type")
NUMERIC_COLUMNS = tuple(dict.fromkeys(BINARY_COLUMNS + CONTINUOUS_COLUMNS))
FLAG_COLUMN = "is_data_in_figure_or_table"
COLUMNS = ("record_id",) + TEXT_COLUMNS + NUMERIC_COLUMNS + (FLAG_COLUMN, "split")
REQUIRED_COLUMNS = TEXT_COLUMNS


class DatasetError(ValueError):
    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"field {column!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass(frozen=True)
class ICORecord:
    """One intervention/comparator/outcome question about one trial report."""

    record_id: str
    document_id: str
    intervention: str
    comparator: str
    outcome: str
    reference_type: OutcomeType = OutcomeType.UNKNOWN
    reference_binary: Optional[BinaryFinding] = None
    reference_continuous: Optional[ContinuousFinding] = None
    in_table_or_figure: bool = False
    split: str = ""
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.reference_type is OutcomeType.BINARY and (
            self.reference_binary is None or self.reference_continuous is not None
        ):
            raise ValueError(f"{self.record_id}: binary record needs exactly a binary reference")
        if self.reference_type is OutcomeType.CONTINUOUS and (
            self.reference_continuous is None or self.reference_binary is not None
        ):
            raise ValueError(f"{self.record_id}: continuous record needs exactly a continuous reference")

    @property
    def reference(self) -> Optional[Finding]:
        if self.reference_type is OutcomeType.BINARY:
            return self.reference_binary
        if self.reference_type is OutcomeType.CONTINUOUS:
            return self.reference_continuous
        return None

    @property
    def has_complete_reference(self) -> bool:
        ref = self.reference
        return ref is not None and ref.is_complete()


def _parse_flag(value, row: int) -> bool:
    text = str(value if value is not None else "").strip().lower()
    if text in ("true", "1", "yes", "y", "t"):
        return True
    if text in ("false", "0", "no", "n", "f", "", "x"):
        return False
    raise DatasetError(f"expected true/false, got {value!r}", row, FLAG_COLUMN)


def _record_from_row(data: dict, row: int, counters: dict[str, int]) -> ICORecord:
    for name in REQUIRED_COLUMNS:
        if data.get(name) is None:
            raise DatasetError("missing value", row, name)
    try:
        kind = OutcomeType.from_label(data["outcome_type"])
    except ValueError:
        raise DatasetError(f"unknown outcome type label {data['outcome_type']!r}", row, "outcome_type") from None

    binary = continuous = None
    for cls in (BinaryFinding, ContinuousFinding):
        if cls.outcome_type is not kind:
            continue
        for name in cls.FIELDS:
            try:
                cls.from_mapping({name: data.get(name)}, strict=True)
            except ValueError as exc:
                raise DatasetError(str(exc).split(": ", 1)[-1], row, name) from None
        finding = cls.from_mapping(data)
        if cls is BinaryFinding:
            binary = finding
        else:
            continuous = finding

    pmcid = str(data["pmcid"]).strip()
    record_id = str(data.get("record_id") or "").strip()
    if not record_id:
        counters[pmcid] = counters.get(pmcid, 0) + 1
        record_id = f"{pmcid}-{counters[pmcid]}"
    known = set(COLUMNS)
    return ICORecord(
        record_id=record_id,
        document_id=pmcid,
        intervention=str(data["intervention"]),
        comparator=str(data["comparator"]),
        outcome=str(data["outcome"]),
        reference_type=kind,
        reference_binary=binary,
        reference_continuous=continuous,
        in_table_or_figure=_parse_flag(data.get(FLAG_COLUMN), row),
        split=str(data.get("split") or "").strip(),
        extra={k: v for k, v in data.items() if k not in known and k is not None},
    )


def _is_jsonl(path: Path) -> bool:
    return path.suffix.lower() in (".jsonl", ".json", ".ndjson")


def _rows(path: Path) -> Iterable[tuple[int, dict]]:
    if _is_jsonl(path):
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    data = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DatasetError(f"invalid JSON: {exc.msg}", lineno) from None
                if not isinstance(data, dict):
                    raise DatasetError("expected a JSON object", lineno)
                yield lineno, data
        return
    with open(path, encoding="utf-8-sig", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in REQUIRED_COLUMNS if c not in (reader.fieldnames or [])]
        if reader.fieldnames and missing:
            raise DatasetError(f"missing columns {missing}", 1)
        for row in reader:
            # header is line 1
            lineno = reader.line_num
            if None in row:
                raise DatasetError("more cells than header columns", lineno)
            if any(v is None for v in row.values()):
                missing_cell = next(k for k, v in row.items() if v is None)
                raise DatasetError("row has fewer cells than the header", lineno, missing_cell)
            yield lineno, row


def load_annotations(path, split: str | None = None) -> list[ICORecord]:
    """Load annotation rows as :class:`ICORecord` objects.

    ``path`` may be a CSV/JSON-lines file or a directory holding
    ``<split>.csv``/``<split>.jsonl``. Blank and ``x`` numeric cells load as
    unknown. When ``split`` is given and the rows carry a ``split`` column,
    only matching rows are returned.
    """
    path = Path(path)
    if path.is_dir():
        if not split:
            raise DatasetError(f"{path} is a directory; a split name is required")
        candidates = [path / f"{split}{ext}" for ext in (".csv", ".jsonl", ".json")]
        found = [c for c in candidates if c.exists()]
        if not found:
            raise DatasetError(f"no dataset file for split {split!r} in {path}")
        path = found[0]
    if not path.exists():
        raise DatasetError(f"dataset file not found: {path}")
    counters: dict[str, int] = {}
    records = []
    for lineno, data in _rows(path):
        record = _record_from_row(data, lineno, counters)
        if split and record.split and record.split != split:
            continue
        records.append(record)
    ids = [r.record_id for r in records]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise DatasetError(f"duplicate record ids {dupes}")
    return records


def record_to_row(record: ICORecord) -> dict[str, str]:
    row = {
        "record_id": record.record_id,
        "pmcid": record.document_id,
        "intervention": record.intervention,
        "comparator": record.comparator,
        "outcome": record.outcome,
        "outcome_type": record.reference_type.value,
    }
    for name in NUMERIC_COLUMNS:
        row[name] = ""
    if record.reference is not None:
        row.update(record.reference.as_dict())
    row[FLAG_COLUMN] = "true" if record.in_table_or_figure else "false"
    row["split"] = record.split
    return row


def dump_annotations(records: Iterable[ICORecord], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [record_to_row(r) for r in records]
    if _is_jsonl(path):
        with open(path, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
        return
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(COLUMNS), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")
