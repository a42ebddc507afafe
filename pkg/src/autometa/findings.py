"""Raw numerical findings attached to an intervention/comparator/outcome triplet.

A numeric cell is a ``Decimal`` when known and ``None`` when unknown. The
unknown state is written as the token ``x`` in every external format.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from typing import ClassVar, Mapping, Optional, Union

UNKNOWN_TOKEN = "x"

MaybeNumber = Optional[Decimal]


class OutcomeType(str, enum.Enum):
    BINARY = "binary"
    CONTINUOUS = "continuous"
    UNKNOWN = "x"

    @classmethod
    def from_label(cls, label: str) -> "OutcomeType":
        text = str(label).strip().lower()
        if text in ("binary", "dichotomous"):
            return cls.BINARY
        if text == "continuous":
            return cls.CONTINUOUS
        if text in ("x", "unknown", ""):
            return cls.UNKNOWN
        raise ValueError(f"unknown outcome type label {label!r}")


def parse_number(value) -> MaybeNumber:
    """Coerce a cell to a finite Decimal, or None for unknown/garbage."""
    if value is None or isinstance(value, bool):
        return None
    if isinstance(value, Decimal):
        return value if value.is_finite() else None
    if isinstance(value, int):
        return Decimal(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            return None
        return Decimal(repr(value))
    text = str(value).strip().replace(",", "")
    if text.lower() in ("", UNKNOWN_TOKEN, "unknown", "nan", "none", "null", "n/a", "na"):
        return None
    if text.startswith("--") and text[2:3].isdigit():
        text = "-" + text[2:]
    try:
        number = Decimal(text)
    except InvalidOperation:
        return None
    return number if number.is_finite() else None


def format_number(value: MaybeNumber) -> str:
    """Canonical text for a cell: trailing zeros stripped, never exponent form."""
    if value is None:
        return UNKNOWN_TOKEN
    text = format(value.normalize(), "f")
    return "0" if text in ("-0", "0") else text


def _is_count(value: MaybeNumber) -> bool:
    return value is not None and value >= 0 and value == value.to_integral_value()


@dataclass(frozen=True)
class _Finding:
    FIELDS: ClassVar[tuple[str, ...]] = ()
    COUNT_FIELDS: ClassVar[tuple[str, ...]] = ()
    outcome_type: ClassVar[OutcomeType]

    @classmethod
    def unknown(cls):
        return cls(**{name: None for name in cls.FIELDS})

    @classmethod
    def from_mapping(cls, data: Mapping, strict: bool = False):
        """Build from a key/value mapping; cells that do not parse become unknown.

        With ``strict`` a present but unparseable cell raises ``ValueError``.
        Count cells that are negative or fractional are treated the same way.
        """
        values = {}
        for name in cls.FIELDS:
            raw = data.get(name)
            number = parse_number(raw)
            if number is not None and name in cls.COUNT_FIELDS and not _is_count(number):
                number = None
                if strict:
                    raise ValueError(f"{name}: {raw!r} is not a non-negative integer count")
            if number is None and strict and raw is not None and str(raw).strip().lower() not in ("", UNKNOWN_TOKEN):
                raise ValueError(f"{name}: cannot parse {raw!r} as a number")
            values[name] = number
        return cls(**values)

    def values(self) -> tuple[MaybeNumber, ...]:
        return tuple(getattr(self, name) for name in self.FIELDS)

    def as_dict(self) -> dict[str, str]:
        return {name: format_number(getattr(self, name)) for name in self.FIELDS}

    def is_complete(self) -> bool:
        return all(v is not None for v in self.values())

    def is_all_unknown(self) -> bool:
        return all(v is None for v in self.values())

    def to_yaml(self) -> str:
        return "".join(f"{name}: {format_number(getattr(self, name))}\n" for name in self.FIELDS)


@dataclass(frozen=True)
class BinaryFinding(_Finding):
    """2x2 table cells: events and group sizes for each arm."""

    FIELDS: ClassVar[tuple[str, ...]] = (
        "intervention_events",
        "intervention_group_size",
        "comparator_events",
        "comparator_group_size",
    )
    COUNT_FIELDS: ClassVar[tuple[str, ...]] = FIELDS
    outcome_type: ClassVar[OutcomeType] = OutcomeType.BINARY

    intervention_events: MaybeNumber = None
    intervention_group_size: MaybeNumber = None
    comparator_events: MaybeNumber = None
    comparator_group_size: MaybeNumber = None

    def swap_arms(self) -> "BinaryFinding":
        return BinaryFinding(
            self.comparator_events,
            self.comparator_group_size,
            self.intervention_events,
            self.intervention_group_size,
        )


@dataclass(frozen=True)
class ContinuousFinding(_Finding):
    """Mean, standard deviation and group size for each arm."""

    FIELDS: ClassVar[tuple[str, ...]] = (
        "intervention_mean",
        "intervention_sd",
        "intervention_group_size",
        "comparator_mean",
        "comparator_sd",
        "comparator_group_size",
    )
    COUNT_FIELDS: ClassVar[tuple[str, ...]] = ("intervention_group_size", "comparator_group_size")
    outcome_type: ClassVar[OutcomeType] = OutcomeType.CONTINUOUS

    intervention_mean: MaybeNumber = None
    intervention_sd: MaybeNumber = None
    intervention_group_size: MaybeNumber = None
    comparator_mean: MaybeNumber = None
    comparator_sd: MaybeNumber = None
    comparator_group_size: MaybeNumber = None

    def swap_arms(self) -> "ContinuousFinding":
        return ContinuousFinding(
            self.comparator_mean,
            self.comparator_sd,
            self.comparator_group_size,
            self.intervention_mean,
            self.intervention_sd,
            self.intervention_group_size,
        )


Finding = Union[BinaryFinding, ContinuousFinding]

FINDING_CLASSES: dict[OutcomeType, type] = {
    OutcomeType.BINARY: BinaryFinding,
    OutcomeType.CONTINUOUS: ContinuousFinding,
}


def finding_class(outcome_type: OutcomeType) -> type:
    try:
        return FINDING_CLASSES[OutcomeType(outcome_type)]
    except KeyError:
        raise ValueError(f"no finding shape for outcome type {outcome_type!r}") from None


def finding_from_dict(data: Optional[Mapping], outcome_type: OutcomeType) -> Optional[Finding]:
    if data is None:
        return None
    return finding_class(outcome_type).from_mapping(data)


__all__ = [
    "UNKNOWN_TOKEN",
    "MaybeNumber",
    "OutcomeType",
    "BinaryFinding",
    "ContinuousFinding",
    "Finding",
    "parse_number",
    "format_number",
    "finding_class",
    "finding_from_dict",
]
