"""Input checks shared by the estimators and scoring functions."""

from __future__ import annotations

import math
from typing import Iterable, Sequence

from autometa.exceptions import ContractViolation, DomainError


def check_aligned(left_ids: Sequence[str], right_ids: Sequence[str], what: str = "records") -> None:
    """Both sides must cover the same ids in the same order."""
    left, right = list(left_ids), list(right_ids)
    if left == right:
        return
    only_left = sorted(set(left) - set(right))
    only_right = sorted(set(right) - set(left))
    if not only_left and not only_right:
        raise ContractViolation(f"{what} are not in the same order")
    raise ContractViolation(f"misaligned {what}: only in predictions {only_left}, only in references {only_right}")


def check_same_measure(estimates: Iterable) -> str:
    measures = {e.measure for e in estimates}
    if not measures:
        raise DomainError("no estimates given")
    if len(measures) > 1:
        raise ContractViolation(f"cannot combine different effect measures: {sorted(measures)}")
    return measures.pop()


def check_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value}")
    return value


def check_positive(name: str, value: float) -> float:
    value = check_finite(name, value)
    if value <= 0:
        raise DomainError(f"{name} must be > 0, got {value}")
    return value
