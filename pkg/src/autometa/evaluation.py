"""Scoring extraction output against reference annotations."""

from __future__ import annotations

import math
import statistics
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

from autometa.corpus.dataset import ICORecord
from autometa.exceptions import ContractViolation
from autometa.extraction.pipeline import ExtractionTrace
from autometa.findings import Finding, OutcomeType, finding_class
from autometa.stats import LOG_ODDS_RATIO, SMD, Z_95, EffectEstimate, Incomplete, estimate_finding
from autometa.validation import check_aligned


@dataclass
class TypeMetrics:
    accuracy: float
    f1_binary: float
    f1_continuous: float
    n_unknowns: int
    n: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class MatchReport:
    shape: str
    n: int
    total_exact: float
    per_field_exact: dict[str, float]
    partial_at_k: dict[int, float]
    n_unknown_mistakes: int
    n_reference_unknowns: int
    pct_complete: Optional[float]

    def to_dict(self) -> dict:
        data = asdict(self)
        data["partial_at_k"] = {str(k): v for k, v in self.partial_at_k.items()}
        return data


@dataclass
class MseReport:
    measure: str
    n_pairs: int
    mse: Optional[float] = None
    standard_error: Optional[float] = None
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None

    @property
    def empty(self) -> bool:
        return self.n_pairs == 0

    def to_dict(self) -> dict:
        return asdict(self)


ERROR_CATEGORIES = (
    "wrong_number",
    "unknown_for_known",
    "value_for_unknown_reference",
    "bad_format",
    "wrong_type_binary_as_continuous",
    "wrong_type_continuous_as_binary",
    "type_unknown",
)


@dataclass
class ErrorBreakdown:
    counts: dict[str, int] = field(default_factory=lambda: dict.fromkeys(ERROR_CATEGORIES, 0))

    @property
    def field_mismatches(self) -> int:
        return self.counts["wrong_number"] + self.counts["unknown_for_known"] + self.counts["value_for_unknown_reference"]

    def __getitem__(self, key: str) -> int:
        return self.counts[key]

    def to_dict(self) -> dict:
        return dict(self.counts)


# ---------------------------------------------------------------------------


def _f1(tp: int, fp: int, fn: int) -> float:
    if tp == 0:
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)


def score_types(predictions: Sequence[ExtractionTrace], references: Sequence[ICORecord]) -> TypeMetrics:
    """Outcome-type accuracy, per-class F1 and the count of unknown answers.

    Records whose reference type is itself unknown stay in the accuracy
    denominator; predicting ``x`` for them counts as correct.
    """
    check_aligned([p.record_id for p in predictions], [r.record_id for r in references])
    pred = [p.predicted_type for p in predictions]
    gold = [r.reference_type for r in references]
    n = len(gold)
    correct = sum(p is g for p, g in zip(pred, gold))
    f1 = {}
    for cls in (OutcomeType.BINARY, OutcomeType.CONTINUOUS):
        tp = sum(p is cls and g is cls for p, g in zip(pred, gold))
        fp = sum(p is cls and g is not cls for p, g in zip(pred, gold))
        fn = sum(p is not cls and g is cls for p, g in zip(pred, gold))
        f1[cls] = _f1(tp, fp, fn)
    unknowns = sum(p is OutcomeType.UNKNOWN and g is not OutcomeType.UNKNOWN for p, g in zip(pred, gold))
    return TypeMetrics(
        accuracy=correct / n if n else 0.0,
        f1_binary=f1[OutcomeType.BINARY],
        f1_continuous=f1[OutcomeType.CONTINUOUS],
        n_unknowns=unknowns,
        n=n,
    )


def _as_findings(items: Sequence, shape: OutcomeType) -> list[Finding]:
    out = []
    cls = finding_class(shape)
    for item in items:
        if isinstance(item, ExtractionTrace):
            out.append(item.finding_as(shape))
        elif isinstance(item, ICORecord):
            ref = item.reference
            out.append(ref if isinstance(ref, cls) else cls.unknown())
        elif item is None:
            out.append(cls.unknown())
        elif isinstance(item, cls):
            out.append(item)
        else:
            raise TypeError(f"cannot read a {shape.value} finding from {type(item).__name__}")
    return out


def _ids(items: Sequence) -> Optional[list[str]]:
    if all(hasattr(i, "record_id") for i in items):
        return [i.record_id for i in items]
    return None


def _has_estimate(finding: Finding) -> bool:
    return not isinstance(estimate_finding(finding), Incomplete)


def score_findings(model_findings: Sequence, references: Sequence, shape: OutcomeType) -> MatchReport:
    """Exact and partial match rates for one extraction task.

    Inputs are aligned sequences of traces, records or bare findings. Unknown
    matching unknown counts as a matching field.
    """
    shape = OutcomeType(shape)
    model_ids, ref_ids = _ids(model_findings), _ids(references)
    if model_ids is not None and ref_ids is not None:
        check_aligned(model_ids, ref_ids)
    elif len(model_findings) != len(references):
        raise ContractViolation(f"{len(model_findings)} predictions for {len(references)} references")
    model = _as_findings(model_findings, shape)
    gold = _as_findings(references, shape)
    names = finding_class(shape).FIELDS
    n = len(gold)

    field_hits = dict.fromkeys(names, 0)
    match_counts = []
    unknown_mistakes = 0
    reference_unknowns = 0
    complete_ref = complete_both = 0
    for m, g in zip(model, gold):
        hits = 0
        for name in names:
            mv, gv = getattr(m, name), getattr(g, name)
            if mv == gv:
                field_hits[name] += 1
                hits += 1
            if mv is None and gv is not None:
                unknown_mistakes += 1
            if gv is None:
                reference_unknowns += 1
        match_counts.append(hits)
        if _has_estimate(g):
            complete_ref += 1
            complete_both += _has_estimate(m)

    def rate(count: int) -> float:
        return count / n if n else 0.0

    return MatchReport(
        shape=shape.value,
        n=n,
        total_exact=rate(sum(c == len(names) for c in match_counts)),
        per_field_exact={name: rate(field_hits[name]) for name in names},
        partial_at_k={k: rate(sum(c >= k for c in match_counts)) for k in range(1, len(names))},
        n_unknown_mistakes=unknown_mistakes,
        n_reference_unknowns=reference_unknowns,
        pct_complete=100.0 * complete_both / complete_ref if complete_ref else None,
    )


def mean_standardized_error(
    model_estimates: Sequence, reference_estimates: Sequence, measure: Optional[str] = None
) -> MseReport:
    """Mean absolute difference between model- and reference-derived estimates.

    Only pairs where both sides are :class:`EffectEstimate` count. The standard
    error is ``sd / sqrt(n)`` with the sample SD, and the interval is the
    normal approximation around the mean.
    """
    if len(model_estimates) != len(reference_estimates):
        raise ContractViolation(f"{len(model_estimates)} model estimates for {len(reference_estimates)} references")
    check_aligned(
        [getattr(e, "study_id", "") for e in model_estimates],
        [getattr(e, "study_id", "") for e in reference_estimates],
        "estimates",
    )
    pairs = [
        (m, r)
        for m, r in zip(model_estimates, reference_estimates)
        if isinstance(m, EffectEstimate) and isinstance(r, EffectEstimate)
    ]
    measures = {e.measure for pair in pairs for e in pair}
    if len(measures) > 1:
        raise ContractViolation(f"mixed measures {sorted(measures)}")
    measure = measure or (measures.pop() if measures else "")
    if not pairs:
        return MseReport(measure, 0)
    errors = [abs(m.point - r.point) for m, r in pairs]
    mean = math.fsum(errors) / len(errors)
    se = statistics.stdev(errors) / math.sqrt(len(errors)) if len(errors) > 1 else 0.0
    return MseReport(measure, len(errors), mean, se, mean - Z_95 * se, mean + Z_95 * se)


def classify_errors(predictions: Sequence[ExtractionTrace], references: Sequence[ICORecord], shape: Optional[OutcomeType] = None) -> ErrorBreakdown:
    """Count errors by kind.

    Type errors come from ``predicted_type``. Field errors compare the merged
    finding in the reference's shape. ``bad_format`` counts extraction
    responses the parser could not read; their fields also land in the field
    categories, since an unreadable answer is scored as unknown.
    With ``shape`` set, only records of that reference type are counted.
    """
    check_aligned([p.record_id for p in predictions], [r.record_id for r in references])
    out = ErrorBreakdown()
    c = out.counts
    for trace, ref in zip(predictions, references):
        kind = ref.reference_type
        if shape is not None and kind is not OutcomeType(shape):
            continue
        pred = trace.predicted_type
        if kind is not OutcomeType.UNKNOWN:
            if pred is OutcomeType.UNKNOWN:
                c["type_unknown"] += 1
            elif kind is OutcomeType.BINARY and pred is OutcomeType.CONTINUOUS:
                c["wrong_type_binary_as_continuous"] += 1
            elif kind is OutcomeType.CONTINUOUS and pred is OutcomeType.BINARY:
                c["wrong_type_continuous_as_binary"] += 1
        c["bad_format"] += trace.format_error_count
        if kind is OutcomeType.UNKNOWN:
            continue
        model = trace.finding_as(kind)
        for name in model.FIELDS:
            mv, gv = getattr(model, name), getattr(ref.reference, name)
            if mv == gv:
                continue
            if mv is None:
                c["unknown_for_known"] += 1
            elif gv is None:
                c["value_for_unknown_reference"] += 1
            else:
                c["wrong_number"] += 1
    return out


@dataclass
class EvaluationReport:
    model_name: str
    types: TypeMetrics
    binary: MatchReport
    continuous: MatchReport
    binary_mse: MseReport
    continuous_mse: MseReport
    binary_errors: ErrorBreakdown
    continuous_errors: ErrorBreakdown

    def to_dict(self) -> dict:
        return {
            "model_name": self.model_name,
            "types": self.types.to_dict(),
            "binary": self.binary.to_dict(),
            "continuous": self.continuous.to_dict(),
            "binary_mse": self.binary_mse.to_dict(),
            "continuous_mse": self.continuous_mse.to_dict(),
            "binary_errors": self.binary_errors.to_dict(),
            "continuous_errors": self.continuous_errors.to_dict(),
        }


def _estimates(items: Sequence, shape: OutcomeType) -> list:
    return [estimate_finding(f, i.record_id) for f, i in zip(_as_findings(items, shape), items)]


def evaluate(traces: Sequence[ExtractionTrace], records: Sequence[ICORecord], model_name: str = "") -> EvaluationReport:
    """All three tasks scored at once; extraction tasks use reference-typed subsets."""
    check_aligned([t.record_id for t in traces], [r.record_id for r in records])
    parts = {}
    for shape in (OutcomeType.BINARY, OutcomeType.CONTINUOUS):
        idx = [i for i, r in enumerate(records) if r.reference_type is shape]
        sub_traces = [traces[i] for i in idx]
        sub_refs = [records[i] for i in idx]
        parts[shape] = (
            score_findings(sub_traces, sub_refs, shape),
            mean_standardized_error(
                _estimates(sub_traces, shape),
                _estimates(sub_refs, shape),
                LOG_ODDS_RATIO if shape is OutcomeType.BINARY else SMD,
            ),
            classify_errors(sub_traces, sub_refs),
        )
    return EvaluationReport(
        model_name=model_name,
        types=score_types(traces, records),
        binary=parts[OutcomeType.BINARY][0],
        continuous=parts[OutcomeType.CONTINUOUS][0],
        binary_mse=parts[OutcomeType.BINARY][1],
        continuous_mse=parts[OutcomeType.CONTINUOUS][1],
        binary_errors=parts[OutcomeType.BINARY][2],
        continuous_errors=parts[OutcomeType.CONTINUOUS][2],
    )
