"""Effect sizes from raw findings and inverse-variance fixed-effect pooling.

Conventions:

* Log odds ratio with 0.5 added to every cell when any cell is zero.
* Standardized mean difference is Hedges' g with the approximate small-sample
  correction ``J = 1 - 3 / (4 (n1 + n2) - 9)``.
* Confidence intervals use the normal quantile.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy import stats as _sp
from sklearn.base import BaseEstimator, TransformerMixin

from autometa.exceptions import (
    ContractViolation,
    DegenerateVarianceError,
    DomainError,
    EmptyAnalysisError,
    IncompleteDataError,
)
from autometa.findings import BinaryFinding, ContinuousFinding, Finding
from autometa.validation import check_finite, check_positive, check_same_measure

LOG_ODDS_RATIO = "log_odds_ratio"
SMD = "smd"
Z_95 = 1.959963984540054


def z_quantile(level: float = 0.95) -> float:
    if level == 0.95:
        return Z_95
    if not 0 < level < 1:
        raise DomainError(f"confidence level must be in (0, 1), got {level}")
    return float(_sp.norm.ppf(0.5 + level / 2))


@dataclass(frozen=True)
class EffectEstimate:
    measure: str
    point: float
    variance: float
    study_id: str = ""

    def __post_init__(self):
        check_finite("point", self.point)
        check_positive("variance", self.variance)

    @property
    def standard_error(self) -> float:
        return math.sqrt(self.variance)

    def ci(self, level: float = 0.95) -> tuple[float, float]:
        half = z_quantile(level) * self.standard_error
        return self.point - half, self.point + half

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Incomplete:
    """Marker for a record whose data cannot produce an estimate."""

    study_id: str
    reason: str

    def to_dict(self) -> dict:
        return {"study_id": self.study_id, "incomplete": True, "reason": self.reason}


@dataclass(frozen=True)
class PooledEstimate:
    measure: str
    point: float
    variance: float
    ci_low: float
    ci_high: float
    k: int
    level: float = 0.95

    @property
    def standard_error(self) -> float:
        return math.sqrt(self.variance)

    def to_dict(self) -> dict:
        return asdict(self)


def _known(finding: Finding, study_id: str) -> list[float]:
    if not finding.is_complete():
        missing = [name for name in finding.FIELDS if getattr(finding, name) is None]
        raise IncompleteDataError(f"{study_id or 'finding'}: unknown fields {missing}")
    return [float(v) for v in finding.values()]


def log_odds_ratio(finding: BinaryFinding, study_id: str = "") -> EffectEstimate:
    ie, igs, ce, cgs = _known(finding, study_id)
    if igs <= 0 or cgs <= 0:
        raise DomainError(f"{study_id}: group sizes must be positive")
    if not (0 <= ie <= igs and 0 <= ce <= cgs):
        raise DomainError(f"{study_id}: events must lie between 0 and the group size")
    a, b, c, d = ie, igs - ie, ce, cgs - ce
    if 0 in (a, b, c, d):
        a, b, c, d = a + 0.5, b + 0.5, c + 0.5, d + 0.5
    # grouped so that swapping arms negates every term exactly
    point = (math.log(a) - math.log(c)) + (math.log(d) - math.log(b))
    variance = math.fsum((1 / a, 1 / b, 1 / c, 1 / d))
    return EffectEstimate(LOG_ODDS_RATIO, point, variance, study_id)


def standardized_mean_difference(finding: ContinuousFinding, study_id: str = "") -> EffectEstimate:
    m1, s1, n1, m2, s2, n2 = _known(finding, study_id)
    if n1 < 2 or n2 < 2:
        raise DomainError(f"{study_id}: each group needs at least 2 participants")
    if s1 < 0 or s2 < 0:
        raise DomainError(f"{study_id}: standard deviations must be non-negative")
    pooled_sd = math.sqrt(((n1 - 1) * s1**2 + (n2 - 1) * s2**2) / (n1 + n2 - 2))
    if pooled_sd == 0:
        raise DegenerateVarianceError(f"{study_id}: pooled standard deviation is zero")
    if s1 == 0 or s2 == 0:
        raise DomainError(f"{study_id}: standard deviations must be positive")
    d = (m1 - m2) / pooled_sd
    j = 1 - 3 / (4 * (n1 + n2) - 9)
    variance = j**2 * ((n1 + n2) / (n1 * n2) + d**2 / (2 * (n1 + n2)))
    return EffectEstimate(SMD, j * d, variance, study_id)


def sd_from_ci(n: int, ci_low: float, ci_high: float, level: float = 0.95) -> float:
    """Back out a standard deviation from a confidence interval of a mean.

    Uses ``sqrt(n) * width / divisor``: 3.92 for a 95% interval when n > 60,
    otherwise twice the t quantile with n - 1 degrees of freedom.
    """
    if n < 2:
        raise DomainError("n must be at least 2")
    if not ci_high > ci_low:
        raise DomainError(f"upper bound {ci_high} must exceed lower bound {ci_low}")
    if not 0 < level < 1:
        raise DomainError(f"confidence level must be in (0, 1), got {level}")
    if n > 60:
        divisor = 3.92 if level == 0.95 else 2 * z_quantile(level)
    else:
        divisor = 2 * float(_sp.t.ppf(0.5 + level / 2, n - 1))
    return math.sqrt(n) * (ci_high - ci_low) / divisor


def fixed_effect_pool(estimates: Sequence[EffectEstimate], level: float = 0.95) -> PooledEstimate:
    """Inverse-variance weighted mean of study estimates."""
    if not estimates:
        raise DomainError("cannot pool an empty list of estimates")
    measure = check_same_measure(estimates)
    weights = [1 / e.variance for e in estimates]
    total = math.fsum(weights)
    point = math.fsum(w * e.point for w, e in zip(weights, estimates)) / total
    # The exact weighted mean lies within the study range and 1/sum(w) never
    # exceeds the smallest variance; clamping only removes rounding spill, and
    # makes a single study pool to itself exactly.
    point = min(max(point, min(e.point for e in estimates)), max(e.point for e in estimates))
    variance = min(1 / total, min(e.variance for e in estimates))
    half = z_quantile(level) * math.sqrt(variance)
    return PooledEstimate(measure, point, variance, point - half, point + half, len(estimates), level)


def estimate_finding(finding: Finding, study_id: str = "") -> Union[EffectEstimate, Incomplete]:
    """Effect estimate for a finding, or an :class:`Incomplete` marker."""
    try:
        if isinstance(finding, BinaryFinding):
            return log_odds_ratio(finding, study_id)
        if isinstance(finding, ContinuousFinding):
            return standardized_mean_difference(finding, study_id)
    except IncompleteDataError:
        return Incomplete(study_id, "missing data")
    except DomainError as exc:
        return Incomplete(study_id, str(exc).split(": ", 1)[-1])
    return Incomplete(study_id, "unknown outcome type")


def estimate_for_record(item, outcome_type=None) -> Union[EffectEstimate, Incomplete]:
    """Estimate from an ICO record's reference data or from an extraction trace.

    Traces are read in the shape given by ``outcome_type`` (default: the shape
    the trace was extracted in).
    """
    if hasattr(item, "reference_type"):
        finding = item.reference
        study_id = item.record_id
    else:
        study_id = item.record_id
        finding = item.finding_as(outcome_type) if outcome_type is not None else item.finding
    if finding is None:
        return Incomplete(study_id, "unknown outcome type")
    return estimate_finding(finding, study_id)


def is_double_zero(finding: BinaryFinding) -> bool:
    """No events in either arm, or events in every participant of both arms."""
    if not finding.is_complete():
        return False
    ie, igs, ce, cgs = finding.values()
    return (ie == 0 and ce == 0) or (ie == igs and ce == cgs)


def poolable(findings: Iterable[tuple[str, Finding]]) -> tuple[list[EffectEstimate], list[Incomplete]]:
    """Split findings into estimates fit for pooling and skipped studies."""
    kept, skipped = [], []
    for study_id, finding in findings:
        if isinstance(finding, BinaryFinding) and is_double_zero(finding):
            skipped.append(Incomplete(study_id, "double zero"))
            continue
        result = estimate_finding(finding, study_id)
        (skipped if isinstance(result, Incomplete) else kept).append(result)
    return kept, skipped


class EffectSizeTransformer(TransformerMixin, BaseEstimator):
    """Turn findings into effect estimates, sklearn transformer style.

    ``transform`` returns a list aligned with its input holding either an
    :class:`EffectEstimate` or an :class:`Incomplete` marker.
    """

    def __init__(self, study_ids: Optional[Sequence[str]] = None):
        self.study_ids = study_ids

    def fit(self, findings=None, y=None):
        return self

    def transform(self, findings: Sequence[Finding]) -> list[Union[EffectEstimate, Incomplete]]:
        ids = list(self.study_ids) if self.study_ids is not None else [str(i) for i in range(len(findings))]
        if len(ids) != len(findings):
            raise ContractViolation(f"{len(ids)} study ids for {len(findings)} findings")
        return [estimate_finding(f, i) for f, i in zip(findings, ids)]


class FixedEffectMetaAnalysis(BaseEstimator):
    """Inverse-variance fixed-effect meta-analysis.

    ``fit`` accepts either a sequence of :class:`EffectEstimate` or two
    array-likes of points and variances.

    Attributes
    ----------
    pooled_ : PooledEstimate
    weights_ : ndarray of shape (k,), normalized to sum to 1
    estimates_ : list of EffectEstimate
    """

    def __init__(self, level: float = 0.95, measure: str = SMD):
        self.level = level
        self.measure = measure

    def fit(self, estimates, variances=None):
        if variances is not None:
            points = np.asarray(estimates, dtype=float).ravel()
            variances = np.asarray(variances, dtype=float).ravel()
            if points.shape != variances.shape:
                raise ContractViolation("points and variances differ in length")
            estimates = [
                EffectEstimate(self.measure, float(p), float(v), str(i))
                for i, (p, v) in enumerate(zip(points, variances))
            ]
        estimates = list(estimates)
        if not estimates:
            raise EmptyAnalysisError("no estimates to pool")
        self.pooled_ = fixed_effect_pool(estimates, self.level)
        w = np.array([1 / e.variance for e in estimates])
        self.weights_ = w / w.sum()
        self.estimates_ = estimates
        return self

    @property
    def point_(self) -> float:
        return self.pooled_.point

    @property
    def variance_(self) -> float:
        return self.pooled_.variance
