import itertools
import math
from decimal import Decimal

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from autometa.corpus import ICORecord
from autometa.exceptions import (
    ContractViolation,
    DegenerateVarianceError,
    DomainError,
    EmptyAnalysisError,
    IncompleteDataError,
)
from autometa.extraction import ExtractionTrace
from autometa.findings import BinaryFinding, ContinuousFinding, OutcomeType
from autometa.stats import (
    LOG_ODDS_RATIO,
    SMD,
    EffectEstimate,
    EffectSizeTransformer,
    FixedEffectMetaAnalysis,
    Incomplete,
    estimate_for_record,
    fixed_effect_pool,
    is_double_zero,
    log_odds_ratio,
    poolable,
    sd_from_ci,
    standardized_mean_difference,
    z_quantile,
)


def binary(*v):
    return BinaryFinding(*(None if x is None else Decimal(str(x)) for x in v))


def continuous(*v):
    return ContinuousFinding(*(None if x is None else Decimal(str(x)) for x in v))


# Values frozen from the oracle module.
LOG_OR_10_20_5_20 = (1.0986122886681098, 0.4666666666666667)
LOG_OR_0_10_5_10 = (-3.044522437723423, 2.4588744588744587)
HEDGES_12_2_50_10_2_50 = (0.9923273657289002, 0.04431211203485064)


def test_log_odds_ratio_worked_example():
    est = log_odds_ratio(binary(10, 20, 5, 20), "s")
    assert est.measure == LOG_ODDS_RATIO and est.study_id == "s"
    assert est.point == pytest.approx(LOG_OR_10_20_5_20[0], abs=1e-12)
    assert est.variance == pytest.approx(LOG_OR_10_20_5_20[1], abs=1e-12)
    assert est.point == pytest.approx(math.log(150 / 50))


def test_log_odds_ratio_zero_cell_correction():
    est = log_odds_ratio(binary(0, 10, 5, 10))
    assert (est.point, est.variance) == pytest.approx(LOG_OR_0_10_5_10, abs=1e-12)
    assert est.variance == pytest.approx(1 / 0.5 + 1 / 10.5 + 1 / 5.5 + 1 / 5.5)


def test_log_odds_ratio_equal_risks_and_errors():
    assert log_odds_ratio(binary(5, 10, 5, 10)).point == 0
    with pytest.raises(IncompleteDataError):
        log_odds_ratio(binary(5, None, 5, 10))
    with pytest.raises(DomainError):
        log_odds_ratio(binary(11, 10, 5, 10))
    with pytest.raises(DomainError):
        log_odds_ratio(binary(0, 0, 5, 10))


def test_hedges_g_worked_example():
    est = standardized_mean_difference(continuous(12, 2, 50, 10, 2, 50))
    assert (est.point, est.variance) == pytest.approx(HEDGES_12_2_50_10_2_50, abs=1e-12)
    assert est.point == pytest.approx(1 - 3 / 391)


def test_hedges_g_errors():
    assert standardized_mean_difference(continuous(5, 1, 10, 5, 3, 20)).point == 0
    with pytest.raises(DegenerateVarianceError):
        standardized_mean_difference(continuous(5, 0, 10, 4, 0, 10))
    with pytest.raises(DomainError):
        standardized_mean_difference(continuous(5, -1, 10, 4, 1, 10))
    with pytest.raises(DomainError):
        standardized_mean_difference(continuous(5, 1, 1, 4, 1, 10))
    with pytest.raises(IncompleteDataError):
        standardized_mean_difference(continuous(5, None, 10, 4, 1, 10))


def test_sd_from_ci():
    assert sd_from_ci(100, 8.04, 11.96) == pytest.approx(10.0, abs=1e-6)
    assert sd_from_ci(30, 1, 3) == pytest.approx(oracles.sd_from_ci(30, 1, 3), abs=1e-12)
    assert sd_from_ci(100, 0, 4) == pytest.approx(2 * sd_from_ci(100, 0, 2))
    assert sd_from_ci(100, 1, 1 + 1e-9) < 1e-8
    with pytest.raises(DomainError):
        sd_from_ci(100, 3, 3)
    with pytest.raises(DomainError):
        sd_from_ci(1, 0, 1)


def test_pool_worked_examples():
    pooled = fixed_effect_pool([EffectEstimate(SMD, 1, 1), EffectEstimate(SMD, 3, 1)])
    assert (pooled.point, pooled.variance, pooled.k) == (2.0, 0.5, 2)
    assert (pooled.ci_low, pooled.ci_high) == pytest.approx(oracles.pool([1, 3], [1, 1])[2:], abs=1e-12)
    single = fixed_effect_pool([EffectEstimate(SMD, 0.3, 0.2)])
    assert (single.point, single.variance) == (0.3, 0.2)
    assert fixed_effect_pool([EffectEstimate(SMD, 0, v) for v in (0.1, 2, 7)]).point == 0


def test_pool_errors():
    with pytest.raises(DomainError):
        fixed_effect_pool([])
    with pytest.raises(ContractViolation):
        fixed_effect_pool([EffectEstimate(SMD, 1, 1), EffectEstimate(LOG_ODDS_RATIO, 1, 1)])
    with pytest.raises(DomainError):
        EffectEstimate(SMD, 1, 0)
    with pytest.raises(DomainError):
        EffectEstimate(SMD, float("nan"), 1)


def test_z_quantile():
    assert z_quantile() == pytest.approx(oracles.Z95, abs=1e-15)
    assert z_quantile(0.9) == pytest.approx(1.6448536269514722)
    with pytest.raises(DomainError):
        z_quantile(1.5)


# --- properties -------------------------------------------------------------

counts = st.integers(min_value=1, max_value=500)


@st.composite
def binary_tables(draw):
    n1, n2 = draw(counts), draw(counts)
    return binary(draw(st.integers(0, n1)), n1, draw(st.integers(0, n2)), n2)


@st.composite
def continuous_sets(draw):
    mean = st.floats(-1000, 1000, allow_nan=False)
    sd = st.floats(0.01, 100)
    n = st.integers(2, 1000)
    return [draw(mean), draw(sd), draw(n), draw(mean), draw(sd), draw(n)]


@given(binary_tables())
def test_log_or_antisymmetry_exact(finding):
    est, swapped = log_odds_ratio(finding), log_odds_ratio(finding.swap_arms())
    assert swapped.point == -est.point
    assert swapped.variance == est.variance


@given(binary_tables())
def test_log_or_matches_oracle(finding):
    est = log_odds_ratio(finding)
    ref = oracles.log_or(*(int(v) for v in finding.values()))
    assert est.point == pytest.approx(ref[0], abs=1e-9)
    assert est.variance == pytest.approx(ref[1], abs=1e-9)


@given(continuous_sets())
def test_hedges_g_matches_oracle_and_antisymmetry(values):
    finding = continuous(*values)
    est = standardized_mean_difference(finding)
    ref = oracles.hedges_g(*[float(v) for v in finding.values()])
    assert est.point == pytest.approx(ref[0], rel=1e-9, abs=1e-9)
    assert est.variance == pytest.approx(ref[1], rel=1e-9, abs=1e-9)
    swapped = standardized_mean_difference(finding.swap_arms())
    assert swapped.point == pytest.approx(-est.point, abs=1e-12)
    assert swapped.variance == pytest.approx(est.variance, rel=1e-12)


@given(continuous_sets(), st.floats(0.01, 100))
def test_hedges_g_scale_invariance(values, k):
    m1, s1, n1, m2, s2, n2 = values
    base = standardized_mean_difference(continuous(m1, s1, n1, m2, s2, n2))
    scaled = standardized_mean_difference(continuous(m1 * k, s1 * k, n1, m2 * k, s2 * k, n2))
    # scale errors are relative to the size of the effect
    assert scaled.point == pytest.approx(base.point, rel=1e-9, abs=1e-12)
    assert scaled.variance == pytest.approx(base.variance, rel=1e-9, abs=1e-12)


estimate_lists = st.lists(
    st.tuples(st.floats(-5, 5, allow_nan=False), st.floats(1e-3, 10)), min_size=1, max_size=12
)


@given(estimate_lists, st.randoms())
def test_pool_properties(pairs, rnd):
    estimates = [EffectEstimate(SMD, p, v, str(i)) for i, (p, v) in enumerate(pairs)]
    pooled = fixed_effect_pool(estimates)
    points = [p for p, _ in pairs]
    assert min(points) - 1e-12 <= pooled.point <= max(points) + 1e-12
    assert pooled.variance <= min(v for _, v in pairs) * (1 + 1e-12)
    assert pooled.ci_low < pooled.point < pooled.ci_high
    shuffled = estimates[:]
    rnd.shuffle(shuffled)
    again = fixed_effect_pool(shuffled)
    assert (again.point, again.variance) == (pooled.point, pooled.variance)
    ref = oracles.pool(points, [v for _, v in pairs])
    assert pooled.point == pytest.approx(ref[0], abs=1e-9)


def test_pool_is_exactly_permutation_invariant_small():
    estimates = [EffectEstimate(SMD, p, v) for p, v in [(0.1, 0.3), (0.7, 0.05), (-0.2, 1.1), (1e-3, 0.7)]]
    results = {(fixed_effect_pool(list(p)).point, fixed_effect_pool(list(p)).variance) for p in itertools.permutations(estimates)}
    assert len(results) == 1


# --- dispatch and estimators ------------------------------------------------


def test_estimate_for_record_dispatch():
    rec = ICORecord("r", "d", "i", "c", "o", OutcomeType.BINARY, reference_binary=binary(10, 20, 5, 20))
    assert estimate_for_record(rec).measure == LOG_ODDS_RATIO
    partial = ICORecord("r", "d", "i", "c", "o", OutcomeType.BINARY, reference_binary=binary(10, None, 5, 20))
    assert isinstance(estimate_for_record(partial), Incomplete)
    cont = ICORecord("r", "d", "i", "c", "o", OutcomeType.CONTINUOUS, reference_continuous=continuous(12, 2, 50, 10, 2, 50))
    assert estimate_for_record(cont).measure == SMD
    assert isinstance(estimate_for_record(ICORecord("r", "d", "i", "c", "o")), Incomplete)
    trace = ExtractionTrace("r", finding=binary(10, 20, 5, 20))
    assert estimate_for_record(trace).point == pytest.approx(LOG_OR_10_20_5_20[0])
    assert isinstance(estimate_for_record(trace, OutcomeType.CONTINUOUS), Incomplete)
    assert isinstance(estimate_for_record(ExtractionTrace("r")), Incomplete)


def test_double_zero_tables_are_skipped_when_pooling():
    assert is_double_zero(binary(0, 10, 0, 12)) and is_double_zero(binary(10, 10, 12, 12))
    assert not is_double_zero(binary(0, 10, 1, 12))
    kept, skipped = poolable(
        [("a", binary(0, 10, 0, 12)), ("b", binary(1, 10, 2, 12)), ("c", binary(None, 10, 2, 12))]
    )
    assert [e.study_id for e in kept] == ["b"]
    assert [(s.study_id, s.reason) for s in skipped] == [("a", "double zero"), ("c", "missing data")]


def test_transformer_and_meta_analysis_estimators():
    findings = [binary(10, 20, 5, 20), binary(3, 30, 6, 31), binary(None, 1, 1, 1)]
    out = EffectSizeTransformer(study_ids=["a", "b", "c"]).fit_transform(findings)
    assert isinstance(out[2], Incomplete) and out[0].study_id == "a"
    with pytest.raises(ContractViolation):
        EffectSizeTransformer(study_ids=["a"]).transform(findings)

    model = FixedEffectMetaAnalysis().fit(out[:2])
    ref = oracles.pool([e.point for e in out[:2]], [e.variance for e in out[:2]])
    assert model.point_ == pytest.approx(ref[0], abs=1e-12)
    assert model.weights_.sum() == pytest.approx(1.0)
    arrays = FixedEffectMetaAnalysis(measure=LOG_ODDS_RATIO).fit(np.array([1.0, 3.0]), np.array([1.0, 1.0]))
    assert arrays.point_ == 2.0 and arrays.variance_ == 0.5
    assert FixedEffectMetaAnalysis(level=0.9).get_params() == {"level": 0.9, "measure": SMD}
    with pytest.raises(EmptyAnalysisError):
        FixedEffectMetaAnalysis().fit([])
    with pytest.raises(ContractViolation):
        FixedEffectMetaAnalysis().fit([1.0, 2.0], [1.0])
