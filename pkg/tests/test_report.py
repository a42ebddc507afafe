import xml.etree.ElementTree as ET

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from autometa.evaluation import evaluate
from autometa.exceptions import ContractViolation
from autometa.extraction import ExtractionTrace
from autometa.report import build_forest_model, render_forest_svg, render_tables
from autometa.stats import LOG_ODDS_RATIO, SMD, EffectEstimate, fixed_effect_pool

SVG = "{http://www.w3.org/2000/svg}"


def model_for(pairs, measure=SMD, title=""):
    estimates = [EffectEstimate(measure, p, v, f"Study {i}") for i, (p, v) in enumerate(pairs)]
    return build_forest_model(estimates, fixed_effect_pool(estimates), title)


def by_class(svg, cls):
    return [e for e in ET.fromstring(svg).iter() if e.get("class") == cls]


def test_weights():
    assert [r.weight_pct for r in model_for([(0.1, 0.5), (0.3, 0.5)]).rows] == [50, 50]
    assert [r.weight_pct for r in model_for([(0.1, 1), (0.3, 3)]).rows] == pytest.approx([75, 25])
    single = model_for([(0.4, 0.2)])
    assert single.rows[0].weight_pct == 100
    assert (single.pooled.point, single.pooled.ci_low) == pytest.approx((single.rows[0].point, single.rows[0].ci_low))


def test_row_ci_and_scale():
    m = model_for([(0.5, 0.04)], measure=LOG_ODDS_RATIO)
    assert m.axis_scale == "log"
    assert (m.rows[0].ci_low, m.rows[0].ci_high) == pytest.approx((0.5 - 1.959964 * 0.2, 0.5 + 1.959964 * 0.2))
    assert model_for([(0.5, 0.04)]).axis_scale == "linear"


def test_contract_violations():
    est = [EffectEstimate(SMD, 1, 1), EffectEstimate(SMD, 2, 1)]
    with pytest.raises(ContractViolation):
        build_forest_model(est, fixed_effect_pool(est[:1]))
    with pytest.raises(ContractViolation):
        build_forest_model([EffectEstimate(LOG_ODDS_RATIO, 1, 1)], fixed_effect_pool([EffectEstimate(SMD, 1, 1)]))
    with pytest.raises(ContractViolation):
        build_forest_model([], fixed_effect_pool(est))


def test_svg_structure_and_determinism():
    m = model_for([(0.2, 0.1), (-0.4, 0.3), (1.2, 0.5)], measure=LOG_ODDS_RATIO, title='A & "B" <vs> C')
    svg = render_forest_svg(m)
    assert svg == render_forest_svg(m)
    root = ET.fromstring(svg)
    assert root.tag == f"{SVG}svg" and root.get("version") == "1.1"
    assert len(by_class(svg, "study-marker")) == 3
    assert len(by_class(svg, "pooled-diamond")) == 1
    null = by_class(svg, "null-effect")[0]
    assert null.get("data-value") == "1"
    # the reference line sits where the "1" tick label sits
    labels = {e.text: e.get("x") for e in root.iter(f"{SVG}text")}
    assert labels["1"] == null.get("x1")


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.tuples(st.floats(-4, 4), st.floats(0.001, 4)), min_size=1, max_size=15),
    st.sampled_from([SMD, LOG_ODDS_RATIO]),
)
def test_svg_invariants(pairs, measure):
    m = model_for(pairs, measure)
    assert sum(r.weight_pct for r in m.rows) == pytest.approx(100, abs=0.01)
    assert all(r.ci_low <= r.point <= r.ci_high for r in m.rows)
    svg = render_forest_svg(m)
    assert len(by_class(svg, "study-marker")) + len(by_class(svg, "pooled-diamond")) == len(pairs) + 1
    diamond = by_class(svg, "pooled-diamond")[0]
    xs = [float(p.split(",")[0]) for p in diamond.get("points").split()]
    assert abs(xs[1] - float(diamond.get("data-cx"))) < 0.5
    left, right = 250, 590
    lows = [r.ci_low for r in m.rows] + [m.pooled.ci_low, 0.0]
    highs = [r.ci_high for r in m.rows] + [m.pooled.ci_high, 0.0]
    lo, hi = min(lows), max(highs)
    if hi - lo < 1e-9:
        lo, hi = lo - 1, hi + 1
    lo, hi = lo - 0.05 * (hi - lo), hi + 0.05 * (hi - lo)
    expected = left + (m.pooled.point - lo) / (hi - lo) * (right - left)
    assert abs(xs[1] - expected) < 0.5


def test_tables_perfect_and_empty(dev_corpus):
    refs = dev_corpus.records
    perfect = evaluate([ExtractionTrace(r.record_id, predicted_type=r.reference_type, finding=r.reference) for r in refs], refs, "echo")
    blank = evaluate([ExtractionTrace(r.record_id) for r in refs], refs, "blank")
    md = render_tables({"echo": perfect, "blank": blank})
    lines = md.splitlines()
    assert "## Outcome type (n=43)" in lines and "## Binary outcomes (n=11)" in lines
    assert "| **Exact Match** | *Total* | 1.000 | 0.000 |" in lines
    assert "| **MSE** |  | 0.000 | - |" in lines
    assert "| **% Complete** |  | 100.00 | 0.00 |" in lines
    binary = md.split("## Binary outcomes")[1].split("## Continuous")[0]
    rows = [l.split("|")[2].strip() for l in binary.splitlines() if l.startswith("| ")][1:]
    assert rows[:5] == ["*Total*", "*IE*", "*IGS*", "*CE*", "*CGS*"]
    assert rows[5:8] == ["*3*", "*2*", "*1*"]
    assert render_tables(perfect).startswith("## Outcome type")
