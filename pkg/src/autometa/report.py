"""Forest plots (SVG) and markdown result tables."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence, Union
from xml.sax.saxutils import escape

from autometa.evaluation import EvaluationReport, MatchReport, MseReport, TypeMetrics
from autometa.exceptions import ContractViolation
from autometa.stats import LOG_ODDS_RATIO, Z_95, EffectEstimate, PooledEstimate
from autometa.validation import check_same_measure

MEASURE_LABELS = {
    LOG_ODDS_RATIO: "Odds ratio",
    "smd": "Std. mean difference",
}


@dataclass(frozen=True)
class ForestRow:
    study_id: str
    point: float
    ci_low: float
    ci_high: float
    weight_pct: float


@dataclass
class ForestPlotModel:
    """Plot-ready numbers, all on the analysis scale (log OR or SMD)."""

    rows: list[ForestRow]
    pooled: ForestRow
    measure: str
    axis_scale: str
    level: float = 0.95
    title: str = ""
    skipped: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def build_forest_model(estimates: Sequence[EffectEstimate], pooled: PooledEstimate, title: str = "") -> ForestPlotModel:
    if not estimates:
        raise ContractViolation("a forest plot needs at least one study")
    measure = check_same_measure(estimates)
    if measure != pooled.measure:
        raise ContractViolation(f"studies are {measure} but the pooled estimate is {pooled.measure}")
    if len(estimates) != pooled.k:
        raise ContractViolation(f"pooled estimate covers {pooled.k} studies, got {len(estimates)}")
    weights = [1 / e.variance for e in estimates]
    total = math.fsum(weights)
    z = Z_95 if pooled.level == 0.95 else (pooled.ci_high - pooled.point) / pooled.standard_error
    rows = []
    for e, w in zip(estimates, weights):
        half = z * math.sqrt(e.variance)
        rows.append(ForestRow(e.study_id, e.point, e.point - half, e.point + half, 100 * w / total))
    return ForestPlotModel(
        rows=rows,
        pooled=ForestRow("Total", pooled.point, pooled.ci_low, pooled.ci_high, 100.0),
        measure=measure,
        axis_scale="log" if measure == LOG_ODDS_RATIO else "linear",
        level=pooled.level,
        title=title,
    )


# ---------------------------------------------------------------------------
# SVG

# Fixed layout, in px. Fonts are left to the viewer's sans-serif.
WIDTH = 820
ROW_HEIGHT = 26
TOP = 56
LABEL_X = 12
PLOT_LEFT = 250
PLOT_RIGHT = 590
VALUE_X = 605
WEIGHT_X = 800
FONT_SIZE = 12
MIN_SQUARE = 5.0
MAX_SQUARE = 16.0
DIAMOND_HALF_HEIGHT = 7.0

_LOG_TICKS = (0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1, 2, 5, 10, 20, 50, 100)


_QUOTE = {'"': "&quot;"}


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _display(model: ForestPlotModel, value: float) -> float:
    return math.exp(value) if model.axis_scale == "log" else value


def _axis_range(model: ForestPlotModel) -> tuple[float, float]:
    lows = [r.ci_low for r in model.rows] + [model.pooled.ci_low, 0.0]
    highs = [r.ci_high for r in model.rows] + [model.pooled.ci_high, 0.0]
    lo, hi = min(lows), max(highs)
    if hi - lo < 1e-9:
        lo, hi = lo - 1, hi + 1
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _ticks(model: ForestPlotModel, lo: float, hi: float) -> list[float]:
    """Tick positions on the analysis scale."""
    if model.axis_scale == "log":
        ticks = [math.log(t) for t in _LOG_TICKS if lo <= math.log(t) <= hi]
        return ticks or [0.0]
    raw = (hi - lo) / 5
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + 1e-12:
        out.append(round(t, 10))
        t += step
    return out


def render_forest_svg(model: ForestPlotModel) -> str:
    """Render a forest plot as a standalone SVG 1.1 document.

    Studies get a square scaled by weight with a whisker for the CI; the pooled
    estimate is a diamond. A dashed line marks no effect. Output depends only on
    ``model``, so the same model always renders to the same bytes.
    """
    lo, hi = _axis_range(model)

    def x(value: float) -> float:
        return PLOT_LEFT + (value - lo) / (hi - lo) * (PLOT_RIGHT - PLOT_LEFT)

    n = len(model.rows)
    pooled_y = TOP + (n + 0.8) * ROW_HEIGHT
    axis_y = pooled_y + ROW_HEIGHT
    height = int(axis_y + 2 * ROW_HEIGHT)
    label = MEASURE_LABELS.get(model.measure, model.measure)
    pct = int(round(model.level * 100))

    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{height}" '
        f'viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="{FONT_SIZE}">',
    ]
    if model.title:
        out.append(f'<text x="{LABEL_X}" y="20" font-weight="bold">{escape(model.title)}</text>')
    out.append(f'<text x="{LABEL_X}" y="{TOP - 12}" font-weight="bold">Study</text>')
    out.append(f'<text x="{VALUE_X}" y="{TOP - 12}" font-weight="bold">{escape(label)} [{pct}% CI]</text>')
    out.append(f'<text x="{WEIGHT_X}" y="{TOP - 12}" font-weight="bold" text-anchor="end">Weight</text>')

    max_w = max(r.weight_pct for r in model.rows)
    for i, row in enumerate(model.rows):
        y = TOP + (i + 0.5) * ROW_HEIGHT
        side = MIN_SQUARE + (MAX_SQUARE - MIN_SQUARE) * math.sqrt(row.weight_pct / max_w)
        cx = x(row.point)
        out.append(f'<g class="study" data-study="{escape(row.study_id, _QUOTE)}">')
        out.append(f'<text x="{LABEL_X}" y="{_fmt(y + 4)}">{escape(row.study_id)}</text>')
        out.append(
            f'<line class="ci" x1="{_fmt(x(row.ci_low))}" y1="{_fmt(y)}" x2="{_fmt(x(row.ci_high))}" y2="{_fmt(y)}" stroke="black"/>'
        )
        out.append(
            f'<rect class="study-marker" x="{_fmt(cx - side / 2)}" y="{_fmt(y - side / 2)}" '
            f'width="{_fmt(side)}" height="{_fmt(side)}" fill="#1f4e79"/>'
        )
        value = (
            f"{_display(model, row.point):.2f} [{_display(model, row.ci_low):.2f}, {_display(model, row.ci_high):.2f}]"
        )
        out.append(f'<text x="{VALUE_X}" y="{_fmt(y + 4)}">{value}</text>')
        out.append(f'<text x="{WEIGHT_X}" y="{_fmt(y + 4)}" text-anchor="end">{row.weight_pct:.1f}%</text>')
        out.append("</g>")

    p = model.pooled
    cx = x(p.point)
    diamond = " ".join(
        f"{_fmt(px)},{_fmt(py)}"
        for px, py in (
            (x(p.ci_low), pooled_y),
            (cx, pooled_y - DIAMOND_HALF_HEIGHT),
            (x(p.ci_high), pooled_y),
            (cx, pooled_y + DIAMOND_HALF_HEIGHT),
        )
    )
    out.append(f'<text x="{LABEL_X}" y="{_fmt(pooled_y + 4)}" font-weight="bold">Total ({pct}% CI)</text>')
    out.append(f'<polygon class="pooled-diamond" points="{diamond}" fill="black" data-cx="{_fmt(cx)}"/>')
    out.append(
        f'<text x="{VALUE_X}" y="{_fmt(pooled_y + 4)}" font-weight="bold">'
        f"{_display(model, p.point):.2f} [{_display(model, p.ci_low):.2f}, {_display(model, p.ci_high):.2f}]</text>"
    )
    out.append(f'<text x="{WEIGHT_X}" y="{_fmt(pooled_y + 4)}" text-anchor="end" font-weight="bold">100.0%</text>')

    null_x = x(0.0)
    out.append(
        f'<line class="null-effect" x1="{_fmt(null_x)}" y1="{TOP - 4}" x2="{_fmt(null_x)}" y2="{_fmt(axis_y)}" '
        f'stroke="grey" stroke-dasharray="4,3" data-value="{1 if model.axis_scale == "log" else 0}"/>'
    )
    out.append(f'<line class="axis" x1="{PLOT_LEFT}" y1="{_fmt(axis_y)}" x2="{PLOT_RIGHT}" y2="{_fmt(axis_y)}" stroke="black"/>')
    for t in _ticks(model, lo, hi):
        tx = _fmt(x(t))
        shown = _display(model, t)
        text = f"{shown:g}" if model.axis_scale == "log" else f"{shown:.6g}"
        out.append(f'<line class="tick" x1="{tx}" y1="{_fmt(axis_y)}" x2="{tx}" y2="{_fmt(axis_y + 5)}" stroke="black"/>')
        out.append(f'<text x="{tx}" y="{_fmt(axis_y + 18)}" text-anchor="middle">{text}</text>')
    axis_label = f"{label} (log scale)" if model.axis_scale == "log" else label
    mid = (PLOT_LEFT + PLOT_RIGHT) / 2
    out.append(f'<text x="{_fmt(mid)}" y="{_fmt(axis_y + 36)}" text-anchor="middle">{escape(axis_label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# tables

FIELD_ABBREVIATIONS = {
    "intervention_events": "IE",
    "intervention_group_size": "IGS",
    "comparator_events": "CE",
    "comparator_group_size": "CGS",
    "intervention_mean": "IM",
    "intervention_sd": "ISD",
    "comparator_mean": "CM",
    "comparator_sd": "CSD",
}


def _r3(v) -> str:
    return "-" if v is None else f"{v:.3f}"


def _mse_cell(report: MseReport) -> str:
    return "-" if report.empty else f"{report.mse:.3f}"


def _table(header: list[str], rows: list[list[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(lines)


def render_type_table(metrics: Mapping[str, TypeMetrics]) -> str:
    names = list(metrics)
    rows = [
        ["**Accuracy**"] + [_r3(metrics[m].accuracy) for m in names],
        ["**F1 - Binary**"] + [_r3(metrics[m].f1_binary) for m in names],
        ["**F1 - Continuous**"] + [_r3(metrics[m].f1_continuous) for m in names],
        ["**# Unknowns**"] + [str(metrics[m].n_unknowns) for m in names],
    ]
    return _table([""] + names, rows)


def render_match_table(matches: Mapping[str, MatchReport], mses: Mapping[str, MseReport]) -> str:
    names = list(matches)
    first = matches[names[0]]
    fields = list(first.per_field_exact)
    rows = [["**Exact Match**", "*Total*"] + [_r3(matches[m].total_exact) for m in names]]
    for name in fields:
        rows.append(["", f"*{FIELD_ABBREVIATIONS.get(name, name)}*"] + [_r3(matches[m].per_field_exact[name]) for m in names])
    for i, k in enumerate(sorted(first.partial_at_k, reverse=True)):
        rows.append(["**Partial Match**" if i == 0 else "", f"*{k}*"] + [_r3(matches[m].partial_at_k[k]) for m in names])
    rows.append(["**MSE**", ""] + [_mse_cell(mses[m]) for m in names])
    rows.append(["**# Unknowns**", ""] + [str(matches[m].n_unknown_mistakes) for m in names])
    rows.append(
        ["**% Complete**", ""]
        + ["-" if matches[m].pct_complete is None else f"{matches[m].pct_complete:.2f}" for m in names]
    )
    return _table(["", ""] + names, rows)


def render_tables(reports: Union[EvaluationReport, Mapping[str, EvaluationReport]]) -> str:
    """Markdown tables for the three tasks, one column per model."""
    if isinstance(reports, EvaluationReport):
        reports = {reports.model_name or "model": reports}
    names = list(reports)
    n_types = reports[names[0]].types.n
    n_bin = reports[names[0]].binary.n
    n_con = reports[names[0]].continuous.n
    parts = [
        f"## Outcome type (n={n_types})",
        "",
        render_type_table({m: reports[m].types for m in names}),
        "",
        f"## Binary outcomes (n={n_bin})",
        "",
        render_match_table({m: reports[m].binary for m in names}, {m: reports[m].binary_mse for m in names}),
        "",
        f"## Continuous outcomes (n={n_con})",
        "",
        render_match_table({m: reports[m].continuous for m in names}, {m: reports[m].continuous_mse for m in names}),
        "",
    ]
    return "\n".join(parts)
