"""Hand-rolled deterministic SVG charts: no plotting dependency, no
timestamps, every coordinate rendered with a fixed %.2f format so the
same inputs always produce the same bytes.
"""

from __future__ import annotations

from .errors import ContractError
from .lexicon import DrugId
from .stance import StanceLabel
from .stats import StateWaveStance
from .timeline import TrendSeries, Wave

DRUG_COLORS = {
    DrugId.HYDROXYCHLOROQUINE: "#2ca02c",
    DrugId.IVERMECTIN: "#d62728",
    DrugId.MOLNUPIRAVIR: "#17becf",
    DrugId.REMDESIVIR: "#ff7f0e",
}
CASE_COLOR = "#1f77b4"
STANCE_COLORS = {
    StanceLabel.Positive: "#1f77b4",
    StanceLabel.Neutral: "#7f7f7f",
    StanceLabel.Negative: "#d62728",
}

_FONT = 'font-family="sans-serif"'


def _f(x: float) -> str:
    return f"{x:.2f}"


def _header(width: int, height: int) -> str:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
    )


def trend_chart(series: TrendSeries, width: int = 900, height: int = 360) -> str:
    """Weekly per-drug tweet counts with the stepped case line overlaid."""
    if not series.weeks:
        raise ContractError("cannot chart an empty trend series")
    left, right, top, bottom = 60, 70, 30, 40
    plot_w = width - left - right
    plot_h = height - top - bottom
    n = len(series.weeks)
    max_count = max((max(row) for row in series.counts.values() if row), default=0)
    max_count = max(max_count, 1)
    max_cases = max(max(series.new_cases), 1)

    def x_at(i: int) -> float:
        return left + (plot_w * i / (n - 1) if n > 1 else plot_w / 2)

    def y_count(v: float) -> float:
        return top + plot_h * (1 - v / max_count)

    def y_cases(v: float) -> float:
        return top + plot_h * (1 - v / max_cases)

    parts = [_header(width, height)]
    parts.append(
        f'<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="#cccccc"/>\n'
    )
    # stepped weekly case line
    step = []
    for i, v in enumerate(series.new_cases):
        y = y_cases(v)
        step.append(f"{_f(x_at(i))},{_f(y)}")
        if i + 1 < n:
            step.append(f"{_f(x_at(i + 1))},{_f(y)}")
    parts.append(
        f'<polyline points="{" ".join(step)}" fill="none" '
        f'stroke="{CASE_COLOR}" stroke-width="1.5" stroke-dasharray="4 2"/>\n'
    )
    for drug in DrugId:
        pts = " ".join(
            f"{_f(x_at(i))},{_f(y_count(v))}" for i, v in enumerate(series.counts[drug])
        )
        parts.append(
            f'<polyline points="{pts}" fill="none" '
            f'stroke="{DRUG_COLORS[drug]}" stroke-width="1.5"/>\n'
        )
    # axis labels: first/last week, count and case maxima
    parts.append(
        f'<text x="{left}" y="{height - 12}" {_FONT} font-size="11">'
        f"{series.weeks[0].isoformat()}</text>\n"
    )
    parts.append(
        f'<text x="{left + plot_w}" y="{height - 12}" {_FONT} font-size="11" '
        f'text-anchor="end">{series.weeks[-1].isoformat()}</text>\n'
    )
    parts.append(
        f'<text x="{left - 6}" y="{top + 10}" {_FONT} font-size="11" '
        f'text-anchor="end">{max_count}</text>\n'
    )
    parts.append(
        f'<text x="{left + plot_w + 6}" y="{top + 10}" {_FONT} font-size="11" '
        f'fill="{CASE_COLOR}">{max_cases}</text>\n'
    )
    y = top + 4
    for drug in DrugId:
        parts.append(
            f'<rect x="{left + 8}" y="{y}" width="10" height="10" fill="{DRUG_COLORS[drug]}"/>'
            f'<text x="{left + 22}" y="{y + 9}" {_FONT} font-size="11">{drug.value}</text>\n'
        )
        y += 14
    parts.append(
        f'<rect x="{left + 8}" y="{y}" width="10" height="10" fill="{CASE_COLOR}"/>'
        f'<text x="{left + 22}" y="{y + 9}" {_FONT} font-size="11">weekly new cases</text>\n'
    )
    parts.append("</svg>\n")
    return "".join(parts)


def stance_share_chart(
    bars: list[tuple[str, float, float, float]], width: int = 900, height: int = 320
) -> str:
    """Stacked positive/neutral/negative share bars, one per labeled group.

    Each bar's shares are normalized to the full bar height.
    """
    if not bars:
        raise ContractError("cannot chart empty stance shares")
    left, top, bottom = 40, 30, 60
    plot_h = height - top - bottom
    slot = (width - 2 * left) / len(bars)
    bar_w = slot * 0.6
    parts = [_header(width, height)]
    order = (StanceLabel.Positive, StanceLabel.Neutral, StanceLabel.Negative)
    for i, (label, pos, neu, neg) in enumerate(bars):
        total = pos + neu + neg
        if total <= 0:
            raise ContractError(f"bar {label!r} has no mass")
        x = left + i * slot + (slot - bar_w) / 2
        y = float(top)
        for stance, share in zip(order, (pos, neu, neg)):
            h = plot_h * share / total
            parts.append(
                f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(bar_w)}" height="{_f(h)}" '
                f'fill="{STANCE_COLORS[stance]}"/>\n'
            )
            y += h
        parts.append(
            f'<text x="{_f(x + bar_w / 2)}" y="{height - 40}" {_FONT} font-size="10" '
            f'text-anchor="middle">{label}</text>\n'
        )
    x = left
    for stance in order:
        parts.append(
            f'<rect x="{_f(x)}" y="{height - 24}" width="10" height="10" '
            f'fill="{STANCE_COLORS[stance]}"/>'
            f'<text x="{_f(x + 14)}" y="{height - 15}" {_FONT} font-size="11">'
            f"{stance.value}</text>\n"
        )
        x += 110
    parts.append("</svg>\n")
    return "".join(parts)


def state_grid_chart(
    summaries: list[StateWaveStance], width: int = 900, height: int = 400
) -> str:
    """One colored grid per wave, cells keyed by state code."""
    if not summaries:
        raise ContractError("cannot chart an empty state summary")
    from .geo import STATE_CODES

    states = sorted(STATE_CODES)
    cols = 9
    cell = 26
    pad = 4
    by_key = {(s.state, s.wave): s for s in summaries}
    waves = sorted({s.wave for s in summaries})
    parts = [_header(width, height)]
    x0 = 30
    for wi, wave in enumerate(waves):
        ox = x0 + wi * (cols * (cell + pad) + 40)
        parts.append(
            f'<text x="{ox}" y="20" {_FONT} font-size="13">wave {int(wave)}</text>\n'
        )
        for i, state in enumerate(states):
            r, c = divmod(i, cols)
            x = ox + c * (cell + pad)
            y = 30 + r * (cell + pad)
            s = by_key.get((state, wave))
            color = STANCE_COLORS[s.stance_class] if s else "#eeeeee"
            parts.append(
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{color}"/>'
                f'<text x="{x + cell / 2:.2f}" y="{y + cell / 2 + 4:.2f}" {_FONT} '
                f'font-size="9" text-anchor="middle" fill="white">{state}</text>\n'
            )
    parts.append("</svg>\n")
    return "".join(parts)
