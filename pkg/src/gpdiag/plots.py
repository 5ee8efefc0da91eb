"""Deterministic SVG renderers for the toolkit's plots.

Plain text output with fixed float formatting so golden-file comparisons
are byte-stable across platforms; no plotting library is involved.
Frequency-index scatters use the index number itself as the glyph.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ValidationError

_MARGIN = 46.0

PLOT_KINDS = ("vj_squared", "avp", "field_heatmap", "a_curve", "experiment_table")

# j-index band colors, bands of width 100
BAND_COLORS = ("#000000", "#cc0000", "#00aa00", "#0000cc", "#cc00cc")


def _fmt(x: float) -> str:
    if not math.isfinite(x):
        return "0"
    return f"{x:.6g}"


def _scale(values, lo_px, hi_px, pad_frac=0.05):
    values = np.asarray(values, dtype=float)
    finite = values[np.isfinite(values)]
    lo = float(finite.min()) if finite.size else 0.0
    hi = float(finite.max()) if finite.size else 1.0
    if hi <= lo:
        hi = lo + 1.0
    pad = pad_frac * (hi - lo)
    lo, hi = lo - pad, hi + pad

    def to_px(v):
        return lo_px + (v - lo) / (hi - lo) * (hi_px - lo_px)

    return to_px, lo, hi


def _document(width, height, body, title):
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{int(width)}" '
        f'height="{int(height)}" viewBox="0 0 {int(width)} {int(height)}">\n'
        f'<rect width="{int(width)}" height="{int(height)}" fill="white"/>\n'
        f'<text x="{int(width / 2)}" y="18" text-anchor="middle" '
        f'font-family="monospace" font-size="13">{title}</text>\n'
    )
    return head + body + "</svg>\n"


def _axes(width, height, xlo, xhi, ylo, yhi):
    parts = [
        f'<line x1="{_fmt(_MARGIN)}" y1="{_fmt(height - _MARGIN)}" '
        f'x2="{_fmt(width - 10)}" y2="{_fmt(height - _MARGIN)}" stroke="black"/>\n',
        f'<line x1="{_fmt(_MARGIN)}" y1="{_fmt(height - _MARGIN)}" '
        f'x2="{_fmt(_MARGIN)}" y2="{_fmt(24)}" stroke="black"/>\n',
        f'<text x="{_fmt(_MARGIN)}" y="{_fmt(height - _MARGIN + 26)}" '
        f'font-family="monospace" font-size="10">{_fmt(xlo)}</text>\n',
        f'<text x="{_fmt(width - 40)}" y="{_fmt(height - _MARGIN + 26)}" '
        f'font-family="monospace" font-size="10">{_fmt(xhi)}</text>\n',
        f'<text x="{_fmt(4)}" y="{_fmt(height - _MARGIN)}" '
        f'font-family="monospace" font-size="10">{_fmt(ylo)}</text>\n',
        f'<text x="{_fmt(4)}" y="{_fmt(30)}" '
        f'font-family="monospace" font-size="10">{_fmt(yhi)}</text>\n',
    ]
    return "".join(parts)


def render_vj_squared(series_json: dict, width=640, height=420) -> str:
    """Scatter of v_j^2 against j with index-number glyphs and the fitted
    mean curve overlaid."""
    entries = series_json.get("entries", [])
    if not entries:
        raise ValidationError("empty series")
    j = np.array([e["j"] for e in entries], dtype=float)
    v = np.array([e["v_sq"] for e in entries], dtype=float)
    f = np.array([e["fitted"] for e in entries], dtype=float)
    to_x, xlo, xhi = _scale(j, _MARGIN, width - 10)
    to_y, ylo, yhi = _scale(np.concatenate([v, f]), height - _MARGIN, 24)
    body = [_axes(width, height, xlo, xhi, ylo, yhi)]
    pts = " ".join(f"{_fmt(to_x(a))},{_fmt(to_y(b))}" for a, b in zip(j, f))
    body.append(
        f'<polyline points="{pts}" fill="none" stroke="#cc0000" stroke-width="1.5"/>\n'
    )
    for a, b in zip(j, v):
        color = BAND_COLORS[min(int((a - 1) // 100), len(BAND_COLORS) - 1)]
        body.append(
            f'<text x="{_fmt(to_x(a))}" y="{_fmt(to_y(b))}" text-anchor="middle" '
            f'font-family="monospace" font-size="9" fill="{color}">{int(a)}</text>\n'
        )
    return _document(width, height, "".join(body), "v_j^2 against frequency index j")


def render_avp(avp_json: dict, width=560, height=420) -> str:
    """Added-variable scatter with the through-origin regression line.
    Spectral-domain plots glyph points by j and color by index band."""
    points = avp_json.get("points", [])
    if not points:
        raise ValidationError("empty added variable plot")
    x = np.array([p["x"] for p in points])
    y = np.array([p["y"] for p in points])
    ids = [int(p["id"]) for p in points]
    slope = float(avp_json["slope"])
    spectral = avp_json.get("domain") == "spectral"
    to_x, xlo, xhi = _scale(x, _MARGIN, width - 10)
    to_y, ylo, yhi = _scale(y, height - _MARGIN, 24)
    body = [_axes(width, height, xlo, xhi, ylo, yhi)]
    body.append(
        f'<line x1="{_fmt(to_x(xlo))}" y1="{_fmt(to_y(slope * xlo))}" '
        f'x2="{_fmt(to_x(xhi))}" y2="{_fmt(to_y(slope * xhi))}" '
        f'stroke="#cc0000" stroke-width="1.5"/>\n'
    )
    if spectral:
        for i, (a, b) in zip(ids, zip(x, y)):
            color = BAND_COLORS[min((i - 1) // 100, len(BAND_COLORS) - 1)]
            body.append(
                f'<text x="{_fmt(to_x(a))}" y="{_fmt(to_y(b))}" text-anchor="middle" '
                f'font-family="monospace" font-size="9" fill="{color}">{i}</text>\n'
            )
    else:
        for a, b in zip(x, y):
            body.append(
                f'<circle cx="{_fmt(to_x(a))}" cy="{_fmt(to_y(b))}" r="2.2" '
                f'fill="none" stroke="black"/>\n'
            )
    name = avp_json.get("covariate_name", "candidate")
    domain = avp_json.get("domain", "")
    p_val = avp_json.get("p_value", float("nan"))
    title = (
        f"added variable plot ({domain}): {name}  "
        f"slope={_fmt(slope)} p={_fmt(p_val)}"
    )
    return _document(width, height, "".join(body), title)


def render_a_curve(a_values, width=560, height=400, label="spectral density by index") -> str:
    a = np.asarray(a_values, dtype=float)
    if a.size == 0:
        raise ValidationError("empty curve")
    j = np.arange(1, a.size + 1, dtype=float)
    to_x, xlo, xhi = _scale(j, _MARGIN, width - 10)
    to_y, ylo, yhi = _scale(a, height - _MARGIN, 24)
    pts = " ".join(f"{_fmt(to_x(u))},{_fmt(to_y(w))}" for u, w in zip(j, a))
    body = _axes(width, height, xlo, xhi, ylo, yhi) + (
        f'<polyline points="{pts}" fill="none" stroke="black" stroke-width="1.5"/>\n'
    )
    return _document(width, height, body, label)


def render_field_heatmap(values, dims, width=560, height=480, label="gridded field") -> str:
    """Grid heatmap; values in lattice row order, second coordinate fastest."""
    m1, m2 = dims
    vals = np.asarray(values, dtype=float).reshape(m1, m2)
    lo, hi = float(vals.min()), float(vals.max())
    if hi <= lo:
        hi = lo + 1.0
    cell_w = (width - _MARGIN - 10) / m1
    cell_h = (height - _MARGIN - 24) / m2
    body = []
    for i in range(m1):
        for j in range(m2):
            t = (vals[i, j] - lo) / (hi - lo)
            r = int(255 * t)
            b = int(255 * (1 - t))
            g = int(80 + 80 * (1 - abs(2 * t - 1)))
            body.append(
                f'<rect x="{_fmt(_MARGIN + i * cell_w)}" '
                f'y="{_fmt(24 + (m2 - 1 - j) * cell_h)}" '
                f'width="{_fmt(cell_w)}" height="{_fmt(cell_h)}" '
                f'fill="rgb({r},{g},{b})"/>\n'
            )
    return _document(width, height, "".join(body), f"{label} [{_fmt(lo)}, {_fmt(hi)}]")


def render_experiment_table(rows: list[dict], width=760, label="experiment table") -> str:
    """Monospace text table as SVG rows."""
    if not rows:
        raise ValidationError("empty table")
    cols = list(rows[0].keys())
    line_h = 16
    height = 48 + line_h * (len(rows) + 1)
    body = [
        f'<text x="10" y="40" font-family="monospace" font-size="11">'
        f"{' | '.join(cols)}</text>\n"
    ]
    for k, row in enumerate(rows):
        rendered = " | ".join(
            _fmt(row[c]) if isinstance(row[c], float) else str(row[c]) for c in cols
        )
        body.append(
            f'<text x="10" y="{40 + line_h * (k + 1)}" font-family="monospace" '
            f'font-size="11">{rendered}</text>\n'
        )
    return _document(width, height, "".join(body), label)


def render(kind: str, payload, **kwargs) -> str:
    """Dispatch on plot kind; rejects payloads missing the kind's fields."""
    if kind not in PLOT_KINDS:
        raise ValidationError(f"unknown plot kind {kind!r}")
    if kind == "vj_squared":
        return render_vj_squared(payload, **kwargs)
    if kind == "avp":
        return render_avp(payload, **kwargs)
    if kind == "a_curve":
        return render_a_curve(payload, **kwargs)
    if kind == "field_heatmap":
        return render_field_heatmap(payload["values"], payload["dims"], **kwargs)
    return render_experiment_table(payload, **kwargs)
