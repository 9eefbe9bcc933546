"""Static SVG 1.1 line and band charts written as plain strings.

Charts are derived views: every number plotted here is also written to a CSV
by the runner, and the markup contains nothing nondeterministic (no ids,
no timestamps), so identical inputs give byte-identical files.
"""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from .util import DesignError

_PALETTE = ("#1f6f8b", "#c44536", "#5a7d2a", "#7d5ba6", "#b8860b", "#3a3a3a")
_BAND_FILL = "#9db8c4"

_MARGIN_L = 64
_MARGIN_R = 18
_MARGIN_T = 42
_MARGIN_B = 52


def _coord(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    return f"{v:.6g}"


def _nice_step(span: float, target: int) -> float:
    raw = span / max(target, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if mult * mag >= raw:
            return mult * mag
    return 10.0 * mag


def _ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise DesignError("axis range must be finite")
    if hi <= lo:
        lo, hi = lo - 1.0, hi + 1.0
    step = _nice_step(hi - lo, target)
    first = math.ceil(lo / step) * step
    out = []
    v = first
    while v <= hi + 1e-9 * step:
        out.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return out


def _finite_range(arrays) -> tuple[float, float]:
    lo, hi = math.inf, -math.inf
    for a in arrays:
        a = np.asarray(a, dtype=np.float64)
        finite = a[np.isfinite(a)]
        if finite.size:
            lo = min(lo, float(finite.min()))
            hi = max(hi, float(finite.max()))
    if not math.isfinite(lo):
        raise DesignError("no finite values to plot")
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def line_chart(
    x,
    series,
    *,
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    band=None,
    x_ticks=None,
    zero_line: bool = True,
    width: int = 720,
    height: int = 440,
) -> str:
    """Render labeled polylines (and one optional band) to an SVG string.

    ``series`` is a sequence of (label, values) pairs drawn in order with a
    fixed palette; non-finite values split a line into separate segments.
    ``band`` is an optional (label, lower, upper) triple filled behind the
    lines.  ``x_ticks`` overrides the numeric x axis with (position, text)
    pairs, which is how date axes are drawn.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise DesignError("x must be a nonempty 1-d array")
    series = list(series)
    if not series and band is None:
        raise DesignError("nothing to plot")
    for label, vals in series:
        if np.asarray(vals).shape != x.shape:
            raise DesignError(f"series {label!r} does not match x in length")

    y_arrays = [vals for _, vals in series]
    if band is not None:
        _, lower, upper = band
        if np.asarray(lower).shape != x.shape or np.asarray(upper).shape != x.shape:
            raise DesignError("band arrays must match x in length")
        y_arrays = y_arrays + [lower, upper]
    y_lo, y_hi = _finite_range(y_arrays)
    if zero_line:
        y_lo, y_hi = min(y_lo, 0.0), max(y_hi, 0.0)
    x_lo, x_hi = float(x.min()), float(x.max())
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5

    plot_w = width - _MARGIN_L - _MARGIN_R
    plot_h = height - _MARGIN_T - _MARGIN_B

    def sx(v: float) -> float:
        return _MARGIN_L + (v - x_lo) / (x_hi - x_lo) * plot_w

    def sy(v: float) -> float:
        return _MARGIN_T + (y_hi - v) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width / 2:.0f}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="15" fill="#111111">{escape(title)}</text>'
        )

    # axes, ticks, grid
    ax_bottom = _MARGIN_T + plot_h
    for ty in _ticks(y_lo, y_hi):
        py = sy(ty)
        parts.append(
            f'<line x1="{_MARGIN_L}" y1="{_coord(py)}" x2="{_MARGIN_L + plot_w}" '
            f'y2="{_coord(py)}" stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_MARGIN_L - 6}" y="{_coord(py + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11" fill="#333333">{_tick_label(ty)}</text>'
        )
    if x_ticks is None:
        x_ticks = [(tx, _tick_label(tx)) for tx in _ticks(x_lo, x_hi, 6)]
    for tx, text in x_ticks:
        px = sx(float(tx))
        if px < _MARGIN_L - 0.5 or px > _MARGIN_L + plot_w + 0.5:
            continue
        parts.append(
            f'<line x1="{_coord(px)}" y1="{ax_bottom}" x2="{_coord(px)}" '
            f'y2="{ax_bottom + 4}" stroke="#333333" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_coord(px)}" y="{ax_bottom + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11" fill="#333333">{escape(str(text))}</text>'
        )
    if zero_line and y_lo < 0.0 < y_hi:
        py = sy(0.0)
        parts.append(
            f'<line x1="{_MARGIN_L}" y1="{_coord(py)}" x2="{_MARGIN_L + plot_w}" '
            f'y2="{_coord(py)}" stroke="#888888" stroke-width="1" stroke-dasharray="4 3"/>'
        )
    parts.append(
        f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#333333" stroke-width="1"/>'
    )

    if band is not None:
        label, lower, upper = band
        lower = np.asarray(lower, dtype=np.float64)
        upper = np.asarray(upper, dtype=np.float64)
        ok = np.isfinite(lower) & np.isfinite(upper)
        if np.any(ok):
            xs = x[ok]
            top = [f"{_coord(sx(a))},{_coord(sy(b))}" for a, b in zip(xs, upper[ok])]
            bot = [
                f"{_coord(sx(a))},{_coord(sy(b))}"
                for a, b in zip(xs[::-1], lower[ok][::-1])
            ]
            parts.append(
                f'<polygon points="{" ".join(top + bot)}" fill="{_BAND_FILL}" '
                f'fill-opacity="0.45" stroke="none"/>'
            )

    for i, (label, vals) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        vals = np.asarray(vals, dtype=np.float64)
        run: list[str] = []
        for xv, yv in zip(x, vals):
            if np.isfinite(yv):
                run.append(f"{_coord(sx(xv))},{_coord(sy(yv))}")
            else:
                _flush_polyline(parts, run, color)
                run = []
        _flush_polyline(parts, run, color)

    # legend in the top-left corner of the plot area
    entries = [(label, _PALETTE[i % len(_PALETTE)]) for i, (label, _) in enumerate(series)]
    if band is not None and band[0]:
        entries.append((band[0], _BAND_FILL))
    for i, (label, color) in enumerate(entries):
        ly = _MARGIN_T + 16 + 16 * i
        parts.append(
            f'<line x1="{_MARGIN_L + 10}" y1="{ly - 4}" x2="{_MARGIN_L + 30}" '
            f'y2="{ly - 4}" stroke="{color}" stroke-width="3"/>'
        )
        parts.append(
            f'<text x="{_MARGIN_L + 36}" y="{ly}" font-family="sans-serif" '
            f'font-size="11" fill="#333333">{escape(str(label))}</text>'
        )

    if x_label:
        parts.append(
            f'<text x="{_MARGIN_L + plot_w / 2:.0f}" y="{height - 10}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12" fill="#111111">{escape(x_label)}</text>'
        )
    if y_label:
        cx, cy = 16, _MARGIN_T + plot_h / 2
        parts.append(
            f'<text x="{cx}" y="{cy:.0f}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="12" fill="#111111" transform="rotate(-90 {cx} {cy:.0f})">'
            f"{escape(y_label)}</text>"
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _flush_polyline(parts: list[str], run: list[str], color: str) -> None:
    if len(run) >= 2:
        parts.append(
            f'<polyline points="{" ".join(run)}" fill="none" stroke="{color}" '
            f'stroke-width="1.8"/>'
        )
    elif len(run) == 1:
        parts.append(
            f'<circle cx="{run[0].split(",")[0]}" cy="{run[0].split(",")[1]}" '
            f'r="2.2" fill="{color}"/>'
        )
