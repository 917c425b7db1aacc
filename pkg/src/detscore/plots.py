"""Plot-ready curve data and its SVG / CSV emission.

Two curve families:

* DET curves: miss vs false-alarm rates on probit-warped axes, either the
  raw threshold sweep ("steppy") or the convex hull ("rocch");
* normalized Bayes error-rate curves: actual and minimum cost of the hard
  Bayes decision across a grid of prior log odds, normalized by the best
  score-free system, with the miss/false-alarm decomposition and
  rule-of-30 data-scarcity markers.

Rendering is dependency-free SVG (every curve becomes one polyline element);
CSV uses 17 significant digits so parsing it back reproduces the arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union
from xml.sax.saxutils import escape

import numpy as np
from scipy.special import expit, ndtri

from .metrics import default_x_grid, fast_error_rate_sweep, min_bayes_error
from .rocch import rocch
from .trials import LabeledScores

__all__ = [
    "DetCurve",
    "NberMarkers",
    "NberPlotData",
    "SvgOptions",
    "det_curve",
    "nber_curve",
    "render_svg",
    "emit_csv",
    "probit",
]


def probit(p):
    """Standard-normal quantile warp used by DET axes."""
    return ndtri(p)


def _clamped_probit(p: np.ndarray, n: int) -> np.ndarray:
    """Probit with rates clamped away from 0/1 by half a count out of n."""
    lo = 1.0 / (2.0 * n)
    return ndtri(np.clip(p, lo, 1.0 - lo))


@dataclass(frozen=True)
class DetCurve:
    """A DET curve: raw rates plus their warped plot coordinates.

    x = probit(p_fa), y = probit(p_miss), both clamped to half a count before
    warping. dr30_miss / dr30_fa are warped marker coordinates where the
    curve crosses 30 misses / 30 false alarms (None when the data never
    accumulates 30 of that error).
    """

    p_miss: np.ndarray
    p_fa: np.ndarray
    x: np.ndarray
    y: np.ndarray
    style: str
    n_tar: int
    n_non: int
    dr30_miss: Optional[tuple[float, float]] = None
    dr30_fa: Optional[tuple[float, float]] = None


def _steppy_points(scores: LabeledScores):
    """Every achievable (p_miss, p_fa) point of the threshold sweep, ordered
    by increasing p_fa. Tied scores move as one group."""
    n_tar, n_non = scores.n_tar, scores.n_non
    pooled = np.concatenate([scores.tar, scores.non])
    is_tar = np.zeros(pooled.size)
    is_tar[:n_tar] = 1.0
    order = np.argsort(pooled, kind="stable")
    sp = pooled[order]
    st = is_tar[order]
    new_group = np.empty(sp.size, dtype=bool)
    new_group[0] = True
    np.not_equal(sp[1:], sp[:-1], out=new_group[1:])
    gstarts = np.nonzero(new_group)[0]
    gsizes = np.diff(np.append(gstarts, sp.size))
    gtar = np.add.reduceat(st, gstarts)
    gnon = gsizes - gtar
    miss = np.concatenate([[0.0], np.cumsum(gtar)])[::-1]
    fa = np.concatenate([[0.0], np.cumsum(gnon[::-1])])
    return miss / n_tar, fa / n_non


def _cross_nonincreasing(values: np.ndarray, other: np.ndarray, target: float):
    """Point where a nonincreasing polyline coordinate crosses target;
    returns interpolated (value, other) or None when out of range."""
    if target > values[0] or target < values[-1]:
        return None
    idx = int(np.argmax(values <= target))
    if values[idx] == target or idx == 0:
        return float(values[idx]), float(other[idx])
    span = values[idx - 1] - values[idx]
    t = (values[idx - 1] - target) / span
    return target, float(other[idx - 1] + t * (other[idx] - other[idx - 1]))


def det_curve(scores: LabeledScores, style: str = "rocch", dr30: bool = True) -> DetCurve:
    """Compute a DET curve.

    Args:
        scores: labeled scores.
        style: "steppy" emits every threshold-sweep point; "rocch" emits the
            convex hull vertices.
        dr30: also locate the 30-miss and 30-false-alarm crossings.

    Returns:
        DetCurve with points ordered by increasing p_fa.
    """
    if style == "steppy":
        p_miss, p_fa = _steppy_points(scores)
    elif style == "rocch":
        curve = rocch(scores)
        p_miss, p_fa = curve.p_miss, curve.p_fa
    else:
        raise ValueError(f"unknown DET style {style!r}")
    n_tar, n_non = scores.n_tar, scores.n_non
    x = _clamped_probit(p_fa, n_non)
    y = _clamped_probit(p_miss, n_tar)

    dr30_miss = dr30_fa = None
    if dr30:
        hit = _cross_nonincreasing(p_miss, p_fa, 30.0 / n_tar) if n_tar >= 30 else None
        if hit is not None:
            dr30_miss = (
                float(_clamped_probit(np.array(hit[1]), n_non)),
                float(_clamped_probit(np.array(hit[0]), n_tar)),
            )
        # p_fa decreases when the curve is walked backwards
        hit = (
            _cross_nonincreasing(p_fa[::-1], p_miss[::-1], 30.0 / n_non)
            if n_non >= 30
            else None
        )
        if hit is not None:
            dr30_fa = (
                float(_clamped_probit(np.array(hit[0]), n_non)),
                float(_clamped_probit(np.array(hit[1]), n_tar)),
            )
    return DetCurve(p_miss, p_fa, x, y, style, n_tar, n_non, dr30_miss, dr30_fa)


@dataclass(frozen=True)
class NberMarkers:
    """Marker positions of a normalized Bayes error-rate plot."""

    dr30_miss: Optional[tuple[float, float]] = None
    dr30_fa: Optional[tuple[float, float]] = None
    opoints: tuple[float, ...] = ()


@dataclass(frozen=True)
class NberPlotData:
    """Normalized Bayes error-rate curves over a prior-log-odds grid.

    actual = miss_contrib + fa_contrib exactly; minimum (when present) is the
    evaluator-optimized floor from the convex hull. All series are normalized
    by min(pi, 1-pi), the cost of the best default decision, so the useless
    well-calibrated system sits at 1.
    """

    x: np.ndarray
    actual: np.ndarray
    miss_contrib: np.ndarray
    fa_contrib: np.ndarray
    minimum: Optional[np.ndarray] = None
    markers: NberMarkers = field(default_factory=NberMarkers)


def nber_curve(
    llrs: LabeledScores,
    x_grid=None,
    include_min: bool = True,
    opoints: Sequence[float] = (),
) -> NberPlotData:
    """Normalized Bayes error-rate of hard decisions along a prior grid.

    Args:
        llrs: scores interpreted as log-likelihood-ratios.
        x_grid: strictly increasing prior log odds; default 501 points on
            [-10, 0].
        include_min: also compute the optimal-threshold floor.
        opoints: abscissas to mark with vertical operating-point lines.

    Returns:
        NberPlotData. Rule-of-30 markers always ride on the minimum curve's
        counts, whether or not the minimum series is included.
    """
    x = default_x_grid() if x_grid is None else np.asarray(x_grid, dtype=np.float64)
    if x.ndim != 1 or x.size < 1 or not (np.diff(x) > 0).all():
        raise ValueError("x_grid must be a non-empty strictly increasing 1-D grid")
    pi = expit(x)
    sweep = fast_error_rate_sweep(llrs, -x)
    scale = np.minimum(pi, 1.0 - pi)
    miss_contrib = pi * sweep.p_miss / scale
    fa_contrib = (1.0 - pi) * sweep.p_fa / scale
    actual = miss_contrib + fa_contrib

    curve = rocch(llrs)
    floor = min_bayes_error(curve, pi)
    minimum = floor.normalized if include_min else None

    fa_ok = np.nonzero(floor.fa_count >= 30)[0]
    miss_ok = np.nonzero(floor.miss_count >= 30)[0]
    dr30_fa = (
        (float(x[fa_ok[0]]), float(floor.normalized[fa_ok[0]])) if fa_ok.size else None
    )
    dr30_miss = (
        (float(x[miss_ok[-1]]), float(floor.normalized[miss_ok[-1]]))
        if miss_ok.size
        else None
    )
    markers = NberMarkers(dr30_miss, dr30_fa, tuple(float(v) for v in opoints))
    return NberPlotData(x, actual, miss_contrib, fa_contrib, minimum, markers)


@dataclass
class SvgOptions:
    """Rendering knobs; sensible defaults for either plot family."""

    width: int = 720
    height: int = 540
    title: Optional[str] = None
    xlabel: Optional[str] = None
    ylabel: Optional[str] = None
    labels: Optional[Sequence[str]] = None
    colors: Sequence[str] = (
        "#d62728",
        "#1f77b4",
        "#2ca02c",
        "#9467bd",
        "#ff7f0e",
        "#8c564b",
        "#17becf",
        "#7f7f7f",
    )
    ymax: Optional[float] = None


_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 64, 16, 28, 48


class _Canvas:
    def __init__(self, opts: SvgOptions):
        self.opts = opts
        self.parts: list[str] = []
        self.x0, self.x1 = _MARGIN_L, opts.width - _MARGIN_R
        self.y0, self.y1 = _MARGIN_T, opts.height - _MARGIN_B
        self.dx = (1.0, 0.0)
        self.dy = (1.0, 0.0)

    def set_ranges(self, xlo, xhi, ylo, yhi):
        self.dx = (xlo, xhi)
        self.dy = (ylo, yhi)

    def px(self, x: float) -> float:
        lo, hi = self.dx
        return self.x0 + (x - lo) / (hi - lo) * (self.x1 - self.x0)

    def py(self, y: float) -> float:
        lo, hi = self.dy
        return self.y1 - (y - lo) / (hi - lo) * (self.y1 - self.y0)

    def add(self, element: str) -> None:
        self.parts.append(element)

    def polyline(self, xs, ys, color: str, dash: str = "") -> None:
        pts = " ".join(
            f"{self.px(float(x)):.2f},{self.py(float(y)):.2f}"
            for x, y in zip(xs, ys)
            if np.isfinite(x) and np.isfinite(y)
        )
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.add(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
            f'clip-path="url(#plotclip)" points="{pts}"{extra}/>'
        )

    def line(self, xa, ya, xb, yb, color: str, dash: str = "") -> None:
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.add(
            f'<line x1="{xa:.2f}" y1="{ya:.2f}" x2="{xb:.2f}" y2="{yb:.2f}" '
            f'stroke="{color}" stroke-width="1"{extra}/>'
        )

    def text(self, x, y, s, size=12, anchor="middle", color="#000000") -> None:
        self.add(
            f'<text x="{x:.2f}" y="{y:.2f}" font-size="{size}" '
            f'font-family="sans-serif" text-anchor="{anchor}" '
            f'fill="{color}">{escape(s)}</text>'
        )

    def triangle(self, x: float, y: float, color: str, data_xy=None) -> None:
        cx, cy = self.px(x), self.py(y)
        pts = f"{cx:.2f},{cy - 6:.2f} {cx - 5.2:.2f},{cy + 3:.2f} {cx + 5.2:.2f},{cy + 3:.2f}"
        data = ""
        if data_xy is not None:
            data = f' data-x="{data_xy[0]!r}" data-y="{data_xy[1]!r}"'
        self.add(f'<polygon points="{pts}" fill="{color}"{data}/>')

    def finish(self) -> bytes:
        o = self.opts
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{o.width}" '
            f'height="{o.height}" viewBox="0 0 {o.width} {o.height}">'
        )
        clip = (
            f'<defs><clipPath id="plotclip"><rect x="{self.x0}" y="{self.y0}" '
            f'width="{self.x1 - self.x0}" height="{self.y1 - self.y0}"/></clipPath></defs>'
        )
        frame = (
            f'<rect x="{self.x0}" y="{self.y0}" width="{self.x1 - self.x0}" '
            f'height="{self.y1 - self.y0}" fill="none" stroke="#000000"/>'
        )
        body = "".join(self.parts)
        return f"{head}{clip}{frame}{body}</svg>".encode("utf-8")


def _nice_ticks(lo: float, hi: float, n: int = 6) -> np.ndarray:
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10.0 ** np.floor(np.log10(raw))
    step = min(s for s in (1 * mag, 2 * mag, 2.5 * mag, 5 * mag, 10 * mag) if s >= raw)
    first = np.ceil(lo / step) * step
    ticks = np.arange(first, hi + step * 1e-9, step)
    return ticks[(ticks >= lo - 1e-12) & (ticks <= hi + 1e-12)]


def _fmt_tick(v: float) -> str:
    if v == int(v):
        return str(int(v))
    return f"{v:g}"


_DET_TICK_PROBS = (0.0001, 0.001, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.4, 0.8)


def _axes(canvas: _Canvas, kind: str) -> None:
    o = canvas.opts
    if kind == "det":
        for p in _DET_TICK_PROBS:
            v = float(ndtri(p))
            label = _fmt_tick(p * 100)
            if canvas.dx[0] <= v <= canvas.dx[1]:
                canvas.line(canvas.px(v), canvas.y1, canvas.px(v), canvas.y1 + 4, "#000")
                canvas.text(canvas.px(v), canvas.y1 + 16, label, size=10)
            if canvas.dy[0] <= v <= canvas.dy[1]:
                canvas.line(canvas.x0 - 4, canvas.py(v), canvas.x0, canvas.py(v), "#000")
                canvas.text(canvas.x0 - 7, canvas.py(v) + 3, label, size=10, anchor="end")
    else:
        for v in _nice_ticks(*canvas.dx):
            canvas.line(canvas.px(v), canvas.y1, canvas.px(v), canvas.y1 + 4, "#000")
            canvas.text(canvas.px(v), canvas.y1 + 16, _fmt_tick(v), size=10)
        for v in _nice_ticks(*canvas.dy):
            canvas.line(canvas.x0 - 4, canvas.py(v), canvas.x0, canvas.py(v), "#000")
            canvas.text(canvas.x0 - 7, canvas.py(v) + 3, _fmt_tick(v), size=10, anchor="end")
    if o.xlabel:
        canvas.text((canvas.x0 + canvas.x1) / 2, o.height - 12, o.xlabel)
    if o.ylabel:
        x, y = 16, (canvas.y0 + canvas.y1) / 2
        canvas.add(
            f'<text x="{x}" y="{y:.2f}" font-size="12" font-family="sans-serif" '
            f'text-anchor="middle" transform="rotate(-90 {x} {y:.2f})">'
            f"{escape(o.ylabel)}</text>"
        )
    if o.title:
        canvas.text(o.width / 2, 18, o.title, size=14)


def _legend(canvas: _Canvas, entries: list[tuple[str, str]]) -> None:
    x = canvas.x1 - 150
    y = canvas.y0 + 16
    for label, color in entries:
        canvas.line(x, y - 4, x + 22, y - 4, color)
        canvas.text(x + 28, y, label, size=11, anchor="start")
        y += 16


def render_svg(
    plots: Union[DetCurve, NberPlotData, Sequence[Union[DetCurve, NberPlotData]]],
    options: Optional[SvgOptions] = None,
) -> bytes:
    """Render one or more curve objects into a standalone SVG document.

    Accepts a single DetCurve/NberPlotData, a sequence of them (overlaid on
    shared axes; all must be the same family), or an empty sequence for an
    axes-only document. Each data series becomes exactly one polyline.
    """
    if isinstance(plots, (DetCurve, NberPlotData)):
        plots = [plots]
    else:
        plots = list(plots)
    kinds = {type(p) for p in plots}
    if len(kinds) > 1:
        raise ValueError("cannot overlay DET and Bayes error-rate plots")
    opts = options or SvgOptions()
    canvas = _Canvas(opts)

    if not plots:
        canvas.set_ranges(0.0, 1.0, 0.0, 1.0)
        _axes(canvas, "plain")
        return canvas.finish()

    if kinds == {DetCurve}:
        xs = np.concatenate([p.x for p in plots])
        ys = np.concatenate([p.y for p in plots])
        pad = 0.05 * max(np.ptp(xs), np.ptp(ys), 1e-3)
        canvas.set_ranges(xs.min() - pad, xs.max() + pad, ys.min() - pad, ys.max() + pad)
        if opts.xlabel is None:
            opts.xlabel = "false-alarm probability (%)"
        if opts.ylabel is None:
            opts.ylabel = "miss probability (%)"
        _axes(canvas, "det")
        entries = []
        for i, p in enumerate(plots):
            color = opts.colors[i % len(opts.colors)]
            canvas.polyline(p.x, p.y, color)
            label = (
                opts.labels[i]
                if opts.labels is not None and i < len(opts.labels)
                else p.style
            )
            entries.append((label, color))
            if p.dr30_miss is not None:
                canvas.triangle(*p.dr30_miss, color="#2ca02c", data_xy=p.dr30_miss)
            if p.dr30_fa is not None:
                canvas.triangle(*p.dr30_fa, color="#d62728", data_xy=p.dr30_fa)
        _legend(canvas, entries)
        return canvas.finish()

    # normalized Bayes error-rate family
    xs = np.concatenate([p.x for p in plots])
    finite_max = 0.0
    for p in plots:
        for series in (p.actual, p.minimum):
            if series is not None:
                vals = series[np.isfinite(series)]
                if vals.size:
                    finite_max = max(finite_max, float(vals.max()))
    ymax = opts.ymax if opts.ymax is not None else min(2.0, max(1.1, 1.05 * finite_max))
    canvas.set_ranges(float(xs.min()), float(xs.max()), 0.0, ymax)
    if opts.xlabel is None:
        opts.xlabel = "prior log odds logit(ptar)"
    if opts.ylabel is None:
        opts.ylabel = "normalized Bayes error-rate"
    _axes(canvas, "plain")
    if canvas.dy[0] <= 1.0 <= canvas.dy[1]:
        canvas.line(canvas.x0, canvas.py(1.0), canvas.x1, canvas.py(1.0), "#555555", dash="5,4")

    series_defs = [
        ("actual", lambda p: p.actual),
        ("minimum", lambda p: p.minimum),
        ("miss contribution", lambda p: p.miss_contrib),
        ("fa contribution", lambda p: p.fa_contrib),
    ]
    entries = []
    ci = 0
    for pi_idx, p in enumerate(plots):
        suffix = f" [{pi_idx + 1}]" if len(plots) > 1 else ""
        for name, get in series_defs:
            series = get(p)
            if series is None:
                continue
            color = opts.colors[ci % len(opts.colors)]
            ci += 1
            dash = "6,3" if name == "minimum" else ""
            canvas.polyline(p.x, series, color, dash=dash)
            entries.append((name + suffix, color))
        if p.markers.dr30_miss is not None:
            canvas.triangle(*p.markers.dr30_miss, color="#2ca02c", data_xy=p.markers.dr30_miss)
        if p.markers.dr30_fa is not None:
            canvas.triangle(*p.markers.dr30_fa, color="#d62728", data_xy=p.markers.dr30_fa)
        for ox in p.markers.opoints:
            canvas.line(canvas.px(ox), canvas.y0, canvas.px(ox), canvas.y1, "#aa00aa", dash="3,3")
    _legend(canvas, entries)
    return canvas.finish()


def _fmt17(v: float) -> str:
    return format(float(v), ".17g")


def emit_csv(plot: Union[DetCurve, NberPlotData]) -> str:
    """Emit a curve object as CSV with lossless numeric precision."""
    rows = []
    if isinstance(plot, DetCurve):
        rows.append("p_miss,p_fa,probit_p_miss,probit_p_fa")
        for pm, pf, y, x in zip(plot.p_miss, plot.p_fa, plot.y, plot.x):
            rows.append(",".join(_fmt17(v) for v in (pm, pf, y, x)))
    elif isinstance(plot, NberPlotData):
        names = ["logit_ptar", "actual"]
        series = [plot.x, plot.actual]
        if plot.minimum is not None:
            names.append("minimum")
            series.append(plot.minimum)
        names += ["miss_contribution", "fa_contribution"]
        series += [plot.miss_contrib, plot.fa_contrib]
        rows.append(",".join(names))
        for vals in zip(*series):
            rows.append(",".join(_fmt17(v) for v in vals))
    else:
        raise TypeError(f"cannot emit {type(plot).__name__}")
    return "\n".join(rows) + "\n"
