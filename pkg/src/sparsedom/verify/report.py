"""Report rows, log-log slope fits, atomic writers and a tiny SVG plotter."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import linregress

HEADER = ("experiment", "param_json", "lhs", "rhs", "ratio", "slope", "stderr", "pass")


@dataclass
class ReportRow:
    experiment: str
    params: dict = field(default_factory=dict)
    lhs: float | None = None
    rhs: float | None = None
    ratio: float | None = None
    slope: float | None = None
    stderr: float | None = None
    passed: bool | None = None

    def __post_init__(self):
        if self.ratio is None and self.lhs is not None and self.rhs is not None and self.rhs > 0:
            self.ratio = self.lhs / self.rhs

    def cells(self) -> list[str]:
        return [
            self.experiment,
            json.dumps(self.params, sort_keys=True, default=_jsonable),
            _fmt(self.lhs),
            _fmt(self.rhs),
            _fmt(self.ratio),
            _fmt(self.slope),
            _fmt(self.stderr),
            "" if self.passed is None else str(bool(self.passed)).lower(),
        ]


def _fmt(x) -> str:
    if x is None:
        return ""
    return repr(float(x))


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


def slope_fit(x, y, logx: bool = True, logy: bool = True) -> tuple[float, float]:
    """Least-squares slope of ``log y`` against ``log x`` and its standard error.

    ``logx=False`` fits against ``x`` itself (semi-log).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size:
        raise ValueError("x and y differ in length")
    if x.size < 3:
        raise ValueError("need at least three points")
    if logy and np.any(y <= 0) or logx and np.any(x <= 0):
        raise ValueError("log fit needs positive values")
    u = np.log(x) if logx else x
    v = np.log(y) if logy else y
    if np.ptp(v) == 0:
        return 0.0, 0.0
    res = linregress(u, v)
    return float(res.slope), float(res.stderr)


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def write_report(out_dir, rows, summary: dict) -> None:
    out = Path(out_dir)
    atomic_write(out / "report.csv", csv_text(rows))
    atomic_write(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True, default=_jsonable) + "\n")


# --- SVG -------------------------------------------------------------------

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def svg_plot(series, title: str = "", xlabel: str = "", ylabel: str = "", logx=True, logy=True, width=480, height=320) -> str:
    """Line-and-marker plot of ``[(label, xs, ys), ...]`` as an SVG string."""
    tx = (lambda v: math.log10(v)) if logx else float
    ty = (lambda v: math.log10(v)) if logy else float
    pts = [(lab, [tx(a) for a in xs], [ty(b) for b in ys]) for lab, xs, ys in series if len(xs)]
    allx = [a for _, xs, _ in pts for a in xs] or [0.0, 1.0]
    ally = [b for _, _, ys in pts for b in ys] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    ml, mr, mt, mb = 60, 20, 30, 45
    W, H = width - ml - mr, height - mt - mb

    def X(a):
        return ml + (a - x0) / (x1 - x0) * W

    def Y(b):
        return mt + H - (b - y0) / (y1 - y0) * H

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
        f'<rect x="{ml}" y="{mt}" width="{W}" height="{H}" fill="none" stroke="#444"/>',
        f'<text x="{width / 2}" y="18" text-anchor="middle">{_esc(title)}</text>',
        f'<text x="{ml + W / 2}" y="{height - 8}" text-anchor="middle">{_esc(xlabel)}</text>',
        f'<text x="14" y="{mt + H / 2}" text-anchor="middle" transform="rotate(-90 14 {mt + H / 2})">{_esc(ylabel)}</text>',
    ]
    for v, anchor in ((x0, "start"), (x1, "end")):
        lab = f"1e{v:.2g}" if logx else f"{v:.3g}"
        out.append(f'<text x="{X(v):.1f}" y="{mt + H + 14}" text-anchor="{anchor}">{lab}</text>')
    for v in (y0, y1):
        lab = f"1e{v:.2g}" if logy else f"{v:.3g}"
        out.append(f'<text x="{ml - 4}" y="{Y(v) + 4:.1f}" text-anchor="end">{lab}</text>')
    for i, (lab, xs, ys) in enumerate(pts):
        c = _COLORS[i % len(_COLORS)]
        path = " ".join(f"{X(a):.1f},{Y(b):.1f}" for a, b in zip(xs, ys))
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{path}"/>')
        out.extend(f'<circle cx="{X(a):.1f}" cy="{Y(b):.1f}" r="2.5" fill="{c}"/>' for a, b in zip(xs, ys))
        out.append(f'<text x="{ml + 8}" y="{mt + 14 + 13 * i}" fill="{c}">{_esc(lab)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
