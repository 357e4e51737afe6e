"""CSV and SVG emission for study results.

CSV files are the contract; the SVG line plots are a convenience drawn by
hand so no plotting library is needed.  All files of one result are first
written to temporary names in the target directory and only renamed into
place once every one of them has been written, so a failure leaves no
partial output behind.
"""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

from .errors import OutputError
from .experiments import RateCheck, RatioCurve, RealDataResult
from .theory import THEORY_COLUMNS

NA = "NA"


@dataclass
class TheoryTable:
    d: int
    rows: list[dict]

    columns = THEORY_COLUMNS

    def records(self):
        return self.rows


@dataclass
class PredictionTable:
    columns: tuple[str, ...]
    rows: list[dict]

    def records(self):
        return self.rows


def format_value(v) -> str:
    """Cell text: shortest round-trip repr for floats, NA for missing."""
    if v is None:
        return NA
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float) or hasattr(v, "dtype") and v.dtype.kind == "f":
        v = float(v)
        return NA if math.isnan(v) else repr(v)
    return str(v)


def csv_text(columns, records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for rec in records:
        w.writerow([format_value(rec[c]) for c in columns])
    return buf.getvalue()


# ---------------------------------------------------------------- SVG

@dataclass
class Series:
    label: str
    xs: list[float]
    ys: list  # None entries are skipped
    dashed: bool = False


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out, t = [], start
    while t <= hi + 1e-12 * step:
        out.append(round(t, 12))
        t += step
    return out


def svg_line_plot(series, title="", xlabel="", ylabel="", width=640, height=420) -> str:
    """Static SVG with one polyline per series and a legend."""
    pts = [(x, y) for s in series for x, y in zip(s.xs, s.ys) if y is not None and math.isfinite(y)]
    if not pts:
        raise OutputError("nothing to plot")
    xlo, xhi = min(p[0] for p in pts), max(p[0] for p in pts)
    ylo, yhi = min(p[1] for p in pts), max(p[1] for p in pts)
    if xhi == xlo:
        xlo, xhi = xlo - 0.5, xhi + 0.5
    pad = (yhi - ylo) * 0.08 or max(abs(yhi) * 0.05, 0.01)
    ylo, yhi = ylo - pad, yhi + pad
    left, right, top, bottom = 70, 20, 36, 50
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + (x - xlo) / (xhi - xlo) * pw

    def sy(y):
        return top + (yhi - y) / (yhi - ylo) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
    for t in _ticks(xlo, xhi):
        x = sx(t)
        out.append(f'<line x1="{x:.2f}" y1="{top + ph}" x2="{x:.2f}" y2="{top + ph + 4}" stroke="#444"/>')
        out.append(f'<text x="{x:.2f}" y="{top + ph + 16}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(ylo, yhi):
        y = sy(t)
        out.append(f'<line x1="{left}" y1="{y:.2f}" x2="{left + pw}" y2="{y:.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{left - 6}" y="{y + 4:.2f}" text-anchor="end">{t:g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(ylabel)}</text>')
    for i, s in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        xy = [(sx(x), sy(y)) for x, y in zip(s.xs, s.ys) if y is not None and math.isfinite(y)]
        if not xy:
            continue
        dash = ' stroke-dasharray="6 4"' if s.dashed else ""
        path = " ".join(f"{x:.2f},{y:.2f}" for x, y in xy)
        out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.8"{dash}/>')
        for x, y in xy:
            out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2.5" fill="{color}"/>')
        ly = top + 14 + 16 * i
        out.append(f'<line x1="{left + pw - 150}" y1="{ly}" x2="{left + pw - 125}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="1.8"{dash}/>')
        out.append(f'<text x="{left + pw - 120}" y="{ly + 4}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- dispatch

def _by(rows, key):
    groups = {}
    for r in rows:
        groups.setdefault(r[key], []).append(r)
    return groups


def _ratio_files(res: RatioCurve):
    recs = res.records()
    if res.kind == "cis":
        name, ycol, tcol, group = "cis_curve", "sim_cis_ratio", "theory_sqrt_pr", "k_policy"
        ylabel = "CIS ratio"
    else:
        name, ycol, tcol, group = "ratio_curve", "sim_ratio", "theory_pr", "metric"
        ylabel = "risk ratio"
    series = []
    for key, rows in _by(recs, group).items():
        series.append(Series(f"simulated {key}", [r["gamma_over_d"] for r in rows], [r[ycol] for r in rows]))
    theory = {r["gamma_over_d"]: r[tcol] for r in recs if r[tcol] is not None}
    if theory:
        xs = sorted(theory)
        series.append(Series("theory", xs, [theory[x] for x in xs], dashed=True))
    d, n = recs[0]["d"], recs[0]["n"]
    svg = svg_line_plot(series, f"d={d}, n={n}", "gamma / d", ylabel)
    return {f"{name}.csv": csv_text(res.columns, recs), f"{name}.svg": svg}


def _rate_files(res: RateCheck):
    recs = res.records()
    series = [Series(f"gamma={g:g}", [math.log2(r["n"]) for r in rows], [math.log(r["best_mse"])
                     if r["best_mse"] > 0 else None for r in rows])
              for g, rows in _by(recs, "gamma").items()]
    svg = svg_line_plot(series, f"d={recs[0]['d']}", "log2 n", "log optimal MSE")
    return {"rate_check.csv": csv_text(res.columns, recs), "rate_check.svg": svg}


def _real_files(res: RealDataResult):
    recs = res.records()
    series = [Series(str(name), [r["gamma_over_d"] for r in rows], [r["mean_error"] for r in rows])
              for name, rows in _by(recs, "dataset").items()]
    svg = svg_line_plot(series, "test error", "gamma / d", "mean test error")
    return {"real_data.csv": csv_text(res.columns, recs), "real_data.svg": svg}


def _theory_files(res: TheoryTable):
    recs = res.records()
    xs = [r["gamma"] for r in recs]
    series = [Series(c, xs, [r[c] for r in recs], dashed=(c != "pr"))
              for c in ("pr", "k_ratio", "cis_ratio_opt_k")]
    svg = svg_line_plot(series, f"d={res.d}", "gamma", "ratio")
    return {"theory.csv": csv_text(res.columns, recs), "theory.svg": svg}


def render(result) -> dict[str, str]:
    """Map file names to contents for a study result."""
    if not result.records():
        raise OutputError("study produced no rows; nothing written")
    if isinstance(result, RatioCurve):
        return _ratio_files(result)
    if isinstance(result, RateCheck):
        return _rate_files(result)
    if isinstance(result, RealDataResult):
        return _real_files(result)
    if isinstance(result, TheoryTable):
        return _theory_files(result)
    if isinstance(result, PredictionTable):
        return {"predictions.csv": csv_text(result.columns, result.records())}
    raise OutputError(f"cannot emit a {type(result).__name__}")


def write_files(files: dict[str, str], out_dir) -> list[Path]:
    """Write every file atomically: all temporaries first, then renames."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory {out}: {exc}") from exc
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", suffix=".tmp", dir=out)
            staged.append((tmp, out / name))
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
    except OSError as exc:
        for tmp, _ in staged:
            Path(tmp).unlink(missing_ok=True)
        raise OutputError(f"writing to {out} failed: {exc}") from exc
    placed = []
    try:
        for tmp, final in staged:
            os.replace(tmp, final)
            placed.append(final)
    except OSError as exc:
        for path in placed + [Path(tmp) for tmp, _ in staged]:
            path.unlink(missing_ok=True)
        raise OutputError(f"writing to {out} failed: {exc}") from exc
    return placed


def emit_outputs(result, out_dir, extra_files: dict[str, str] | None = None) -> list[Path]:
    """Write the CSV and SVG files for ``result`` into ``out_dir``."""
    files = render(result)
    if extra_files:
        files.update(extra_files)
    return write_files(files, out_dir)
