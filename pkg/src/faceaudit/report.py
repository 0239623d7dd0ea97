"""Audit report serialization: canonical JSON, CSV histogram sidecars, SVG plots.

Output is byte-stable: keys are sorted, floats carry 6 significant digits,
and SVG coordinates are printed with fixed precision. Non-finite numbers are
rejected rather than written.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from . import __version__
from .biomet import Histogram
from .errors import ReportError

SCHEMA = "faceaudit/1"
FORMATS = ("json", "csv", "svg")
CANVAS_W, CANVAS_H = 800, 500
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 60, 20, 30, 50
PLOT_W = CANVAS_W - MARGIN_L - MARGIN_R
PLOT_H = CANVAS_H - MARGIN_T - MARGIN_B
SERIES_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


@dataclass
class AuditReport:
    toolkit_version: str = __version__
    inputs: dict = field(default_factory=dict)  # label -> {"path": str, "sha256": hex}
    seeds: dict = field(default_factory=dict)
    timestamp: str = ""
    sections: dict = field(default_factory=dict)
    # histogram group name -> series name -> Histogram
    histograms: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "toolkit_version": self.toolkit_version,
            "inputs": self.inputs,
            "seeds": self.seeds,
            "timestamp": self.timestamp,
            "sections": self.sections,
            "histograms": {
                name: {s: histogram_to_dict(h) for s, h in series.items()}
                for name, series in self.histograms.items()
            },
        }


def histogram_to_dict(h: Histogram) -> dict:
    return {"bin_edges": h.bin_edges.tolist(), "counts": h.counts.tolist(), "n_total": h.n_total}


def histogram_from_dict(d: Mapping) -> Histogram:
    return Histogram(
        bin_edges=np.asarray(d["bin_edges"], dtype=np.float64),
        counts=np.asarray(d["counts"], dtype=np.int64),
        n_total=int(d["n_total"]),
    )


def report_from_dict(d: Mapping) -> AuditReport:
    if d.get("schema") != SCHEMA:
        raise ReportError("bad-schema", f"expected schema {SCHEMA!r}, got {d.get('schema')!r}")
    return AuditReport(
        toolkit_version=d.get("toolkit_version", ""),
        inputs=dict(d.get("inputs", {})),
        seeds=dict(d.get("seeds", {})),
        timestamp=d.get("timestamp", ""),
        sections=dict(d.get("sections", {})),
        histograms={
            name: {s: histogram_from_dict(h) for s, h in series.items()}
            for name, series in d.get("histograms", {}).items()
        },
    )


def to_jsonable(obj, path: str = "$"):
    """Convert dataclasses, numpy values and containers to canonical JSON types."""
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise ReportError("non-finite", f"non-finite value {x} at {path}")
        x = float(f"{x:.6g}")
        return 0.0 if x == 0 else x
    if isinstance(obj, Histogram):
        return to_jsonable(histogram_to_dict(obj), path)
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name), f"{path}.{f.name}") for f in dataclasses.fields(obj)}
    if isinstance(obj, Mapping):
        return {str(k): to_jsonable(v, f"{path}.{k}") for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v, f"{path}[{i}]") for i, v in enumerate(obj.tolist())]
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v, f"{path}[{i}]") for i, v in enumerate(obj)]
    raise ReportError("unserializable", f"cannot serialize {type(obj).__name__} at {path}")


def canonical_json(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def report_timestamp() -> str:
    """UTC ISO-8601 timestamp; honours SOURCE_DATE_EPOCH for reproducible output."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        when = dt.datetime.fromtimestamp(int(epoch), tz=dt.timezone.utc)
    else:
        when = dt.datetime.now(tz=dt.timezone.utc).replace(microsecond=0)
    return when.strftime("%Y-%m-%dT%H:%M:%SZ")


def histogram_csv(series: Mapping[str, Histogram]) -> str:
    """One row per bin: bin_lo, bin_hi, then count_<series> per series."""
    names = list(series)
    hists = [series[n] for n in names]
    _check_compatible(hists)
    edges = hists[0].bin_edges
    lines = [",".join(["bin_lo", "bin_hi"] + [f"count_{n}" for n in names])]
    for b in range(len(edges) - 1):
        cells = [_fmt(edges[b]), _fmt(edges[b + 1])] + [str(int(h.counts[b])) for h in hists]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _fmt(x: float) -> str:
    x = float(f"{float(x):.6g}")
    return repr(0.0 if x == 0 else x)


def _check_compatible(hists: Sequence[Histogram]) -> None:
    first = hists[0].bin_edges
    for h in hists[1:]:
        if h.bin_edges.shape != first.shape or not np.array_equal(h.bin_edges, first):
            raise ReportError("bin-mismatch", "histograms have different bin edges")


def render_histograms(
    genuine: Histogram,
    impostor: Histogram,
    markers: Iterable[Mapping] = (),
    title: str = "",
    labels: tuple[str, str] = ("genuine", "impostor"),
) -> str:
    """Overlaid density-normalized histograms with labelled vertical markers.

    Markers are ``{"label": str, "threshold": float}`` mappings; the x axis
    spans the histograms' bin range.
    """
    return render_series({labels[0]: genuine, labels[1]: impostor}, markers, title)


def render_series(series: Mapping[str, Histogram], markers: Iterable[Mapping] = (), title: str = "") -> str:
    hists = list(series.values())
    _check_compatible(hists)
    edges = hists[0].bin_edges
    lo, hi = float(edges[0]), float(edges[-1])
    densities = [h.density() for h in hists]
    ymax = max((float(d.max()) for d in densities if d.size), default=0.0)

    def x_of(v: float) -> float:
        return MARGIN_L + (v - lo) / (hi - lo) * PLOT_W

    def y_of(d: float) -> float:
        return MARGIN_T + PLOT_H - (d / ymax * PLOT_H if ymax > 0 else 0.0)

    def f(v: float) -> str:
        return f"{v:.2f}"

    x0, y0 = MARGIN_L, MARGIN_T + PLOT_H
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS_W}" height="{CANVAS_H}" '
        f'viewBox="0 0 {CANVAS_W} {CANVAS_H}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{CANVAS_W}" height="{CANVAS_H}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{CANVAS_W / 2:.2f}" y="18" text-anchor="middle">{escape(title)}</text>')
    for s, (name, dens) in enumerate(zip(series, densities)):
        color = SERIES_COLORS[s % len(SERIES_COLORS)]
        out.append(f'<g class="series" data-name={quoteattr(name)} fill="{color}" fill-opacity="0.5">')
        for b, d in enumerate(dens):
            if d <= 0:
                continue
            xa, xb = x_of(edges[b]), x_of(edges[b + 1])
            ya = y_of(d)
            out.append(f'<rect x="{f(xa)}" y="{f(ya)}" width="{f(xb - xa)}" height="{f(y0 - ya)}"/>')
        out.append("</g>")
    # axes and ticks
    out.append(f'<line x1="{x0}" y1="{y0}" x2="{x0 + PLOT_W}" y2="{y0}" stroke="black"/>')
    out.append(f'<line x1="{x0}" y1="{MARGIN_T}" x2="{x0}" y2="{y0}" stroke="black"/>')
    for i in range(5):
        v = lo + (hi - lo) * i / 4
        out.append(f'<line x1="{f(x_of(v))}" y1="{y0}" x2="{f(x_of(v))}" y2="{y0 + 5}" stroke="black"/>')
        out.append(f'<text x="{f(x_of(v))}" y="{y0 + 18}" text-anchor="middle">{v:g}</text>')
    out.append(f'<text x="{f(x0 + PLOT_W / 2)}" y="{CANVAS_H - 8}" text-anchor="middle">cosine similarity</text>')
    out.append(f'<text x="14" y="{f(MARGIN_T + PLOT_H / 2)}" text-anchor="middle" '
               f'transform="rotate(-90 14 {f(MARGIN_T + PLOT_H / 2)})">density</text>')
    for m in markers:
        t = float(m["threshold"])
        if not math.isfinite(t):
            raise ReportError("non-finite", f"marker {m.get('label')!r} has a non-finite threshold")
        x = x_of(min(max(t, lo), hi))
        out.append(f'<g class="marker"><line x1="{f(x)}" y1="{MARGIN_T}" x2="{f(x)}" y2="{y0}" '
                   f'stroke="black" stroke-dasharray="4 3"/>')
        out.append(f'<text x="{f(x + 3)}" y="{MARGIN_T + 12}">{escape(str(m["label"]))}</text></g>')
    legend_y = MARGIN_T + 4
    for s, name in enumerate(series):
        color = SERIES_COLORS[s % len(SERIES_COLORS)]
        lx = x0 + PLOT_W - 120
        ly = legend_y + 16 * s
        out.append(f'<rect x="{lx}" y="{ly}" width="10" height="10" fill="{color}" fill-opacity="0.5"/>')
        out.append(f'<text x="{lx + 14}" y="{ly + 9}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _markers_for(report: AuditReport, name: str) -> list[dict]:
    section = report.sections.get(name, {})
    out = []
    for label, key in (("EER", "eer_threshold"), ("FMR100", "fmr100_threshold"), ("FMR1000", "fmr1000_threshold")):
        value = section.get(key) if isinstance(section, Mapping) else None
        if isinstance(value, (int, float)) and math.isfinite(value):
            out.append({"label": label, "threshold": value})
    if isinstance(section, Mapping) and isinstance(section.get("threshold"), (int, float)):
        out.append({"label": "tail threshold", "threshold": section["threshold"]})
    return out


def emit(report: AuditReport, formats: Iterable[str], out_dir, stem: str = "report") -> list[Path]:
    """Write the report; all content is rendered before any file is touched."""
    formats = set(formats)
    unknown = formats - set(FORMATS)
    if unknown:
        raise ReportError("bad-format", f"unknown formats: {sorted(unknown)}")
    out_dir = Path(out_dir)
    files: list[tuple[Path, str]] = []
    if "json" in formats:
        files.append((out_dir / f"{stem}.json", canonical_json(report.to_dict())))
    for name in sorted(report.histograms):
        series = report.histograms[name]
        if "csv" in formats:
            files.append((out_dir / f"{stem}.{name}.csv", histogram_csv(series)))
        if "svg" in formats:
            files.append((out_dir / f"{stem}.{name}.svg", render_series(series, _markers_for(report, name), name)))
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for path, text in files:
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(text.encode("utf-8"))
        os.replace(tmp, path)
        written.append(path)
    return written
