"""Deterministic JSON / JSON-lines / CSV writers and a minimal SVG line plot."""
from __future__ import annotations

import csv
import json
import math
from enum import Enum
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__

SCHEMA = "geolab/1"


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    if x == int(x) and abs(x) < 1e16:
        return f"{x:.1f}"
    return format(x, ".17g")


def dumps(obj) -> str:
    """JSON text with floats at 17 significant digits and sorted keys."""
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, Enum):
        return dumps(obj.value)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ", ".join(f"{json.dumps(k)}: {dumps(v)}" for k, v in items) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    if hasattr(obj, "to_dict"):
        return dumps(obj.to_dict())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_jsonl(path, records: Iterable) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(dumps(rec) + "\n")
            n += 1
    return n


def read_jsonl(path) -> List[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def make_report(experiment: str, params: dict, table, verdict: bool, slack, config: dict,
                extra: Optional[dict] = None) -> dict:
    rep = {
        "experiment": experiment,
        "params": params,
        "table": table,
        "verdict": "PASS" if verdict else "FAIL",
        "slack": slack,
        "schema": SCHEMA,
        "version": __version__,
        "config": config,
    }
    if extra:
        rep.update(extra)
    return rep


def write_report(path, report: dict) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(report) + "\n")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt_float(float(v)).strip('"') if isinstance(v, (float, np.floating)) else v
                        for v in row])


def write_svg(path, series: Sequence[Tuple[str, Sequence[Tuple[float, float]]]],
              width: int = 480, height: int = 320, xlabel: str = "", ylabel: str = "") -> None:
    """Polylines on shared axes; no text layout beyond axis labels and a legend."""
    pts = [p for _, s in series for p in s if all(map(math.isfinite, p))]
    if not pts:
        raise ValueError("nothing to plot")
    xs, ys = [p[0] for p in pts], [p[1] for p in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    m = 40

    def sx(x):
        return m + (x - x0) / (x1 - x0) * (width - 2 * m)

    def sy(y):
        return height - m - (y - y0) / (y1 - y0) * (height - 2 * m)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<line x1="{m}" y1="{height - m}" x2="{width - m}" y2="{height - m}" stroke="black"/>',
           f'<line x1="{m}" y1="{m}" x2="{m}" y2="{height - m}" stroke="black"/>',
           f'<text x="{width / 2:.1f}" y="{height - 8}" font-size="12">{xlabel}</text>',
           f'<text x="4" y="{m - 12}" font-size="12">{ylabel}</text>',
           f'<text x="{m}" y="{height - m + 14}" font-size="10">{x0:.4g}</text>',
           f'<text x="{width - m}" y="{height - m + 14}" font-size="10">{x1:.4g}</text>',
           f'<text x="2" y="{height - m}" font-size="10">{y0:.4g}</text>',
           f'<text x="2" y="{m}" font-size="10">{y1:.4g}</text>']
    for k, (name, s) in enumerate(series):
        c = colors[k % len(colors)]
        pl = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in s if math.isfinite(x) and math.isfinite(y))
        out.append(f'<polyline fill="none" stroke="{c}" points="{pl}"/>')
        out.append(f'<text x="{width - m - 100}" y="{m + 14 * k}" font-size="11" fill="{c}">{name}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


def census_record(g) -> dict:
    rep, att = g.axis
    return {
        "key": g.key,
        "length": g.length,
        "trace": g.trace,
        "primitive": g.primitive,
        "power": g.power,
        "axis": [rep.to_json(), att.to_json()],
        "matrix": [list(r) for r in g.cls.representative],
    }
