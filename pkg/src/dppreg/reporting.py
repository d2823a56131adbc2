"""Byte-deterministic CSV and SVG writers."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(blob.encode("ascii")).hexdigest()


def fmt(value) -> str:
    """Shortest round-trip text for numbers; booleans as ``true``/``false``."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(value)


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence], meta: dict) -> Path:
    """Write a metadata comment line, a header and the rows (``\\n`` line endings)."""
    buf = io.StringIO()
    buf.write("# " + " ".join(f"{k}={fmt(v)}" for k, v in meta.items()) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(buf.getvalue().encode("utf-8"))
    return path


def read_csv(path: Path):
    """Return ``(meta_line, header, rows)`` of a file written by :func:`write_csv`."""
    lines = Path(path).read_text().splitlines()
    rows = list(csv.reader(lines[1:]))
    return lines[0], rows[0], rows[1:]


def _tick(v: float) -> str:
    s = f"{v:.3g}"
    return "0" if s in ("-0", "0") else s


def write_svg(path: Path, x, y, title: str = "", step: bool = False, width: int = 640, height: int = 400) -> Path:
    """Single polyline plot with axes and five ticks per axis (SVG 1.1).

    ``step=True`` draws the curve as a staircase (hold each value until the
    next sample) so discontinuous fields are not bridged by sloped segments.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    ml, mr, mt, mb = 60, 20, 30, 40
    pw, ph = width - ml - mr, height - mt - mb
    x0, x1 = float(x.min()), float(x.max())
    y0, y1 = float(y.min()), float(y.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def sx(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return mt + ph - (v - y0) / (y1 - y0) * ph

    if step:
        px = np.repeat(x, 2)[1:]
        py = np.repeat(y, 2)[:-1]
    else:
        px, py = x, y
    pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(px, py))

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>',
    ]
    for k in range(5):
        tx = x0 + (x1 - x0) * k / 4
        ty = y0 + (y1 - y0) * k / 4
        out.append(f'<line x1="{sx(tx):.2f}" y1="{mt + ph}" x2="{sx(tx):.2f}" y2="{mt + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{sx(tx):.2f}" y="{mt + ph + 18}" font-size="11" text-anchor="middle">{_tick(tx)}</text>')
        out.append(f'<line x1="{ml - 5}" y1="{sy(ty):.2f}" x2="{ml}" y2="{sy(ty):.2f}" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{sy(ty) + 4:.2f}" font-size="11" text-anchor="end">{_tick(ty)}</text>')
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="18" font-size="13" text-anchor="middle">{title}</text>')
    out.append(f'<polyline fill="none" stroke="#1f4e9c" stroke-width="1.5" points="{pts}"/>')
    out.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(("\n".join(out) + "\n").encode("utf-8"))
    return path
