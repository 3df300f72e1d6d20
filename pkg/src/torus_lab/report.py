"""CSV tables, run manifests and a dependency-free SVG log-log plot."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import math
import os
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__

SAMPLES_HEADER = ["sample_id", "seed", "N", "R", "Psi", "err", "normalized_err"]
FIT_HEADER = ["slope", "intercept", "r_squared", "n_points"]
PAIRS_HEADER = ["m", "n", "estimate", "radius", "psi_product", "ratio"]


def fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, complex):
        return f"{v.real!r}{v.imag:+}j"
    return str(v)


def csv_bytes(header: Sequence[str], rows: Iterable[Sequence]) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue().encode("utf-8")


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def timestamp() -> str:
    """UTC ISO time; honours SOURCE_DATE_EPOCH for reproducible manifests."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = (_dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc) if epoch
            else _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0))
    return when.isoformat().replace("+00:00", "Z")


class RunWriter:
    """Writes manifest.json first, then result files, then completes the manifest."""

    def __init__(self, out: str | Path, command: str, config_bytes: bytes, seed, planned: Sequence[str]):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest = {
            "tool": "torus-lab",
            "version": __version__,
            "command": command,
            "config_digest": sha256(config_bytes),
            "seed": seed,
            "timestamp": timestamp(),
            "status": "running",
            "outputs": {name: None for name in planned},
        }
        self._dump()

    def _dump(self) -> None:
        text = json.dumps(self.manifest, indent=2, sort_keys=True) + "\n"
        (self.out / "manifest.json").write_text(text, encoding="utf-8")

    def write(self, name: str, data: bytes) -> Path:
        path = self.out / name
        path.write_bytes(data)
        self.manifest["outputs"][name] = sha256(data)
        return path

    def finish(self) -> None:
        self.manifest["status"] = "complete"
        self._dump()


def check_manifest(out: str | Path, config_bytes: bytes) -> list[str]:
    """Problems found comparing a results directory with a config (empty list when consistent)."""
    path = Path(out) / "manifest.json"
    if not path.exists():
        return [f"{path} not found"]
    man = json.loads(path.read_text(encoding="utf-8"))
    problems = []
    if man.get("config_digest") != sha256(config_bytes):
        problems.append("config digest differs from the one recorded in manifest.json")
    if man.get("status") != "complete":
        problems.append("run did not complete")
    for name, digest in (man.get("outputs") or {}).items():
        f = Path(out) / name
        if not f.exists():
            problems.append(f"missing output {name}")
        elif digest is not None and sha256(f.read_bytes()) != digest:
            problems.append(f"output {name} changed since the run")
    return problems


# ---------------------------------------------------------------------------
# SVG

WIDTH, HEIGHT = 960, 640
MARGIN = 70
PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]


def _ticks(lo: float, hi: float) -> list[int]:
    return list(range(math.floor(lo), math.ceil(hi) + 1))


def loglog_svg(series: Sequence[Sequence[tuple[float, float]]], reference_slope: float,
               xlabel: str = "Psi(n)", ylabel: str = "|R - Psi|", title: str = "") -> str:
    """One polyline per series on log10-log10 axes, plus a dashed reference line."""
    pts = [(x, y) for s in series for x, y in s if x > 0 and y > 0]
    if not pts:
        pts = [(1.0, 1.0), (10.0, 10.0)]
    lx = [math.log10(x) for x, _ in pts]
    ly = [math.log10(y) for _, y in pts]
    x0, x1 = math.floor(min(lx)), math.ceil(max(lx))
    y0, y1 = math.floor(min(ly)), math.ceil(max(ly))
    x1 = max(x1, x0 + 1)
    y1 = max(y1, y0 + 1)

    def X(v: float) -> float:
        return MARGIN + (math.log10(v) - x0) / (x1 - x0) * (WIDTH - 2 * MARGIN)

    def Y(v: float) -> float:
        return HEIGHT - MARGIN - (math.log10(v) - y0) / (y1 - y0) * (HEIGHT - 2 * MARGIN)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<g class="axes" stroke="black" stroke-width="1">'
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}"/>'
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}"/></g>',
    ]
    for e in _ticks(x0, x1):
        px = X(10.0**e)
        out.append(f'<text x="{px:.2f}" y="{HEIGHT - MARGIN + 20}" font-size="12" text-anchor="middle">1e{e}</text>')
    for e in _ticks(y0, y1):
        py = Y(10.0**e)
        out.append(f'<text x="{MARGIN - 8}" y="{py:.2f}" font-size="12" text-anchor="end">1e{e}</text>')
    out.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 20}" font-size="14" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="20" y="{HEIGHT / 2}" font-size="14" text-anchor="middle" '
               f'transform="rotate(-90 20 {HEIGHT / 2})">{ylabel}</text>')
    if title:
        out.append(f'<text x="{WIDTH / 2}" y="30" font-size="16" text-anchor="middle">{title}</text>')
    for i, s in enumerate(series):
        coords = " ".join(f"{X(x):.2f},{Y(y):.2f}" for x, y in s if x > 0 and y > 0)
        out.append(f'<polyline class="sample" fill="none" stroke="{PALETTE[i % len(PALETTE)]}" '
                   f'stroke-opacity="0.5" points="{coords}"/>')
    # reference y = c x^slope anchored at the geometric centre of the data
    cx = 10 ** ((min(lx) + max(lx)) / 2)
    cy = 10 ** ((min(ly) + max(ly)) / 2)
    xa, xb = 10.0**x0, 10.0**x1
    ya, yb = cy * (xa / cx) ** reference_slope, cy * (xb / cx) ** reference_slope
    out.append(f'<polyline class="reference" fill="none" stroke="black" stroke-dasharray="6,4" '
               f'points="{X(xa):.2f},{Y(ya):.2f} {X(xb):.2f},{Y(yb):.2f}"/>')
    out.append(f'<text x="{WIDTH - MARGIN}" y="{MARGIN}" font-size="12" text-anchor="end">'
               f'dashed: slope {reference_slope:.4g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
