# core/reports.py - CSV tables and SVG bound plots for experiment results
import csv
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path

from jinja2 import Environment, FileSystemLoader, select_autoescape

logger = logging.getLogger(__name__)

TEMPLATE_DIR = Path(__file__).resolve().parent.parent / "templates"
CSV_HEADER = ("pair", "direction", "quantity", "value", "aux")
MC_PREFIX = "MC@"
QUADFAIL_SUFFIX = "!quadfail"

# bound name -> SVG stroke style
LINE_STYLES = {
    "CELB": ("solid", ""),
    "CEUB": ("solid", ""),
    "CEALB": ("dashed", "6,4"),
    "CEAUB": ("dashed", "6,4"),
    "MEUB": ("dotted", "2,3"),
}
LINE_COLOURS = {"CELB": "#1f4e9c", "CEUB": "#1f4e9c", "CEALB": "#c0392b", "CEAUB": "#c0392b", "MEUB": "#000000"}

WIDTH, HEIGHT = 640, 400
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 110, 40, 50


@dataclass(frozen=True)
class ResultRow:
    pair_name: str
    direction: str
    quantity: str
    value: float
    aux: float = 0.0

    @property
    def sort_key(self):
        return (self.pair_name, self.direction, self.quantity)


def format_number(value):
    return f"{value:.12g}"


def emit_csv(rows, path):
    """Write rows sorted by (pair, direction, quantity) with 12 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in sorted(rows, key=lambda r: r.sort_key):
            writer.writerow((row.pair_name, row.direction, row.quantity,
                             format_number(row.value), format_number(row.aux)))
    logger.info(f"✅ Wrote {len(rows)} rows to {path}")
    return path


def read_csv(path):
    """Rows back from a file written by emit_csv."""
    with Path(path).open(newline="", encoding="utf-8") as handle:
        return [
            ResultRow(r["pair"], r["direction"], r["quantity"], float(r["value"]), float(r["aux"]))
            for r in csv.DictReader(handle)
        ]


# ----------------------------------------------------------------------------
# SVG
# ----------------------------------------------------------------------------

def _environment():
    return Environment(
        loader=FileSystemLoader(str(TEMPLATE_DIR)),
        autoescape=select_autoescape(["svg", "html", "xml"]),
        keep_trailing_newline=True,
        trim_blocks=True,
        lstrip_blocks=True,
    )


def _fmt(value):
    return f"{value:.3f}"


def _slug(text):
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", text).strip("_") or "plot"


class PlotGeometry:
    """Maps values and sample sizes onto the SVG canvas."""

    def __init__(self, lows, highs, sizes):
        lo, hi = min(lows), max(highs)
        pad = 0.05 * (hi - lo) if hi > lo else max(abs(lo) * 0.05, 0.05)
        self.y_min, self.y_max = lo - pad, hi + pad
        self.sizes = sorted(sizes)
        self.left, self.right = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
        self.top, self.bottom = MARGIN_TOP, HEIGHT - MARGIN_BOTTOM

    def y(self, value):
        frac = (value - self.y_min) / (self.y_max - self.y_min)
        return self.bottom - frac * (self.bottom - self.top)

    def x(self, size):
        if len(self.sizes) < 2:
            return 0.5 * (self.left + self.right)
        lo, hi = math.log10(self.sizes[0]), math.log10(self.sizes[-1])
        frac = (math.log10(size) - lo) / (hi - lo)
        inset = 0.08 * (self.right - self.left)
        return self.left + inset + frac * (self.right - self.left - 2 * inset)

    def y_ticks(self, count=5):
        step = (self.y_max - self.y_min) / (count - 1)
        return [{"y": _fmt(self.y(self.y_min + i * step)), "label": _fmt(self.y_min + i * step)} for i in range(count)]


def _plot_context(pair, direction, rows):
    bounds = {r.quantity: r for r in rows if r.quantity in LINE_STYLES and math.isfinite(r.value)}
    mc = sorted(
        (int(r.quantity[len(MC_PREFIX):]), r)
        for r in rows
        if r.quantity.startswith(MC_PREFIX) and not r.quantity.endswith(QUADFAIL_SUFFIX) and math.isfinite(r.value)
    )
    improvement = next((r.value for r in rows if r.quantity == "improvement%"), None)
    lows = [r.value for r in bounds.values()] + [r.value - r.aux for _, r in mc]
    highs = [r.value for r in bounds.values()] + [r.value + r.aux for _, r in mc]
    if not lows:
        return None
    geo = PlotGeometry(lows, highs, [s for s, _ in mc])
    lines = []
    for name in ("CELB", "CEUB", "CEALB", "CEAUB", "MEUB"):
        if name in bounds:
            style, dash = LINE_STYLES[name]
            lines.append({
                "name": name,
                "style": style,
                "dash": dash,
                "colour": LINE_COLOURS[name],
                "y": _fmt(geo.y(bounds[name].value)),
                "value": _fmt(bounds[name].value),
            })
    bars = []
    for size, row in mc:
        x = geo.x(size)
        bars.append({
            "size": size,
            "x": _fmt(x),
            "x_lo": _fmt(x - 5),
            "x_hi": _fmt(x + 5),
            "y_mean": _fmt(geo.y(row.value)),
            "y_lo": _fmt(geo.y(row.value - row.aux)),
            "y_hi": _fmt(geo.y(row.value + row.aux)),
        })
    return {
        "title": f"{pair} ({direction})",
        "improvement": None if improvement is None else f"{improvement:.1f}",
        "width": WIDTH,
        "height": HEIGHT,
        "left": _fmt(geo.left),
        "right": _fmt(geo.right),
        "top": _fmt(geo.top),
        "bottom": _fmt(geo.bottom),
        "label_x": _fmt(geo.right + 8),
        "tick_x": _fmt(geo.left - 4),
        "lines": lines,
        "bars": bars,
        "y_ticks": geo.y_ticks(),
    }


def emit_plot(rows, out_dir):
    """One SVG per (pair, direction): bound lines plus MC error bars. Returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    template = _environment().get_template("kl_plot.svg")
    groups = {}
    for row in rows:
        groups.setdefault((row.pair_name, row.direction), []).append(row)
    written = []
    for (pair, direction), group in sorted(groups.items()):
        context = _plot_context(pair, direction, group)
        if context is None:
            logger.warning(f"⚠️ Nothing to plot for {pair} ({direction})")
            continue
        path = out_dir / f"{_slug(pair)}_{_slug(direction)}.svg"
        path.write_text(template.render(**context), encoding="utf-8")
        written.append(path)
    logger.info(f"✅ Wrote {len(written)} plots to {out_dir}")
    return written
