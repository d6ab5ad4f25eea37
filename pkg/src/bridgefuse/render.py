"""Gridded feature maps and the plot rasters emitted by the CLI.

Plots are drawn with Pillow onto a white canvas.  Each one carries an
:class:`AxisCalibration` describing its plot area, so rendered contour maps
can be fed straight back into box detection and annotated images can place
deck coordinates on pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from . import kernels
from .errors import UsageError
from .geometry import LaneLayout, RegionSet
from .imaging import AxisCalibration, PixelBox, save_png
from .records import DataBox, FeaturePoint

# low values are red (defect-prone), high values blue
RAMP_STOPS = (
    (220, 20, 20),  # red
    (245, 130, 20),  # orange
    (250, 230, 30),  # yellow
    (160, 210, 50),  # yellow-green
    (40, 170, 70),  # green
    (30, 190, 210),  # cyan
    (30, 60, 200),  # blue
)
CONTOUR_LEVELS = 14
PX_PER_FT = 20
MARGIN = (70, 30, 110, 50)  # left, top, right, bottom

WHITE = (255, 255, 255)
BLACK = (0, 0, 0)
LANE_GREY = (70, 70, 70)
BACKGROUND_GREY = (200, 200, 200)
IE_RED = (220, 30, 30)
USW_PURPLE = (140, 60, 190)
USW_BLUE = (30, 80, 220)
REGION_GREEN = (30, 160, 60)
BOX_BLUE = (20, 40, 230)


# ---------------------------------------------------------------------------
# interpolation


@dataclass(frozen=True, eq=False)
class GridField:
    """Values on grid nodes ``(ys[i], xs[j])``; NaN marks an empty node."""

    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray  # (len(ys), len(xs))
    cell: float

    @property
    def extent(self) -> tuple[float, float, float, float]:
        return (float(self.xs[0]), float(self.xs[-1]), float(self.ys[0]), float(self.ys[-1]))

    def node_value(self, x: float, y: float) -> float:
        """Value of the node nearest to ``(x, y)``."""
        j = int(np.clip(round((x - self.xs[0]) / self.cell), 0, self.xs.shape[0] - 1))
        i = int(np.clip(round((y - self.ys[0]) / self.cell), 0, self.ys.shape[0] - 1))
        return float(self.values[i, j])

    def sample(self, x, y) -> np.ndarray:
        """Bilinear sample; falls back to the nearest node next to empty nodes."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        fx = np.clip((x - self.xs[0]) / self.cell, 0.0, self.xs.shape[0] - 1.0)
        fy = np.clip((y - self.ys[0]) / self.cell, 0.0, self.ys.shape[0] - 1.0)
        j0 = np.minimum(np.floor(fx).astype(np.int64), max(self.xs.shape[0] - 2, 0))
        i0 = np.minimum(np.floor(fy).astype(np.int64), max(self.ys.shape[0] - 2, 0))
        j1 = np.minimum(j0 + 1, self.xs.shape[0] - 1)
        i1 = np.minimum(i0 + 1, self.ys.shape[0] - 1)
        tx = fx - j0
        ty = fy - i0
        v = self.values
        bil = (
            v[i0, j0] * (1 - tx) * (1 - ty)
            + v[i0, j1] * tx * (1 - ty)
            + v[i1, j0] * (1 - tx) * ty
            + v[i1, j1] * tx * ty
        )
        near = v[np.rint(fy).astype(np.int64), np.rint(fx).astype(np.int64)]
        return np.where(np.isfinite(bil), bil, near)


def _axis_nodes(lo: float, hi: float, cell: float) -> np.ndarray:
    n = int(math.floor((hi - lo) / cell + 1e-9)) + 1
    return lo + cell * np.arange(n)


def interpolate_grid(
    points: Sequence[FeaturePoint],
    cell: float,
    extent: tuple[float, float, float, float] | None = None,
    power: float = 2.0,
    radius_cells: float = 3.0,
) -> GridField:
    """Inverse-distance weighting onto grid nodes spaced ``cell`` feet apart.

    Nodes with no sample within ``radius_cells * cell`` are left empty (NaN);
    a node that coincides with a sample takes that sample's value exactly.
    ``extent`` defaults to the points' bounding box.
    """
    if not (cell > 0 and math.isfinite(cell)):
        raise UsageError(f"cell size must be > 0, got {cell!r}")
    if not points:
        raise UsageError("interpolation needs at least one point")
    px = np.array([p.x for p in points], dtype=np.float64)
    py = np.array([p.y for p in points], dtype=np.float64)
    pv = np.array([p.value for p in points], dtype=np.float64)
    if extent is None:
        extent = (float(px.min()), float(px.max()), float(py.min()), float(py.max()))
    x0, x1, y0, y1 = extent
    gx = _axis_nodes(x0, x1, cell)
    gy = _axis_nodes(y0, y1, cell)
    vals = kernels.idw(px, py, pv, gx, gy, float(radius_cells * cell), float(power))
    return GridField(gx, gy, vals, float(cell))


# ---------------------------------------------------------------------------
# colour


def ramp_color(t) -> np.ndarray:
    """Linear interpolation along :data:`RAMP_STOPS` for ``t`` in [0, 1]."""
    t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
    stops = np.array(RAMP_STOPS, dtype=np.float64)
    pos = t * (len(RAMP_STOPS) - 1)
    i = np.minimum(np.floor(pos).astype(np.int64), len(RAMP_STOPS) - 2)
    f = (pos - i)[..., None]
    return np.rint(stops[i] * (1 - f) + stops[i + 1] * f).astype(np.uint8)


def level_colors(levels: int = CONTOUR_LEVELS) -> np.ndarray:
    """One colour per filled band, taken at the band's midpoint."""
    return ramp_color((np.arange(levels) + 0.5) / levels)


def quantize(values: np.ndarray, vmin: float, vmax: float, levels: int = CONTOUR_LEVELS) -> np.ndarray:
    if vmax <= vmin:
        return np.zeros(values.shape, dtype=np.int64)
    t = (values - vmin) / (vmax - vmin)
    return np.clip(np.floor(t * levels), 0, levels - 1).astype(np.int64)


# ---------------------------------------------------------------------------
# canvas


def _font():
    return ImageFont.load_default()


def _nice_step(span: float, target: int = 6) -> float:
    raw = span / target
    mag = 10.0 ** math.floor(math.log10(raw))
    for m in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= m * mag:
            return m * mag
    return 10.0 * mag


def _label(v: float) -> str:
    return f"{v:.6g}"


class Canvas:
    """A white image with a framed plot area mapped to a deck extent."""

    def __init__(
        self,
        extent: tuple[float, float, float, float],
        px_per_ft: float = PX_PER_FT,
        title: str = "",
    ):
        x0, x1, y0, y1 = extent
        if not (x1 > x0 and y1 > y0):
            raise UsageError(f"plot extent {extent} is degenerate")
        left, top, right, bottom = MARGIN
        w = max(1, int(round((x1 - x0) * px_per_ft)))
        h = max(1, int(round((y1 - y0) * px_per_ft)))
        self.cal = AxisCalibration(PixelBox(left, top, w, h), (x0, x1), (y0, y1), True)
        self.img = Image.new("RGB", (left + w + right, top + h + bottom), WHITE)
        self.draw = ImageDraw.Draw(self.img)
        self.title = title

    @property
    def plot_area(self) -> PixelBox:
        return self.cal.plot_area

    def paste_raster(self, raster: np.ndarray) -> None:
        pa = self.plot_area
        self.img.paste(Image.fromarray(raster), (pa.x, pa.y))

    def pixel_centres(self) -> tuple[np.ndarray, np.ndarray]:
        """Deck coordinates of every plot-area pixel centre, shape (h, w)."""
        pa = self.plot_area
        u = pa.x + np.arange(pa.w) + 0.5
        v = pa.y + np.arange(pa.h) + 0.5
        uu, vv = np.meshgrid(u, v)
        return self.cal.to_data(uu, vv)

    def to_px(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        return self.cal.to_pixel(x, y)

    def lanes(self, lanes: LaneLayout | None) -> None:
        if lanes is None:
            return
        pa = self.plot_area
        for yb in lanes.boundaries[1:-1]:
            _, v = self.to_px(0.0, yb)
            row = int(math.floor(float(v)))
            for u in range(pa.x, pa.x + pa.w, 10):
                self.draw.line([(u, row), (min(u + 5, pa.x + pa.w - 1), row)], fill=LANE_GREY)

    def points(self, pts: Sequence[FeaturePoint], color, radius: int = 2) -> None:
        if not pts:
            return
        us, vs = self.to_px([p.x for p in pts], [p.y for p in pts])
        for u, v in zip(np.atleast_1d(us).tolist(), np.atleast_1d(vs).tolist()):
            u, v = int(math.floor(u)), int(math.floor(v))
            self.draw.ellipse([u - radius, v - radius, u + radius, v + radius], fill=color)

    def region(self, region: RegionSet, fill=None, outline=None, opacity: int = 110) -> None:
        if region.is_empty:
            return
        if fill is not None:
            layer = Image.new("RGBA", self.img.size, (0, 0, 0, 0))
            ldraw = ImageDraw.Draw(layer)
            for poly in region.polygons:
                ldraw.polygon(self._ring_px(poly.exterior), fill=(*fill, opacity))
                for hole in poly.holes:
                    ldraw.polygon(self._ring_px(hole), fill=(0, 0, 0, 0))
            self.img = Image.alpha_composite(self.img.convert("RGBA"), layer).convert("RGB")
            self.draw = ImageDraw.Draw(self.img)
        if outline is not None:
            for poly in region.polygons:
                for ring in poly.rings():
                    pts = self._ring_px(ring)
                    self.draw.line(pts + pts[:1], fill=outline, width=2)

    def _ring_px(self, ring: np.ndarray) -> list[tuple[float, float]]:
        us, vs = self.to_px(ring[:, 0], ring[:, 1])
        return list(zip(np.asarray(us).tolist(), np.asarray(vs).tolist()))

    def boxes(self, boxes: Sequence[DataBox], color=BOX_BLUE) -> None:
        for b in boxes:
            ua, va = self.to_px(b.x_min, b.y_max)
            ub, vb = self.to_px(b.x_max, b.y_min)
            self.draw.rectangle([float(ua), float(va), float(ub), float(vb)], outline=color, width=2)

    def colorbar(self, vmin: float, vmax: float, levels: int = CONTOUR_LEVELS, label: str = "") -> None:
        pa = self.plot_area
        x = pa.x + pa.w + 25
        colors = level_colors(levels)
        for k in range(levels):
            # level 0 (low values) at the bottom
            y_hi = pa.y + pa.h * (levels - k - 1) / levels
            y_lo = pa.y + pa.h * (levels - k) / levels
            self.draw.rectangle([x, y_hi, x + 18, y_lo - 1], fill=tuple(int(c) for c in colors[k]))
        self.draw.rectangle([x - 1, pa.y - 1, x + 19, pa.y + pa.h], outline=BLACK)
        font = _font()
        self.draw.text((x + 23, pa.y - 4), _label(vmax), fill=BLACK, font=font)
        self.draw.text((x + 23, pa.y + pa.h - 8), _label(vmin), fill=BLACK, font=font)
        if label:
            self.draw.text((x - 2, pa.y + pa.h + 8), label, fill=BLACK, font=font)

    def frame(self) -> None:
        pa = self.plot_area
        font = _font()
        self.draw.rectangle([pa.x - 1, pa.y - 1, pa.x + pa.w, pa.y + pa.h], outline=BLACK)
        (x0, x1), (y0, y1) = self.cal.x_range, self.cal.y_range
        step = _nice_step(x1 - x0)
        for k in range(math.ceil(x0 / step - 1e-9), math.floor(x1 / step + 1e-9) + 1):
            u, _ = self.to_px(k * step, y0)
            u = float(u)
            self.draw.line([(u, pa.y + pa.h), (u, pa.y + pa.h + 4)], fill=BLACK)
            self.draw.text((u - 6, pa.y + pa.h + 7), _label(k * step), fill=BLACK, font=font)
        step = _nice_step(y1 - y0)
        for k in range(math.ceil(y0 / step - 1e-9), math.floor(y1 / step + 1e-9) + 1):
            _, v = self.to_px(x0, k * step)
            v = float(v)
            self.draw.line([(pa.x - 5, v), (pa.x - 1, v)], fill=BLACK)
            self.draw.text((pa.x - 40, v - 6), _label(k * step), fill=BLACK, font=font)
        self.draw.text((pa.x + pa.w // 2 - 15, pa.y + pa.h + 24), "x (ft)", fill=BLACK, font=font)
        self.draw.text((4, pa.y + pa.h // 2), "y (ft)", fill=BLACK, font=font)
        if self.title:
            self.draw.text((pa.x, 8), self.title, fill=BLACK, font=font)

    def array(self) -> np.ndarray:
        return np.array(self.img, dtype=np.uint8)

    def save(self, path: str | Path) -> AxisCalibration:
        save_png(self.array(), path)
        return self.cal


# ---------------------------------------------------------------------------
# plots


def contour_raster(
    field: GridField,
    canvas: Canvas,
    vmin: float,
    vmax: float,
    levels: int = CONTOUR_LEVELS,
) -> np.ndarray:
    """Filled-band raster for the canvas plot area; empty cells are grey."""
    xs, ys = canvas.pixel_centres()
    vals = field.sample(xs, ys)
    bands = quantize(np.where(np.isfinite(vals), vals, vmin), vmin, vmax, levels)
    raster = level_colors(levels)[bands]
    raster[~np.isfinite(vals)] = BACKGROUND_GREY
    return raster


def render_contour(
    field: GridField,
    out_path: str | Path,
    lanes: LaneLayout | None = None,
    vmin: float | None = None,
    vmax: float | None = None,
    extent: tuple[float, float, float, float] | None = None,
    title: str = "",
    unit: str = "",
) -> AxisCalibration:
    """Write a filled contour map and return its calibration."""
    finite = field.values[np.isfinite(field.values)]
    if vmin is None:
        vmin = float(finite.min()) if finite.size else 0.0
    if vmax is None:
        vmax = float(finite.max()) if finite.size else 1.0
    canvas = Canvas(extent or field.extent, title=title)
    canvas.paste_raster(contour_raster(field, canvas, vmin, vmax))
    canvas.lanes(lanes)
    canvas.frame()
    canvas.colorbar(vmin, vmax, label=unit)
    return canvas.save(out_path)


def render_scatter(
    all_points: Sequence[FeaturePoint],
    defects: Sequence[FeaturePoint],
    extent: tuple[float, float, float, float],
    out_path: str | Path,
    color=IE_RED,
    lanes: LaneLayout | None = None,
    title: str = "",
) -> AxisCalibration:
    """All survey points in grey, points below the threshold in ``color``."""
    canvas = Canvas(extent, title=title)
    canvas.points(all_points, BACKGROUND_GREY, radius=1)
    canvas.points(defects, color, radius=2)
    canvas.lanes(lanes)
    canvas.frame()
    return canvas.save(out_path)


def render_alpha_overlay(
    ie_shape: RegionSet,
    usw_shape: RegionSet,
    common: RegionSet,
    extent: tuple[float, float, float, float],
    out_path: str | Path,
    lanes: LaneLayout | None = None,
) -> AxisCalibration:
    canvas = Canvas(extent, title="alpha shapes: IE red, USW purple, common green")
    canvas.region(ie_shape, fill=IE_RED)
    canvas.region(usw_shape, fill=USW_PURPLE)
    canvas.region(common, fill=REGION_GREEN, opacity=170)
    canvas.region(ie_shape, outline=IE_RED)
    canvas.region(usw_shape, outline=USW_PURPLE)
    canvas.lanes(lanes)
    canvas.frame()
    return canvas.save(out_path)


def render_fused(
    ie_points: Sequence[FeaturePoint],
    usw_points: Sequence[FeaturePoint],
    region: RegionSet,
    extent: tuple[float, float, float, float],
    out_path: str | Path,
    lanes: LaneLayout | None = None,
) -> AxisCalibration:
    canvas = Canvas(extent, title="fused defect points: IE red, USW blue")
    canvas.region(region, outline=REGION_GREEN)
    canvas.points(ie_points, IE_RED)
    canvas.points(usw_points, USW_BLUE)
    canvas.lanes(lanes)
    canvas.frame()
    return canvas.save(out_path)


def annotate(
    img: np.ndarray,
    cal: AxisCalibration,
    boxes: Sequence[DataBox],
    points: Sequence[FeaturePoint],
    out_path: str | Path,
) -> None:
    """Draw detected boxes (blue) and fused points (red) onto a source image."""
    pil = Image.fromarray(np.ascontiguousarray(img, dtype=np.uint8))
    draw = ImageDraw.Draw(pil)
    for b in boxes:
        ua, va = cal.to_pixel(b.x_min, b.y_max)
        ub, vb = cal.to_pixel(b.x_max, b.y_min)
        u0, u1 = sorted((float(ua), float(ub)))
        v0, v1 = sorted((float(va), float(vb)))
        draw.rectangle([u0, v0, u1, v1], outline=BOX_BLUE, width=2)
    if points:
        us, vs = cal.to_pixel([p.x for p in points], [p.y for p in points])
        for u, v in zip(np.atleast_1d(us).tolist(), np.atleast_1d(vs).tolist()):
            u, v = int(math.floor(u)), int(math.floor(v))
            draw.ellipse([u - 2, v - 2, u + 2, v + 2], fill=IE_RED, outline=BLACK)
    save_png(np.array(pil, dtype=np.uint8), out_path)
