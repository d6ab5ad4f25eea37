"""Defect-box detection on contour plot rasters.

Pipeline: HSV band mask (red through yellow) -> Canny edge density ->
closing then opening with a square element sized by that density ->
external border following -> boxes of at least ``min_area`` px^2 ->
linear pixel-to-deck mapping through an :class:`AxisCalibration`.

Images are ``(height, width, 3)`` uint8 arrays, rows growing downward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import kernels
from .errors import FormatError, MappingError, UsageError, ValidationError
from .records import DataBox

LUMA_601 = (0.299, 0.587, 0.114)
GAUSS_SIGMA = 1.4
GAUSS_TAPS = 5


@dataclass(frozen=True)
class HsvConfig:
    red_max: float = 20.0  # red band [0, red_max] U [wrap_min, 360)
    wrap_min: float = 340.0
    yellow_max: float = 65.0  # yellow gradient band (red_max, yellow_max]
    s_min: float = 0.35
    v_min: float = 0.35


@dataclass(frozen=True)
class MorphLadder:
    """Density cut points and the (kernel, iterations) used below/above them."""

    cuts: tuple[float, ...] = (0.05, 0.15)
    steps: tuple[tuple[int, int], ...] = ((3, 1), (5, 2), (7, 3))

    def __post_init__(self):
        if len(self.steps) != len(self.cuts) + 1:
            raise ValidationError("MorphLadder needs one more step than cut points")
        if list(self.cuts) != sorted(self.cuts):
            raise ValidationError("MorphLadder cut points must be ascending")
        for k, it in self.steps:
            if k < 1 or k % 2 == 0 or it < 0:
                raise ValidationError(f"bad morphology step ({k}, {it}); kernel must be odd")

    def select(self, density: float) -> tuple[int, int]:
        for cut, step in zip(self.cuts, self.steps):
            if density < cut:
                return step
        return self.steps[-1]


@dataclass(frozen=True)
class DetectConfig:
    hsv: HsvConfig = field(default_factory=HsvConfig)
    canny_low: float = 50.0
    canny_high: float = 150.0
    ladder: MorphLadder = field(default_factory=MorphLadder)
    min_area: int = 40


@dataclass(frozen=True)
class PixelBox:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValidationError(f"PixelBox needs w, h >= 1, got {self}")

    @property
    def area(self) -> int:
        return self.w * self.h


@dataclass(frozen=True)
class AxisCalibration:
    plot_area: PixelBox
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    y_inverted: bool = True

    def __post_init__(self):
        if not (self.x_range[0] < self.x_range[1] and self.y_range[0] < self.y_range[1]):
            raise ValidationError(f"degenerate data range {self.x_range}, {self.y_range}")

    def to_data(self, u, v):
        """Continuous pixel coordinates (column, row) to deck feet."""
        pa = self.plot_area
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        x = self.x_range[0] + (u - pa.x) / pa.w * (self.x_range[1] - self.x_range[0])
        frac = (v - pa.y) / pa.h
        if self.y_inverted:
            y = self.y_range[1] - frac * (self.y_range[1] - self.y_range[0])
        else:
            y = self.y_range[0] + frac * (self.y_range[1] - self.y_range[0])
        return x, y

    def to_pixel(self, x, y):
        """Deck feet to continuous pixel coordinates (column, row)."""
        pa = self.plot_area
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        u = pa.x + (x - self.x_range[0]) / (self.x_range[1] - self.x_range[0]) * pa.w
        if self.y_inverted:
            frac = (self.y_range[1] - y) / (self.y_range[1] - self.y_range[0])
        else:
            frac = (y - self.y_range[0]) / (self.y_range[1] - self.y_range[0])
        return u, pa.y + frac * pa.h


# ---------------------------------------------------------------------------
# calibration sidecar

_SIDECAR_KEYS = (
    "plot_left",
    "plot_top",
    "plot_right",
    "plot_bottom",
    "x_min",
    "x_max",
    "y_min",
    "y_max",
    "y_inverted",
)


def parse_calibration(
    text: str,
    default_x_range: tuple[float, float] | None = None,
    default_y_range: tuple[float, float] | None = None,
) -> AxisCalibration:
    """Parse ``key = value`` sidecar text.

    Data ranges missing from the sidecar fall back to the given defaults
    (normally the min/max of the matching feature CSV).
    """
    vals: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"calibration line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _SIDECAR_KEYS:
            raise FormatError(f"calibration line {lineno}: unknown key {key!r}")
        vals[key] = value

    def num(key: str) -> float:
        try:
            return float(vals[key])
        except KeyError:
            raise FormatError(f"calibration is missing {key}") from None
        except ValueError:
            raise FormatError(f"calibration {key} is not a number: {vals[key]!r}") from None

    left, top, right, bottom = (num(k) for k in _SIDECAR_KEYS[:4])
    if not all(float(v).is_integer() for v in (left, top, right, bottom)):
        raise FormatError("plot_* pixel bounds must be integers")
    if right <= left or bottom <= top:
        raise FormatError("plot area is empty")

    def rng(lo: str, hi: str, default):
        if lo in vals or hi in vals:
            return (num(lo), num(hi))
        if default is None:
            raise FormatError(f"calibration has no {lo}/{hi} and no feature data to derive them")
        return (float(default[0]), float(default[1]))

    inv = vals.get("y_inverted", "true").strip().lower()
    if inv not in ("true", "false"):
        raise FormatError(f"y_inverted must be true or false, got {inv!r}")
    return AxisCalibration(
        PixelBox(int(left), int(top), int(right - left), int(bottom - top)),
        rng("x_min", "x_max", default_x_range),
        rng("y_min", "y_max", default_y_range),
        inv == "true",
    )


def read_calibration(path: str | Path, **defaults) -> AxisCalibration:
    return parse_calibration(Path(path).read_text(encoding="utf-8"), **defaults)


def calibration_text(cal: AxisCalibration) -> str:
    pa = cal.plot_area
    return (
        f"plot_left = {pa.x}\nplot_top = {pa.y}\n"
        f"plot_right = {pa.x + pa.w}\nplot_bottom = {pa.y + pa.h}\n"
        f"x_min = {cal.x_range[0]!r}\nx_max = {cal.x_range[1]!r}\n"
        f"y_min = {cal.y_range[0]!r}\ny_max = {cal.y_range[1]!r}\n"
        f"y_inverted = {'true' if cal.y_inverted else 'false'}\n"
    )


# ---------------------------------------------------------------------------
# raster I/O


def load_png(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.array(im.convert("RGB"), dtype=np.uint8)


def save_png(img: np.ndarray, path: str | Path) -> None:
    Image.fromarray(np.ascontiguousarray(img, dtype=np.uint8)).save(path, format="PNG")


def _check_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValidationError(f"expected an (h, w, 3) RGB raster, got shape {img.shape}")
    return np.ascontiguousarray(img, dtype=np.uint8)


# ---------------------------------------------------------------------------
# stages


def defect_mask(img: np.ndarray, cfg: HsvConfig = HsvConfig()) -> np.ndarray:
    img = _check_image(img)
    return kernels.hsv_mask(
        img, float(cfg.red_max), float(cfg.wrap_min), float(cfg.yellow_max), float(cfg.s_min), float(cfg.v_min)
    )


def _gaussian_taps(sigma: float = GAUSS_SIGMA, taps: int = GAUSS_TAPS) -> np.ndarray:
    x = np.arange(taps) - taps // 2
    g = np.exp(-(x**2) / (2.0 * sigma * sigma))
    return g / g.sum()


def _correlate_axis(a: np.ndarray, taps: np.ndarray, axis: int, mode: str = "reflect") -> np.ndarray:
    half = taps.shape[0] // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (half, half)
    p = np.pad(a, pad, mode=mode)
    out = np.zeros_like(a)
    n = a.shape[axis]
    for i, t in enumerate(taps):
        out += t * np.take(p, np.arange(i, i + n), axis=axis)
    return out


def grayscale(img: np.ndarray) -> np.ndarray:
    img = _check_image(img).astype(np.float64)
    return img[..., 0] * LUMA_601[0] + img[..., 1] * LUMA_601[1] + img[..., 2] * LUMA_601[2]


def _luma_u8(img: np.ndarray) -> np.ndarray:
    """601 luma in 15-bit fixed point, rounded half up.

    R and G weights are rounded; B takes the remainder so the weights sum
    to exactly one and grey pixels map to themselves.
    """
    img = _check_image(img).astype(np.int64)
    wr = int(round(LUMA_601[0] * (1 << 15)))
    wg = int(round(LUMA_601[1] * (1 << 15)))
    wb = (1 << 15) - wr - wg
    acc = img[..., 0] * wr + img[..., 1] * wg + img[..., 2] * wb
    return ((acc + (1 << 14)) >> 15).astype(np.float64)


def _blur_u8(gray: np.ndarray) -> np.ndarray:
    """Separable Gaussian with taps in 1/256 steps, rounded half up to 8 bits."""
    taps = np.round(_gaussian_taps() * 256.0)
    acc = _correlate_axis(_correlate_axis(gray, taps, 0), taps, 1)  # exact integers
    return np.clip(np.floor((acc + 32768.0) / 65536.0), 0.0, 255.0)


def canny(img: np.ndarray, low: float = 50.0, high: float = 150.0) -> np.ndarray:
    """Edge map: 601 luma, 5-tap Gaussian (sigma 1.4), Sobel, NMS, hysteresis.

    The luma and blurred images are rounded to 8 bits between stages, as in
    an 8-bit image pipeline.  On fine periodic patterns this rounding decides
    which ridge pixels survive non-maximum suppression.
    """
    if not (0 < low < high):
        raise UsageError(f"Canny thresholds need 0 < low < high, got ({low}, {high})")
    gray = _luma_u8(img)
    blur = _blur_u8(gray)
    smooth = np.array([1.0, 2.0, 1.0])
    diff = np.array([-1.0, 0.0, 1.0])
    # gradients replicate the edge row/column; the blur reflects without it
    gx = _correlate_axis(_correlate_axis(blur, smooth, 0, "edge"), diff, 1, "edge")
    gy = _correlate_axis(_correlate_axis(blur, diff, 0, "edge"), smooth, 1, "edge")
    mag = np.abs(gx) + np.abs(gy)
    thin = kernels.nms(gx, gy, mag, float(low))
    return kernels.hysteresis(thin, float(low), float(high))


def edge_density(img: np.ndarray, canny_low: float = 50.0, canny_high: float = 150.0) -> float:
    edges = canny(img, canny_low, canny_high)
    return float(edges.mean())


def close_open(mask: np.ndarray, kernel: int, iterations: int) -> np.ndarray:
    m = np.ascontiguousarray(mask, dtype=np.bool_)
    if iterations == 0 or kernel == 1:
        return m.copy()
    m = kernels.morph(m, kernel, iterations, True)
    m = kernels.morph(m, kernel, iterations, False)
    m = kernels.morph(m, kernel, iterations, False)
    return kernels.morph(m, kernel, iterations, True)


def adaptive_morphology(mask: np.ndarray, density: float, ladder: MorphLadder = MorphLadder()) -> np.ndarray:
    """Closing then opening, element size and repeat count picked from ``density``."""
    if not 0.0 <= density <= 1.0:
        raise UsageError(f"edge density must lie in [0, 1], got {density}")
    k, it = ladder.select(density)
    return close_open(mask, k, it)


def find_boxes(mask: np.ndarray, min_area: int = 40) -> list[PixelBox]:
    """Bounding boxes of outer borders (8-connectivity), sorted by (y, x)."""
    m = np.ascontiguousarray(mask, dtype=np.bool_)
    raw = kernels.external_boxes(m)
    boxes = [
        PixelBox(int(c0), int(r0), int(c1 - c0 + 1), int(r1 - r0 + 1)) for r0, c0, r1, c1 in raw
    ]
    boxes = [b for b in boxes if b.area >= min_area]
    boxes.sort(key=lambda b: (b.y, b.x))
    return boxes


def clip_box(box: PixelBox, area: PixelBox) -> PixelBox | None:
    x0 = max(box.x, area.x)
    y0 = max(box.y, area.y)
    x1 = min(box.x + box.w, area.x + area.w)
    y1 = min(box.y + box.h, area.y + area.h)
    if x1 <= x0 or y1 <= y0:
        return None
    return PixelBox(x0, y0, x1 - x0, y1 - y0)


def map_box(box: PixelBox, cal: AxisCalibration) -> DataBox:
    """Pixel box (clipped to the plot area) to deck coordinates."""
    clipped = clip_box(box, cal.plot_area)
    if clipped is None:
        raise MappingError(f"{box} lies entirely outside plot area {cal.plot_area}")
    xa, ya = cal.to_data(clipped.x, clipped.y)
    xb, yb = cal.to_data(clipped.x + clipped.w, clipped.y + clipped.h)
    return DataBox(float(min(xa, xb)), float(max(xa, xb)), float(min(ya, yb)), float(max(ya, yb)))


def unmap_box(box: DataBox, cal: AxisCalibration) -> tuple[float, float, float, float]:
    """Deck box to continuous pixel extents ``(left, top, right, bottom)``."""
    ua, va = cal.to_pixel(box.x_min, box.y_min)
    ub, vb = cal.to_pixel(box.x_max, box.y_max)
    return (float(min(ua, ub)), float(min(va, vb)), float(max(ua, ub)), float(max(va, vb)))


@dataclass
class Detection:
    mask: np.ndarray
    density: float
    kernel: int
    iterations: int
    refined: np.ndarray
    pixel_boxes: list[PixelBox]
    data_boxes: list[DataBox]


def detect(img: np.ndarray, cal: AxisCalibration, cfg: DetectConfig = DetectConfig()) -> Detection:
    img = _check_image(img)
    mask = defect_mask(img, cfg.hsv)
    density = edge_density(img, cfg.canny_low, cfg.canny_high)
    k, it = cfg.ladder.select(density)
    refined = close_open(mask, k, it)
    pixel_boxes = []
    data_boxes = []
    for b in find_boxes(refined, cfg.min_area):
        # legends and colour bars sit outside the plot area
        if clip_box(b, cal.plot_area) is None:
            continue
        pixel_boxes.append(b)
        data_boxes.append(map_box(b, cal))
    return Detection(mask, density, k, it, refined, pixel_boxes, data_boxes)


def detect_defect_boxes(img: np.ndarray, cal: AxisCalibration, cfg: DetectConfig = DetectConfig()) -> list[DataBox]:
    return detect(img, cal, cfg).data_boxes


# ---------------------------------------------------------------------------
# box CSV

BOX_HEADER = "x_min,x_max,y_min,y_max"


def write_box_csv(boxes: list[DataBox], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(BOX_HEADER + "\n")
        for b in boxes:
            fh.write(f"{b.x_min!r},{b.x_max!r},{b.y_min!r},{b.y_max!r}\n")


def read_box_csv(path: str | Path) -> list[DataBox]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != BOX_HEADER:
        raise FormatError(f"{path}: expected header {BOX_HEADER!r}")
    boxes = []
    for row, line in enumerate(lines[1:], start=1):
        if not line.strip():
            continue
        try:
            vals = [float(c) for c in line.split(",")]
        except ValueError:
            raise FormatError(f"{path}: row {row} is not numeric") from None
        if len(vals) != 4 or not all(math.isfinite(v) for v in vals):
            raise FormatError(f"{path}: row {row} needs 4 finite values")
        boxes.append(DataBox(*vals))
    return boxes
