"""Alpha shapes, region intersection, lane bands and IE/USW fusion.

``alpha`` is a circumradius bound in deck feet: a Delaunay triangle is kept
when its circumradius is <= alpha, and the region is the union of kept
triangles.  ``alpha = inf`` keeps every triangle (the convex hull).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import shapely
import shapely.wkt
from scipy.spatial import Delaunay, QhullError
from shapely.geometry import MultiPolygon
from shapely.geometry import Polygon as ShapelyPolygon
from shapely.geometry.polygon import orient

from . import kernels
from .errors import DegenerateGeometryError, FormatError, UsageError
from .records import FeaturePoint, Modality

BOUNDARY_TOL = 1e-9  # ft
SLIVER_AREA = 1e-12  # ft^2


def _ring_area(ring: np.ndarray) -> float:
    x = ring[:, 0]
    y = ring[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True, eq=False)
class Polygon:
    """Exterior ring counter-clockwise, holes clockwise; rings stored open."""

    exterior: np.ndarray
    holes: tuple[np.ndarray, ...] = ()

    @property
    def area(self) -> float:
        return _ring_area(self.exterior) + sum(_ring_area(h) for h in self.holes)

    def rings(self) -> list[np.ndarray]:
        return [self.exterior, *self.holes]

    def to_shapely(self) -> ShapelyPolygon:
        return ShapelyPolygon(self.exterior, [h for h in self.holes])


@dataclass(frozen=True, eq=False)
class RegionSet:
    polygons: tuple[Polygon, ...] = ()
    alpha: float = math.inf

    @property
    def area(self) -> float:
        return sum(p.area for p in self.polygons)

    @property
    def is_empty(self) -> bool:
        return not self.polygons

    def edges(self) -> np.ndarray:
        """All ring edges as rows ``x1, y1, x2, y2``."""
        rows = []
        for poly in self.polygons:
            for ring in poly.rings():
                rows.append(np.hstack([ring, np.roll(ring, -1, axis=0)]))
        if not rows:
            return np.zeros((0, 4))
        return np.ascontiguousarray(np.vstack(rows), dtype=np.float64)

    def contains(self, xs, ys, tol: float = BOUNDARY_TOL) -> np.ndarray:
        """Inclusive containment; points within ``tol`` of an edge count as inside."""
        xs = np.ascontiguousarray(np.atleast_1d(xs), dtype=np.float64)
        ys = np.ascontiguousarray(np.atleast_1d(ys), dtype=np.float64)
        if self.is_empty:
            return np.zeros(xs.shape[0], dtype=bool)
        return kernels.points_in_edges(xs, ys, self.edges(), float(tol))

    def to_shapely(self) -> MultiPolygon:
        return MultiPolygon([p.to_shapely() for p in self.polygons])


def _from_shapely(geom, alpha: float) -> RegionSet:
    polys = []
    for g in getattr(geom, "geoms", [geom]):
        if g.is_empty or g.geom_type != "Polygon":
            continue
        g = orient(g.simplify(0.0), sign=1.0)
        if g.is_empty or g.area < SLIVER_AREA:
            continue
        ext = np.asarray(g.exterior.coords)[:-1]
        holes = tuple(
            np.asarray(r.coords)[:-1]
            for r in g.interiors
            if abs(ShapelyPolygon(r).area) >= SLIVER_AREA
        )
        polys.append(Polygon(ext, holes))
    polys.sort(key=lambda p: (float(p.exterior[:, 0].min()), float(p.exterior[:, 1].min())))
    return RegionSet(tuple(polys), alpha)


def _prepare(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if not np.all(np.isfinite(pts)):
        raise DegenerateGeometryError("point coordinates must be finite")
    pts = np.unique(pts, axis=0)  # also sorts by (x, y)
    if pts.shape[0] < 3:
        raise DegenerateGeometryError(f"alpha shape needs 3 distinct points, got {pts.shape[0]}")
    centred = pts - pts.mean(axis=0)
    scale = float(np.abs(centred).max())
    sv = np.linalg.svd(centred, compute_uv=False)
    if sv[-1] <= 1e-12 * max(scale, 1.0) * math.sqrt(pts.shape[0]):
        raise DegenerateGeometryError("points are collinear")
    return pts


def alpha_triangles(points, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Sorted unique points and the Delaunay triangles with circumradius <= alpha."""
    if not alpha > 0:
        raise UsageError(f"alpha must be > 0, got {alpha!r}")
    pts = _prepare(points)
    try:
        tri = Delaunay(pts)
    except QhullError as exc:
        raise DegenerateGeometryError(f"triangulation failed: {exc}") from None
    simplices = np.ascontiguousarray(tri.simplices, dtype=np.int64)
    radii = kernels.circumradius(pts, simplices)
    return pts, simplices[radii <= alpha]


def boundary_edges(simplices: np.ndarray) -> np.ndarray:
    """Edges (i, j), i < j, that belong to exactly one of ``simplices``."""
    if simplices.shape[0] == 0:
        return np.zeros((0, 2), dtype=np.int64)
    e = np.vstack([simplices[:, [0, 1]], simplices[:, [1, 2]], simplices[:, [2, 0]]])
    e = np.sort(e, axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    return uniq[counts == 1]


def alpha_shape(points, alpha: float) -> RegionSet:
    """Union of Delaunay triangles whose circumradius is at most ``alpha``."""
    pts, kept = alpha_triangles(points, alpha)
    if kept.shape[0] == 0:
        return RegionSet((), alpha)
    tris = shapely.polygons(pts[kept])
    return _from_shapely(shapely.union_all(tris), alpha)


def intersect_regions(a: RegionSet, b: RegionSet) -> RegionSet:
    alpha = min(a.alpha, b.alpha)
    if a.is_empty or b.is_empty:
        return RegionSet((), alpha)
    return _from_shapely(shapely.intersection(a.to_shapely(), b.to_shapely()), alpha)


@dataclass(frozen=True, eq=False)
class LaneLayout:
    y_min: float
    y_max: float
    lane_count: int
    boundaries: np.ndarray

    def lane_of(self, y) -> np.ndarray:
        """Lane index per y; a point on a shared boundary goes to the lower lane.

        Values outside the deck are clamped to the first or last lane.
        """
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        idx = np.searchsorted(self.boundaries, y, side="left") - 1
        return np.clip(idx, 0, self.lane_count - 1)


def lane_layout(y_min: float, y_max: float, lane_count: int) -> LaneLayout:
    if not (math.isfinite(y_min) and math.isfinite(y_max) and y_max > y_min):
        raise UsageError(f"lane range needs y_max > y_min, got ({y_min}, {y_max})")
    if int(lane_count) != lane_count or lane_count < 1:
        raise UsageError(f"lane_count must be a positive integer, got {lane_count!r}")
    n = int(lane_count)
    step = (y_max - y_min) / n
    bounds = np.array([y_min + i * step for i in range(n + 1)])
    bounds[-1] = y_max
    return LaneLayout(float(y_min), float(y_max), n, bounds)


@dataclass
class FusedDefectSet:
    region: RegionSet
    points: list[FeaturePoint]
    lane_counts: list[int]
    ie_shape: RegionSet = field(default_factory=RegionSet)
    usw_shape: RegionSet = field(default_factory=RegionSet)
    diagnostics: list[str] = field(default_factory=list)

    @property
    def ie_points(self) -> list[FeaturePoint]:
        return [p for p in self.points if p.modality == Modality.IE]

    @property
    def usw_points(self) -> list[FeaturePoint]:
        return [p for p in self.points if p.modality == Modality.USW]


def _shape_or_diag(points: Sequence[FeaturePoint], alpha: float, label: str, diags: list[str]) -> RegionSet:
    if not points:
        diags.append(f"no {label} defect points")
        return RegionSet((), alpha)
    try:
        return alpha_shape([(p.x, p.y) for p in points], alpha)
    except DegenerateGeometryError as exc:
        diags.append(f"{label} alpha shape is degenerate: {exc}")
        return RegionSet((), alpha)


def fuse(
    ie_defects: Sequence[FeaturePoint],
    usw_defects: Sequence[FeaturePoint],
    alpha: float,
    lanes: LaneLayout,
) -> FusedDefectSet:
    """Intersect the two modalities' alpha shapes and keep points inside it.

    Both modalities' points are retained.  Degenerate input never raises;
    it yields an empty set with a diagnostic line.
    """
    diags: list[str] = []
    ie_shape = _shape_or_diag(ie_defects, alpha, "IE", diags)
    usw_shape = _shape_or_diag(usw_defects, alpha, "USW", diags)
    region = intersect_regions(ie_shape, usw_shape)
    if region.is_empty and not diags:
        diags.append("IE and USW alpha shapes do not intersect")

    candidates = list(ie_defects) + list(usw_defects)
    points: list[FeaturePoint] = []
    if candidates and not region.is_empty:
        xs = np.array([p.x for p in candidates])
        ys = np.array([p.y for p in candidates])
        inside = region.contains(xs, ys)
        points = [p for p, keep in zip(candidates, inside) if keep]

    counts = [0] * lanes.lane_count
    if points:
        for lane in lanes.lane_of([p.y for p in points]):
            counts[int(lane)] += 1
    return FusedDefectSet(region, points, counts, ie_shape, usw_shape, diags)


# ---------------------------------------------------------------------------
# text geometry


def _ring_text(ring: np.ndarray) -> str:
    closed = np.vstack([ring, ring[:1]])
    return "(" + ", ".join(f"{x!r} {y!r}" for x, y in closed.tolist()) + ")"


def region_to_wkt(region: RegionSet) -> str:
    """One ``POLYGON((x y, ...), (hole ...))`` line per polygon."""
    lines = []
    for poly in region.polygons:
        lines.append("POLYGON(" + ", ".join(_ring_text(r) for r in poly.rings()) + ")")
    return "".join(line + "\n" for line in lines)


def region_from_wkt(text: str, alpha: float = math.inf) -> RegionSet:
    polys = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            geom = shapely.wkt.loads(line)
        except shapely.errors.GEOSException as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
        if geom.geom_type != "Polygon":
            raise FormatError(f"line {lineno}: expected POLYGON, got {geom.geom_type}")
        polys.append(
            Polygon(
                np.asarray(geom.exterior.coords)[:-1],
                tuple(np.asarray(r.coords)[:-1] for r in geom.interiors),
            )
        )
    return RegionSet(tuple(polys), alpha)


def write_region_wkt(region: RegionSet, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(region_to_wkt(region))
