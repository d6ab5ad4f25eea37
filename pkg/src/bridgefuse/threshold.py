"""Per-modality defect thresholds from 1-D k-means (K = 3).

IE: the threshold is the largest value in the lowest-centre cluster.
USW: the threshold is the lowest cluster centre.
A point is a defect candidate when its value is strictly below the
threshold.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import DegenerateDataError, UsageError, ValidationError
from .records import FeaturePoint, Modality

MAX_ITER = 300
REL_TOL = 1e-9


class ThresholdRule(str, enum.Enum):
    MAX_OF_LOWEST_CLUSTER = "MaxOfLowestCluster"
    MIN_CLUSTER_CENTER = "MinClusterCenter"


@dataclass(frozen=True, eq=False)
class ClusterResult:
    centers: np.ndarray  # ascending
    assignments: np.ndarray  # cluster index per input value, input order
    inertia: float
    iterations: int


@dataclass(frozen=True)
class DefectThreshold:
    modality: Modality
    value: float
    rule: ThresholdRule

    def __post_init__(self):
        if not self.value > 0:
            raise ValidationError(f"threshold must be > 0, got {self.value!r}")


def _optimal_seed(sorted_vals: np.ndarray, k: int) -> np.ndarray:
    shifted = sorted_vals - sorted_vals.mean()
    cuts = kernels.kmeans_dp(np.ascontiguousarray(shifted), k)
    bounds = [0, *cuts.tolist(), sorted_vals.shape[0]]
    return np.array([sorted_vals[a:b].mean() for a, b in zip(bounds[:-1], bounds[1:])])


def _quantile_seed(sorted_vals: np.ndarray, k: int) -> np.ndarray:
    qs = (2.0 * np.arange(k) + 1.0) / (2.0 * k)
    return np.quantile(sorted_vals, qs)


def _plusplus_seed(vals: np.ndarray, k: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    uniq = np.unique(vals)
    centers = [uniq[rng.integers(uniq.shape[0])]]
    while len(centers) < k:
        d2 = np.min((uniq[:, None] - np.array(centers)[None, :]) ** 2, axis=1)
        centers.append(uniq[rng.choice(uniq.shape[0], p=d2 / d2.sum())])
    return np.sort(np.array(centers))


def _assign(vals: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return np.argmin(np.abs(vals[:, None] - centers[None, :]), axis=1)


def kmeans_1d(
    values: Iterable[float], k: int = 3, seed: int = 0, init: str = "optimal"
) -> ClusterResult:
    """Lloyd iterations on scalar data.

    ``init`` selects the starting centres: ``"optimal"`` (default) seeds with
    the exact minimum-inertia contiguous partition of the sorted data, so
    Lloyd converges immediately onto the global optimum; ``"quantile"``
    uses the (2i+1)/2k quantiles; ``"kmeans++"`` draws from ``seed``.
    Distance ties go to the lower centre.
    """
    vals = np.array(list(values), dtype=np.float64)
    if vals.ndim != 1 or not np.all(np.isfinite(vals)):
        raise DegenerateDataError("values must be a finite 1-D sequence")
    if k < 1:
        raise UsageError(f"k must be >= 1, got {k}")
    if np.unique(vals).shape[0] < k:
        raise DegenerateDataError(f"need at least {k} distinct values, got {np.unique(vals).shape[0]}")
    srt = np.sort(vals)
    if init == "optimal":
        centers = _optimal_seed(srt, k)
    elif init == "quantile":
        centers = _quantile_seed(srt, k)
    elif init == "kmeans++":
        centers = _plusplus_seed(vals, k, seed)
    else:
        raise UsageError(f"unknown init {init!r}")

    scale = max(float(np.max(np.abs(vals))), np.finfo(float).tiny)
    it = 0
    for it in range(1, MAX_ITER + 1):
        lab = _assign(vals, centers)
        new = centers.copy()
        for j in range(k):
            members = vals[lab == j]
            if members.size:
                new[j] = members.mean()
        new = np.sort(new)
        moved = np.max(np.abs(new - centers))
        centers = new
        if moved <= REL_TOL * scale:
            break
    lab = _assign(vals, centers)
    inertia = float(np.sum((vals - centers[lab]) ** 2))
    return ClusterResult(centers, lab, inertia, it)


def _values(points: Sequence[FeaturePoint], modality: Modality) -> np.ndarray:
    for p in points:
        if p.modality != modality:
            raise UsageError(f"expected {modality.value} points, got a {p.modality.value} point")
    return np.array([p.value for p in points], dtype=np.float64)


def ie_threshold(points: Sequence[FeaturePoint], seed: int = 0) -> DefectThreshold:
    vals = _values(points, Modality.IE)
    res = kmeans_1d(vals, 3, seed)
    return DefectThreshold(
        Modality.IE, float(vals[res.assignments == 0].max()), ThresholdRule.MAX_OF_LOWEST_CLUSTER
    )


def usw_threshold(points: Sequence[FeaturePoint], seed: int = 0) -> DefectThreshold:
    vals = _values(points, Modality.USW)
    res = kmeans_1d(vals, 3, seed)
    return DefectThreshold(Modality.USW, float(res.centers[0]), ThresholdRule.MIN_CLUSTER_CENTER)


def modality_threshold(points: Sequence[FeaturePoint], modality: Modality, seed: int = 0) -> DefectThreshold:
    return ie_threshold(points, seed) if modality == Modality.IE else usw_threshold(points, seed)


def filter_defects(points: Sequence[FeaturePoint], thr: DefectThreshold) -> list[FeaturePoint]:
    """Points strictly below the threshold, input order preserved."""
    out = []
    for p in points:
        if p.modality != thr.modality:
            raise UsageError(
                f"{thr.modality.value} threshold applied to a {p.modality.value} point"
            )
        if p.value < thr.value:
            out.append(p)
    return out
