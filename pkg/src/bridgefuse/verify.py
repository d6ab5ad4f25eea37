"""Cross-verification of fused points against image-derived defect boxes.

A point is a true positive when it lies inside some box grown by ``tol``
feet on every side, and a false positive otherwise.  A box that contains no
point is a false negative.  Counts are pooled over IE and USW before the
precision, recall and F1 are computed (micro averaging).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import UsageError
from .records import DataBox, FeaturePoint, Modality

DEFAULT_TOL = 0.5  # ft


@dataclass(frozen=True)
class MatchOutcome:
    tp: int
    fp: int
    fn: int
    pairs: tuple[tuple[int, int], ...] = ()  # (point index, box index)


def _inside(xs: np.ndarray, ys: np.ndarray, box: DataBox, tol: float) -> np.ndarray:
    return (
        (xs >= box.x_min - tol)
        & (xs <= box.x_max + tol)
        & (ys >= box.y_min - tol)
        & (ys <= box.y_max + tol)
    )


def match_points_to_boxes(
    points: Sequence[FeaturePoint], boxes: Sequence[DataBox], tol: float = DEFAULT_TOL
) -> MatchOutcome:
    """Each point pairs with the first box (in list order) that contains it."""
    if not tol >= 0:
        raise UsageError(f"match tolerance must be >= 0, got {tol!r}")
    xs = np.array([p.x for p in points], dtype=np.float64)
    ys = np.array([p.y for p in points], dtype=np.float64)
    owner = np.full(xs.shape[0], -1, dtype=np.int64)
    found = np.zeros(len(boxes), dtype=bool)
    for j, box in enumerate(boxes):
        hit = _inside(xs, ys, box, tol)
        found[j] = bool(hit.any())
        owner[(owner < 0) & hit] = j
    pairs = tuple((int(i), int(owner[i])) for i in np.flatnonzero(owner >= 0))
    tp = len(pairs)
    return MatchOutcome(tp, xs.shape[0] - tp, int((~found).sum()), pairs)


def metrics_from_counts(tp: int, fp: int, fn: int) -> tuple[float | None, float | None, float | None]:
    """Precision, recall, F1; a zero denominator gives None."""
    precision = tp / (tp + fp) if tp + fp > 0 else None
    recall = tp / (tp + fn) if tp + fn > 0 else None
    if precision is None or recall is None:
        f1 = None
    elif precision + recall == 0:
        f1 = 0.0
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return precision, recall, f1


@dataclass(frozen=True)
class VerificationReport:
    ie: MatchOutcome
    usw: MatchOutcome
    tp: int
    fp: int
    fn: int
    precision: float | None
    recall: float | None
    f1: float | None
    notes: tuple[str, ...] = ()


def micro_metrics(ie: MatchOutcome, usw: MatchOutcome, notes: Sequence[str] = ()) -> VerificationReport:
    tp = ie.tp + usw.tp
    fp = ie.fp + usw.fp
    fn = ie.fn + usw.fn
    p, r, f1 = metrics_from_counts(tp, fp, fn)
    return VerificationReport(ie, usw, tp, fp, fn, p, r, f1, tuple(notes))


def _fmt(v: float | None) -> str:
    return "n/a" if v is None else f"{v:.4f}"


def report_csv(report: VerificationReport) -> str:
    lines = ["modality,tp,fp,fn"]
    for name, o in (("IE", report.ie), ("USW", report.usw)):
        lines.append(f"{name},{o.tp},{o.fp},{o.fn}")
    lines.append(f"micro,{_fmt(report.precision)},{_fmt(report.recall)},{_fmt(report.f1)}")
    return "\n".join(lines) + "\n"


def report_text(report: VerificationReport, title: str = "verification") -> str:
    lines = [title, ""]
    lines.append(f"{'modality':<10}{'tp':>6}{'fp':>6}{'fn':>6}")
    for name, o in (("IE", report.ie), ("USW", report.usw)):
        lines.append(f"{name:<10}{o.tp:>6}{o.fp:>6}{o.fn:>6}")
    lines.append(f"{'pooled':<10}{report.tp:>6}{report.fp:>6}{report.fn:>6}")
    lines.append("")
    lines.append(f"precision  {_fmt(report.precision)}")
    lines.append(f"recall     {_fmt(report.recall)}")
    lines.append(f"f1         {_fmt(report.f1)}")
    for note in report.notes:
        lines.append(f"note: {note}")
    return "\n".join(lines) + "\n"


def write_report(report: VerificationReport, out_dir: str | Path, stem: str = "report", title: str = "verification") -> None:
    out = Path(out_dir)
    with open(out / f"{stem}.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report_csv(report))
    with open(out / f"{stem}.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report_text(report, title))


@dataclass
class OverlayResult:
    report: VerificationReport
    annotated: dict[Modality, Path] = field(default_factory=dict)
    problems: list[str] = field(default_factory=list)


def overlay_report(
    ie_points: Sequence[FeaturePoint],
    usw_points: Sequence[FeaturePoint],
    boxes: Mapping[Modality, Sequence[DataBox]],
    images: Mapping[Modality, np.ndarray | None],
    cals: Mapping,
    out_dir: str | Path | None,
    tol: float = DEFAULT_TOL,
) -> OverlayResult:
    """Match per modality, then draw boxes and fused points on each image.

    Drawing happens after matching and reads nothing back, so a missing
    image or calibration only costs that image's annotation.
    """
    from .render import annotate

    ie = match_points_to_boxes(ie_points, boxes.get(Modality.IE, ()), tol)
    usw = match_points_to_boxes(usw_points, boxes.get(Modality.USW, ()), tol)
    problems: list[str] = []
    written: dict[Modality, Path] = {}
    fused = list(ie_points) + list(usw_points)
    for mod in (Modality.IE, Modality.USW):
        img = images.get(mod)
        cal = cals.get(mod)
        if img is None:
            problems.append(f"{mod.value}: no image to annotate")
            continue
        if cal is None:
            problems.append(f"{mod.value}: no calibration for image")
            continue
        if out_dir is None:
            continue
        path = Path(out_dir) / f"{mod.value.lower()}.png"
        annotate(img, cal, boxes.get(mod, ()), fused, path)
        written[mod] = path
    return OverlayResult(micro_metrics(ie, usw, problems), written, problems)
