"""Command-line entry point.

Subcommands map one-to-one onto pipeline stages and all write into one
output directory, so ``convert``, ``features``, ``fuse`` and ``verify`` run
in turn leave the same files as a single ``pipeline`` run.

Exit codes: 0 success, 2 usage or input error, 3 internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .config import RunConfig, config_text, load_config, parse_set_option
from .errors import BridgeFuseError, UsageError
from .geometry import FusedDefectSet, LaneLayout, fuse, lane_layout, write_region_wkt
from .imaging import Detection, calibration_text, detect, load_png, read_box_csv, read_calibration, write_box_csv
from .ingest import (
    bundle_to_xml,
    read_feature_csv,
    read_fused_csv,
    read_xml_bundle,
    write_feature_csv,
    write_fused_csv,
    write_skipped_csv,
)
from .records import FeaturePoint, Modality
from .render import (
    IE_RED,
    USW_PURPLE,
    interpolate_grid,
    render_alpha_overlay,
    render_contour,
    render_fused,
    render_scatter,
)
from .signal import extract_features
from .synth import default_spec, generate_synthetic_bundle
from .threshold import DefectThreshold, filter_defects, kmeans_1d, modality_threshold
from .verify import match_points_to_boxes, micro_metrics, overlay_report, write_report

log = logging.getLogger("bridgefuse")

MODALITIES = (Modality.IE, Modality.USW)
UNITS = {Modality.IE: "kHz", Modality.USW: "ksi"}


def _tag(mod: Modality) -> str:
    return mod.value.lower()


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _require(path: Path | None, what: str) -> Path:
    if path is None:
        raise UsageError(f"no {what} configured")
    if not path.is_file():
        raise UsageError(f"{what} not found: {path}")
    return path


# ---------------------------------------------------------------------------
# stages


def stage_convert(cfg: RunConfig) -> None:
    bundle = read_xml_bundle(_require(cfg.bundle, "bundle"))
    bundle = dataclasses.replace(bundle, material=cfg.material(bundle.material))
    feats = extract_features(bundle, hann=cfg.hann, min_frequency=cfg.min_frequency)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    write_feature_csv(feats.ie, cfg.out_dir / "ie_features.csv")
    write_feature_csv(feats.usw, cfg.out_dir / "usw_features.csv")
    write_skipped_csv(feats.skipped, cfg.out_dir / "skipped.csv")
    log.info("%d IE and %d USW feature points, %d records skipped", len(feats.ie), len(feats.usw), len(feats.skipped))
    if len(feats.skipped):
        log.warning("%d records could not be converted; see skipped.csv", len(feats.skipped))


def _load_features(cfg: RunConfig) -> dict[Modality, list[FeaturePoint]]:
    out = {}
    for mod in MODALITIES:
        path = _require(cfg.features_path(mod), f"{mod.value} feature CSV")
        out[mod] = read_feature_csv(path, mod)
        if not out[mod]:
            raise UsageError(f"{path} has no feature points")
    return out


def _extent(feats: dict[Modality, list[FeaturePoint]]) -> tuple[float, float, float, float]:
    xs = [p.x for pts in feats.values() for p in pts]
    ys = [p.y for pts in feats.values() for p in pts]
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    # a single row or column of points still needs a drawable deck
    if x1 <= x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 <= y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    return (x0, x1, y0, y1)


def _lanes(cfg: RunConfig, extent) -> LaneLayout:
    return lane_layout(extent[2], extent[3], cfg.lane_count)


def stage_features(cfg: RunConfig) -> None:
    """Interpolated contour maps of each modality, with calibration sidecars."""
    feats = _load_features(cfg)
    extent = _extent(feats)
    lanes = _lanes(cfg, extent)
    plots = cfg.out_dir / "plots"
    plots.mkdir(parents=True, exist_ok=True)
    for mod in MODALITIES:
        field = interpolate_grid(feats[mod], cfg.cell, extent)
        png = plots / f"{_tag(mod)}_contour.png"
        cal = render_contour(
            field, png, lanes, extent=extent, title=f"{mod.value} feature map", unit=UNITS[mod]
        )
        _write_text(png.with_suffix(".cal"), calibration_text(cal))


def _threshold_lines(mod: Modality, pts: list[FeaturePoint], thr: DefectThreshold, n_defects: int, seed: int) -> list[str]:
    res = kmeans_1d([p.value for p in pts], 3, seed)
    tag = _tag(mod)
    return [
        f"{tag}.rule = {thr.rule.value}",
        f"{tag}.threshold = {thr.value!r}",
        f"{tag}.unit = {UNITS[mod]}",
        f"{tag}.centers = {', '.join(repr(float(c)) for c in res.centers)}",
        f"{tag}.points = {len(pts)}",
        f"{tag}.defects = {n_defects}",
    ]


def stage_fuse(cfg: RunConfig) -> FusedDefectSet:
    feats = _load_features(cfg)
    extent = _extent(feats)
    lanes = _lanes(cfg, extent)
    plots = cfg.out_dir / "plots"
    plots.mkdir(parents=True, exist_ok=True)

    lines = ["# defect thresholds (1-D k-means, k = 3) and fusion summary"]
    defects = {}
    for mod, color in ((Modality.IE, IE_RED), (Modality.USW, USW_PURPLE)):
        thr = modality_threshold(feats[mod], mod, cfg.kmeans_seed)
        defects[mod] = filter_defects(feats[mod], thr)
        log.info("%s threshold %.6g %s, %d defect points", mod.value, thr.value, UNITS[mod], len(defects[mod]))
        lines += _threshold_lines(mod, feats[mod], thr, len(defects[mod]), cfg.kmeans_seed)
        write_feature_csv(defects[mod], cfg.out_dir / f"{_tag(mod)}_defects.csv")
        render_scatter(
            feats[mod],
            defects[mod],
            extent,
            plots / f"{_tag(mod)}_defects.png",
            color,
            lanes,
            title=f"{mod.value} points below threshold",
        )

    fused = fuse(defects[Modality.IE], defects[Modality.USW], cfg.alpha, lanes)
    write_fused_csv(fused.points, cfg.out_dir / "fused.csv")
    write_region_wkt(fused.region, cfg.out_dir / "region.wkt")
    render_alpha_overlay(fused.ie_shape, fused.usw_shape, fused.region, extent, plots / "alpha_shapes.png", lanes)
    render_fused(fused.ie_points, fused.usw_points, fused.region, extent, plots / "fused.png", lanes)

    lines += [
        f"alpha = {cfg.alpha!r}",
        f"region.polygons = {len(fused.region.polygons)}",
        f"region.area = {fused.region.area!r}",
        f"fused.ie = {len(fused.ie_points)}",
        f"fused.usw = {len(fused.usw_points)}",
        f"lane_count = {lanes.lane_count}",
        f"lane.boundaries = {', '.join(repr(float(b)) for b in lanes.boundaries)}",
        f"lane.counts = {', '.join(str(c) for c in fused.lane_counts)}",
    ]
    for diag in fused.diagnostics:
        lines.append(f"warning = {diag}")
        log.warning("%s", diag)
    if not fused.points:
        log.warning("fused defect set is empty")
    _write_text(cfg.out_dir / "thresholds.txt", "\n".join(lines) + "\n")
    return fused


def _image_for(cfg: RunConfig, mod: Modality) -> tuple[Path, Path] | None:
    img = cfg.image_path(mod)
    if img is None:
        fallback = cfg.out_dir / "plots" / f"{_tag(mod)}_contour.png"
        if not fallback.is_file():
            return None
        img = fallback
    _require(img, f"{mod.value} image")
    cal = cfg.calibration_path(mod) if cfg.image_path(mod) is not None else img.with_suffix(".cal")
    _require(cal, f"{mod.value} calibration sidecar")
    return img, cal


def stage_detect(cfg: RunConfig) -> dict[Modality, tuple]:
    sources = {mod: _image_for(cfg, mod) for mod in MODALITIES}
    if all(s is None for s in sources.values()):
        raise UsageError("no images configured; set ie_image / usw_image or run 'features' first")
    feats = None
    out: dict[Modality, tuple] = {}
    summary = []
    dcfg = cfg.detect_config()
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    for mod, src in sources.items():
        if src is None:
            continue
        img_path, cal_path = src
        defaults = {}
        text = cal_path.read_text(encoding="utf-8")
        if "x_min" not in text or "y_min" not in text:
            # sidecar without data ranges: take them from the feature CSV
            if feats is None:
                feats = _load_features(cfg)
            pts = feats[mod]
            defaults = {
                "default_x_range": (min(p.x for p in pts), max(p.x for p in pts)),
                "default_y_range": (min(p.y for p in pts), max(p.y for p in pts)),
            }
        cal = read_calibration(cal_path, **defaults)
        img = load_png(img_path)
        det: Detection = detect(img, cal, dcfg)
        write_box_csv(det.data_boxes, cfg.out_dir / f"{_tag(mod)}_boxes.csv")
        summary += [
            f"{_tag(mod)}.image = {img_path.name}",
            f"{_tag(mod)}.edge_density = {det.density!r}",
            f"{_tag(mod)}.kernel = {det.kernel}",
            f"{_tag(mod)}.iterations = {det.iterations}",
            f"{_tag(mod)}.boxes = {len(det.data_boxes)}",
        ]
        log.info("%s: %d defect boxes (edge density %.4f)", mod.value, len(det.data_boxes), det.density)
        out[mod] = (img, cal, det)
    _write_text(cfg.out_dir / "detect.txt", "\n".join(summary) + "\n")
    return out


def stage_verify(cfg: RunConfig) -> None:
    fused_path = _require(cfg.out_dir / "fused.csv", "fused point CSV (run 'fuse' first)")
    fused = read_fused_csv(fused_path)
    ie_pts = [p for p in fused if p.modality == Modality.IE]
    usw_pts = [p for p in fused if p.modality == Modality.USW]
    truth = read_box_csv(_require(cfg.ground_truth, "ground truth CSV")) if cfg.ground_truth else None

    dets = stage_detect(cfg)
    boxes = {mod: dets[mod][2].data_boxes for mod in dets}
    images = {mod: dets[mod][0] for mod in dets}
    cals = {mod: dets[mod][1] for mod in dets}
    annotated = cfg.out_dir / "annotated"
    annotated.mkdir(parents=True, exist_ok=True)
    res = overlay_report(ie_pts, usw_pts, boxes, images, cals, annotated, cfg.match_tol)
    for problem in res.problems:
        log.warning("%s", problem)
    write_report(res.report, cfg.out_dir, "report", "fused points vs image defect boxes")
    log.info(
        "verification: tp=%d fp=%d fn=%d f1=%s", res.report.tp, res.report.fp, res.report.fn,
        "n/a" if res.report.f1 is None else f"{res.report.f1:.4f}",
    )

    if truth is not None:
        rep = micro_metrics(
            match_points_to_boxes(ie_pts, truth, cfg.match_tol),
            match_points_to_boxes(usw_pts, truth, cfg.match_tol),
        )
        write_report(rep, cfg.out_dir, "truth_report", "fused points vs ground-truth defect boxes")


def stage_pipeline(cfg: RunConfig) -> None:
    stage_convert(cfg)
    stage_features(cfg)
    stage_fuse(cfg)
    stage_verify(cfg)


def cmd_synth(out_dir: Path, seed: int) -> None:
    spec = default_spec()
    bundle, rects = generate_synthetic_bundle(spec, seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "bundle.xml", "wb") as fh:
        fh.write(bundle_to_xml(bundle))
    write_box_csv(rects, out_dir / "ground_truth.csv")
    cfg = RunConfig(
        bundle=out_dir / "bundle.xml",
        out_dir=out_dir / "run",
        ground_truth=out_dir / "ground_truth.csv",
    )
    header = f"# synthetic scenario, seed {seed}\n"
    _write_text(out_dir / "bridgefuse.cfg", header + config_text(cfg, out_dir))
    log.info("wrote %s (%d IE, %d USW records)", out_dir / "bundle.xml", len(bundle.ie_records), len(bundle.usw_records))


# ---------------------------------------------------------------------------
# argument handling

STAGES = {
    "convert": stage_convert,
    "features": stage_features,
    "fuse": stage_fuse,
    "detect": stage_detect,
    "verify": stage_verify,
    "pipeline": stage_pipeline,
}

HELP = {
    "convert": "extract IE peak frequencies and USW moduli from an XML bundle into CSV",
    "features": "render interpolated contour maps of the feature CSVs",
    "fuse": "threshold, build alpha shapes and intersect them",
    "detect": "find defect boxes in contour images",
    "verify": "match fused points to image boxes and report precision/recall/F1",
    "pipeline": "convert, features, fuse and verify in one run",
    "synth": "write a synthetic bundle with planted defects and its config",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bridgefuse", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-q", "--quiet", action="store_true", help="only print warnings and errors")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", type=Path, help="key = value config file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    common.add_argument("-o", "--out-dir", type=Path, help="output directory")
    common.add_argument("--alpha", type=float, help="alpha-shape circumradius bound (ft)")
    common.add_argument("--lanes", type=int, dest="lane_count", help="number of lane bands")
    common.add_argument("--seed", type=int, dest="kmeans_seed", help="k-means seed")
    common.add_argument("--tol", type=float, dest="match_tol", help="box match tolerance (ft)")
    common.add_argument("--ie-image", type=Path)
    common.add_argument("--usw-image", type=Path)
    common.add_argument("--ground-truth", type=Path)

    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES:
        p = sub.add_parser(name, parents=[common], help=HELP[name], description=HELP[name])
        if name in ("convert", "pipeline"):
            p.add_argument("bundle", nargs="?", type=Path, help="XML survey bundle")
    p = sub.add_parser("synth", help=HELP["synth"], description=HELP["synth"])
    p.add_argument("-o", "--out-dir", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    return parser


FLAG_KEYS = ("out_dir", "alpha", "lane_count", "kmeans_seed", "match_tol", "ie_image", "usw_image", "ground_truth", "bundle")


def config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides: dict[str, object] = {}
    for item in args.set:
        key, val = parse_set_option(item)
        overrides[key] = val
    for key in FLAG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    return load_config(args.config, overrides)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="bridgefuse: %(levelname)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        if args.command == "synth":
            cmd_synth(args.out_dir, args.seed)
        else:
            STAGES[args.command](config_from_args(args))
    except (BridgeFuseError, OSError) as exc:
        log.error("%s", exc)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.error("internal error: %s: %s", type(exc).__name__, exc)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
