"""Fuse impact-echo and ultrasonic-surface-wave bridge deck surveys into
defect regions and cross-check them against contour-plot images."""

__version__ = "0.1.0"

from ._accel import backend
from .geometry import FusedDefectSet, RegionSet, alpha_shape, fuse, intersect_regions, lane_layout
from .imaging import AxisCalibration, DetectConfig, PixelBox, detect_defect_boxes
from .ingest import parse_xml_bundle, read_feature_csv, read_xml_bundle, write_feature_csv
from .records import DataBox, FeaturePoint, MaterialProps, Modality, SensorTrace, SurveyBundle
from .signal import elasticity_modulus, extract_features, peak_frequency
from .threshold import filter_defects, ie_threshold, kmeans_1d, usw_threshold
from .verify import match_points_to_boxes, micro_metrics

__all__ = [
    "AxisCalibration",
    "DataBox",
    "DetectConfig",
    "FeaturePoint",
    "FusedDefectSet",
    "MaterialProps",
    "Modality",
    "PixelBox",
    "RegionSet",
    "SensorTrace",
    "SurveyBundle",
    "alpha_shape",
    "backend",
    "detect_defect_boxes",
    "elasticity_modulus",
    "extract_features",
    "filter_defects",
    "fuse",
    "ie_threshold",
    "intersect_regions",
    "kmeans_1d",
    "lane_layout",
    "match_points_to_boxes",
    "micro_metrics",
    "parse_xml_bundle",
    "peak_frequency",
    "read_feature_csv",
    "read_xml_bundle",
    "usw_threshold",
    "write_feature_csv",
]
