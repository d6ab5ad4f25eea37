"""Record types shared by the ingest, signal, imaging and verify stages."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


class Modality(str, enum.Enum):
    IE = "IE"
    USW = "USW"


@dataclass(frozen=True, eq=False)
class SensorTrace:
    """Voltage samples (volts) taken every ``sample_interval`` seconds."""

    samples: np.ndarray
    sample_interval: float

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64).ravel()
        if arr.size == 0:
            raise ValidationError("trace has no samples")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("trace samples must be finite")
        dt = float(self.sample_interval)
        if not math.isfinite(dt) or dt <= 0.0:
            raise ValidationError(f"sample_interval must be > 0, got {self.sample_interval!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_interval", dt)

    def __len__(self) -> int:
        return self.samples.shape[0]

    def __eq__(self, other):
        if not isinstance(other, SensorTrace):
            return NotImplemented
        return self.sample_interval == other.sample_interval and np.array_equal(
            self.samples, other.samples
        )

    __hash__ = None


def _check_finite(**coords: float) -> None:
    for name, value in coords.items():
        if not math.isfinite(value):
            raise ValidationError(f"coordinate {name} must be finite, got {value!r}")


@dataclass(frozen=True)
class IeRecord:
    x: float
    y: float
    trace: SensorTrace

    def __post_init__(self):
        _check_finite(x=self.x, y=self.y)


@dataclass(frozen=True)
class UswRecord:
    x: float
    y: float
    trace_in: SensorTrace
    trace_out: SensorTrace
    sensor_spacing: float  # metres

    def __post_init__(self):
        _check_finite(x=self.x, y=self.y)
        if not (math.isfinite(self.sensor_spacing) and self.sensor_spacing > 0.0):
            raise ValidationError(f"sensor_spacing must be > 0, got {self.sensor_spacing!r}")
        if self.trace_in.sample_interval != self.trace_out.sample_interval:
            raise ValidationError("USW input and received traces differ in sample_interval")
        if len(self.trace_in) != len(self.trace_out):
            raise ValidationError("USW input and received traces differ in length")


@dataclass(frozen=True)
class MaterialProps:
    poisson_ratio: float
    density: float  # kg/m^3

    def __post_init__(self):
        if not 0.0 < self.poisson_ratio < 0.5:
            raise ValidationError(f"poisson_ratio must lie in (0, 0.5), got {self.poisson_ratio!r}")
        if not (math.isfinite(self.density) and self.density > 0.0):
            raise ValidationError(f"density must be > 0, got {self.density!r}")


@dataclass(frozen=True)
class SurveyBundle:
    bridge_id: str
    ie_records: tuple[IeRecord, ...]
    usw_records: tuple[UswRecord, ...]
    material: MaterialProps
    deck_extent: tuple[float, float, float, float]  # x_min, x_max, y_min, y_max (ft)

    def __post_init__(self):
        object.__setattr__(self, "ie_records", tuple(self.ie_records))
        object.__setattr__(self, "usw_records", tuple(self.usw_records))
        x0, x1, y0, y1 = (float(v) for v in self.deck_extent)
        object.__setattr__(self, "deck_extent", (x0, x1, y0, y1))
        if x0 > x1 or y0 > y1:
            raise ValidationError(f"deck_extent is inverted: {self.deck_extent}")
        for rec in (*self.ie_records, *self.usw_records):
            if not (x0 <= rec.x <= x1 and y0 <= rec.y <= y1):
                raise ValidationError(
                    f"record at ({rec.x}, {rec.y}) lies outside deck extent {self.deck_extent}"
                )


@dataclass(frozen=True)
class FeaturePoint:
    x: float
    y: float
    value: float
    modality: Modality = Modality.IE


@dataclass(frozen=True)
class DataBox:
    """Axis-aligned rectangle in deck coordinates (feet)."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValidationError(f"degenerate DataBox {self}")

    def contains(self, x: float, y: float, tol: float = 0.0) -> bool:
        return (
            self.x_min - tol <= x <= self.x_max + tol
            and self.y_min - tol <= y <= self.y_max + tol
        )

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))


@dataclass
class SkipReport:
    """Per-record failures collected during feature extraction."""

    entries: list[tuple[Modality, int, float, float, str]] = field(default_factory=list)

    def add(self, modality: Modality, index: int, x: float, y: float, reason: str) -> None:
        self.entries.append((modality, index, x, y, reason))

    def __len__(self) -> int:
        return len(self.entries)
