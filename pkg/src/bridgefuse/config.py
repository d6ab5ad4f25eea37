"""Run configuration: flat ``key = value`` text with ``#`` comments.

Precedence, lowest first: built-in defaults, the config file, ``--set``
overrides, then dedicated command-line flags.  Relative paths in a config
file resolve against the file's directory; relative paths given on the
command line resolve against the working directory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import UsageError
from .imaging import DetectConfig, HsvConfig, MorphLadder
from .records import MaterialProps, Modality


def _float(text: str) -> float:
    return float(text)


def _opt_float(text: str) -> float | None:
    return None if text.strip().lower() in ("", "none") else float(text)


def _int(text: str) -> int:
    return int(text)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _steps(text: str) -> tuple[tuple[int, int], ...]:
    out = []
    for tok in text.split(","):
        k, it = tok.strip().lower().split("x")
        out.append((int(k), int(it)))
    return tuple(out)


PATH_KEYS = (
    "bundle",
    "out_dir",
    "ie_features",
    "usw_features",
    "ie_image",
    "usw_image",
    "ie_calibration",
    "usw_calibration",
    "ground_truth",
)

VALUE_KEYS = {
    "alpha": _float,
    "lane_count": _int,
    "kmeans_seed": _int,
    "match_tol": _float,
    "cell": _float,
    "hann": _bool,
    "min_frequency": _opt_float,
    "poisson_ratio": _opt_float,
    "density": _opt_float,
    "hsv_red_max": _float,
    "hsv_wrap_min": _float,
    "hsv_yellow_max": _float,
    "hsv_s_min": _float,
    "hsv_v_min": _float,
    "canny_low": _float,
    "canny_high": _float,
    "morph_cuts": _floats,
    "morph_steps": _steps,
    "min_area": _int,
}


@dataclass(frozen=True)
class RunConfig:
    bundle: Path | None = None
    out_dir: Path = Path("out")
    ie_features: Path | None = None
    usw_features: Path | None = None
    ie_image: Path | None = None
    usw_image: Path | None = None
    ie_calibration: Path | None = None
    usw_calibration: Path | None = None
    ground_truth: Path | None = None
    alpha: float = 0.5  # ft
    lane_count: int = 4
    kmeans_seed: int = 0
    match_tol: float = 0.5  # ft
    cell: float = 0.25  # ft, contour grid spacing
    hann: bool = False
    min_frequency: float | None = None  # kHz
    poisson_ratio: float | None = None  # overrides the bundle's material
    density: float | None = None
    hsv_red_max: float = 20.0
    hsv_wrap_min: float = 340.0
    hsv_yellow_max: float = 65.0
    hsv_s_min: float = 0.35
    hsv_v_min: float = 0.35
    canny_low: float = 50.0
    canny_high: float = 150.0
    morph_cuts: tuple[float, ...] = (0.05, 0.15)
    morph_steps: tuple[tuple[int, int], ...] = ((3, 1), (5, 2), (7, 3))
    min_area: int = 40
    source: Path | None = field(default=None, compare=False)

    # derived paths -------------------------------------------------------

    def features_path(self, mod: Modality) -> Path:
        given = self.ie_features if mod == Modality.IE else self.usw_features
        return given or self.out_dir / f"{mod.value.lower()}_features.csv"

    def image_path(self, mod: Modality) -> Path | None:
        return self.ie_image if mod == Modality.IE else self.usw_image

    def calibration_path(self, mod: Modality) -> Path | None:
        given = self.ie_calibration if mod == Modality.IE else self.usw_calibration
        if given is not None:
            return given
        img = self.image_path(mod)
        return img.with_suffix(".cal") if img is not None else None

    def detect_config(self) -> DetectConfig:
        hsv = HsvConfig(
            self.hsv_red_max, self.hsv_wrap_min, self.hsv_yellow_max, self.hsv_s_min, self.hsv_v_min
        )
        return DetectConfig(
            hsv, self.canny_low, self.canny_high, MorphLadder(self.morph_cuts, self.morph_steps), self.min_area
        )

    def material(self, base: MaterialProps) -> MaterialProps:
        return MaterialProps(
            base.poisson_ratio if self.poisson_ratio is None else self.poisson_ratio,
            base.density if self.density is None else self.density,
        )

    def validate(self) -> "RunConfig":
        if not (self.alpha > 0):
            raise UsageError(f"alpha must be > 0, got {self.alpha}")
        if self.lane_count < 1:
            raise UsageError(f"lane_count must be >= 1, got {self.lane_count}")
        if not (self.match_tol >= 0 and math.isfinite(self.match_tol)):
            raise UsageError(f"match_tol must be >= 0, got {self.match_tol}")
        if not (self.cell > 0 and math.isfinite(self.cell)):
            raise UsageError(f"cell must be > 0, got {self.cell}")
        if not (0 < self.canny_low < self.canny_high):
            raise UsageError("canny thresholds need 0 < canny_low < canny_high")
        if self.min_area < 1:
            raise UsageError(f"min_area must be >= 1, got {self.min_area}")
        try:
            self.detect_config()
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        return self


def _coerce(key: str, text: str, base: Path) -> object:
    if key in PATH_KEYS:
        p = Path(text.strip())
        return p if p.is_absolute() else base / p
    if key not in VALUE_KEYS:
        raise UsageError(f"unknown config key {key!r}")
    try:
        return VALUE_KEYS[key](text.strip())
    except ValueError as exc:
        raise UsageError(f"bad value for {key}: {exc}") from None


def parse_config_text(text: str, base: Path = Path("."), origin: str = "config") -> dict[str, object]:
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{origin} line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        try:
            values[key] = _coerce(key, val, base)
        except UsageError as exc:
            raise UsageError(f"{origin} line {lineno}: {exc}") from None
    return values


def load_config(path: str | Path | None, overrides: dict[str, object] | None = None) -> RunConfig:
    values: dict[str, object] = {}
    src = None
    if path is not None:
        src = Path(path)
        try:
            text = src.read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read config {src}: {exc.strerror}") from None
        values.update(parse_config_text(text, src.parent, str(src)))
    values.update(overrides or {})
    return replace(RunConfig(), source=src, **values).validate()


def parse_set_option(item: str) -> tuple[str, object]:
    """One ``--set key=value`` item; paths resolve against the working directory."""
    if "=" not in item:
        raise UsageError(f"--set expects key=value, got {item!r}")
    key, val = (s.strip() for s in item.split("=", 1))
    return key, _coerce(key, val, Path("."))


def config_text(cfg: RunConfig, base: Path | None = None) -> str:
    """Serialize every non-default field, paths relative to ``base`` when possible."""
    default = RunConfig()
    lines = []
    for f in fields(RunConfig):
        if f.name == "source":
            continue
        v = getattr(cfg, f.name)
        if v == getattr(default, f.name):
            continue
        if isinstance(v, Path):
            if base is not None:
                try:
                    v = v.relative_to(base)
                except ValueError:
                    pass
            text = v.as_posix()
        elif f.name == "morph_steps":
            text = ", ".join(f"{k}x{it}" for k, it in v)
        elif f.name == "morph_cuts":
            text = ", ".join(repr(c) for c in v)
        elif isinstance(v, bool):
            text = "true" if v else "false"
        else:
            text = repr(v) if isinstance(v, float) else str(v)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"
