"""Deterministic synthetic survey bundles with planted defect rectangles.

IE traces are damped sinusoids plus a small sensor bias and white noise.
Inside a defect the resonance drops into the defective band and deepens
toward the rectangle's centre; outside it is drawn from the healthy band.
USW pairs are a Gaussian tone burst and its attenuated copy delayed by a
whole number of samples chosen so the recovered modulus lands in the
target band (low and centre-weighted inside defects).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SpecError
from .records import DataBox, IeRecord, MaterialProps, SensorTrace, SurveyBundle, UswRecord
from .signal import delay_for_modulus


@dataclass(frozen=True)
class SyntheticSpec:
    deck_extent: tuple[float, float, float, float] = (0.0, 30.0, 0.0, 15.0)
    pitch: float = 0.5  # ft, for both grids
    usw_offset: float = 0.25  # ft, USW grid shift in x and y
    defects: tuple[tuple[float, float, float, float], ...] = ()  # (x0, x1, y0, y1)
    noise: float = 0.02  # white-noise sigma relative to signal amplitude
    ie_dt: float = 1e-5
    ie_samples: int = 512
    ie_decay: float = 1.5e-3  # s
    ie_bias: float = 0.05  # V
    usw_dt: float = 1e-6
    usw_samples: int = 256
    usw_center_freq: float = 50e3  # Hz
    usw_burst_sigma: float = 8e-6  # s
    usw_burst_t0: float = 30e-6  # s
    spacing: float = 0.15  # m
    healthy_khz: tuple[float, float] = (10.0, 12.0)
    defect_khz: tuple[float, float] = (2.0, 4.0)
    healthy_ksi: tuple[float, float] = (4000.0, 5000.0)
    defect_ksi: tuple[float, float] = (950.0, 1900.0)
    material: MaterialProps = field(default_factory=lambda: MaterialProps(0.2, 2400.0))
    bridge_id: str = "SYNTH-0001"


DEFAULT_DEFECTS = (
    (3.0, 8.0, 2.0, 6.0),
    (12.0, 17.5, 8.5, 12.5),
    (20.0, 26.0, 2.5, 6.5),
    (4.0, 9.0, 9.0, 13.0),
)


def default_spec(**overrides) -> SyntheticSpec:
    """Four-defect scenario on a 30 x 15 ft deck."""
    overrides.setdefault("defects", DEFAULT_DEFECTS)
    return SyntheticSpec(**overrides)


def _grid(lo: float, hi: float, start: float, pitch: float) -> np.ndarray:
    n = int(math.floor((hi - start) / pitch + 1e-9)) + 1
    return start + pitch * np.arange(n)


def _severity(x: float, y: float, rects: list[DataBox]) -> float | None:
    """0 at a defect centre, 1 on its border; None outside every defect."""
    best = None
    for r in rects:
        if r.contains(x, y):
            cx, cy = r.center
            hx = 0.5 * (r.x_max - r.x_min)
            hy = 0.5 * (r.y_max - r.y_min)
            s = max(abs(x - cx) / hx, abs(y - cy) / hy)
            best = s if best is None else min(best, s)
    return best


def _validate(spec: SyntheticSpec) -> list[DataBox]:
    x0, x1, y0, y1 = spec.deck_extent
    if not (x0 < x1 and y0 < y1):
        raise SpecError(f"deck extent {spec.deck_extent} is degenerate")
    if spec.pitch <= 0 or spec.ie_dt <= 0 or spec.usw_dt <= 0 or spec.spacing <= 0:
        raise SpecError("pitch, sample intervals and spacing must be > 0")
    if spec.noise < 0:
        raise SpecError("noise must be >= 0")
    rects = []
    for d in spec.defects:
        a, b, c, e = d
        if not (a < b and c < e):
            raise SpecError(f"defect rectangle {d} is degenerate")
        if a < x0 or b > x1 or c < y0 or e > y1:
            raise SpecError(f"defect rectangle {d} lies outside deck extent {spec.deck_extent}")
        rects.append(DataBox(a, b, c, e))
    return rects


def _ie_trace(spec: SyntheticSpec, freq_khz: float, rng: np.random.Generator) -> SensorTrace:
    t = spec.ie_dt * np.arange(spec.ie_samples)
    phase = rng.uniform(0.0, 2.0 * math.pi)
    sig = np.exp(-t / spec.ie_decay) * np.sin(2.0 * math.pi * freq_khz * 1e3 * t + phase)
    sig = sig + spec.ie_bias + spec.noise * rng.standard_normal(spec.ie_samples)
    return SensorTrace(sig, spec.ie_dt)


def _burst(spec: SyntheticSpec, shift: float) -> np.ndarray:
    t = spec.usw_dt * np.arange(spec.usw_samples) - spec.usw_burst_t0 - shift
    return np.exp(-0.5 * (t / spec.usw_burst_sigma) ** 2) * np.cos(
        2.0 * math.pi * spec.usw_center_freq * t
    )


def _delay_samples(spec: SyntheticSpec, modulus: float, band: tuple[float, float]) -> int:
    lo = math.ceil(delay_for_modulus(band[1], spec.spacing, spec.material) / spec.usw_dt)
    hi = math.floor(delay_for_modulus(band[0], spec.spacing, spec.material) / spec.usw_dt)
    if lo > hi:
        raise SpecError(f"modulus band {band} is narrower than one delay sample")
    k = round(delay_for_modulus(modulus, spec.spacing, spec.material) / spec.usw_dt)
    return min(max(k, lo), hi)


def generate_synthetic_bundle(
    spec: SyntheticSpec, seed: int
) -> tuple[SurveyBundle, list[DataBox]]:
    """Build a bundle and its ground-truth defect boxes; pure in ``(spec, seed)``."""
    rects = _validate(spec)
    rng = np.random.default_rng(seed)
    x0, x1, y0, y1 = spec.deck_extent

    ie = []
    for y in _grid(y0, y1, y0, spec.pitch):
        for x in _grid(x0, x1, x0, spec.pitch):
            x, y = float(x), float(y)
            sev = _severity(x, y, rects)
            if sev is None:
                f = rng.uniform(*spec.healthy_khz)
            else:
                lo, hi = spec.defect_khz
                span = hi - lo
                f = lo + span * (0.15 + 0.7 * sev) + rng.uniform(-0.07, 0.07) * span
            ie.append(IeRecord(x, y, _ie_trace(spec, f, rng)))

    usw = []
    max_lag = spec.usw_samples - int(
        math.ceil((spec.usw_burst_t0 + 5 * spec.usw_burst_sigma) / spec.usw_dt)
    )
    for y in _grid(y0, y1, y0 + spec.usw_offset, spec.pitch):
        for x in _grid(x0, x1, x0 + spec.usw_offset, spec.pitch):
            x, y = float(x), float(y)
            sev = _severity(x, y, rects)
            if sev is None:
                band = spec.healthy_ksi
                e = rng.uniform(*band)
            else:
                band = spec.defect_ksi
                lo, hi = band
                span = hi - lo
                e = lo + span * (0.05 + 0.85 * sev * sev) + rng.uniform(-0.05, 0.05) * span
            k = _delay_samples(spec, e, band)
            if k > max_lag:
                raise SpecError(
                    f"usw_samples={spec.usw_samples} too short for a {k}-sample delay"
                )
            amp = rng.uniform(0.4, 0.7)
            tin = _burst(spec, 0.0) + spec.noise * rng.standard_normal(spec.usw_samples)
            tout = amp * _burst(spec, k * spec.usw_dt) + spec.noise * amp * rng.standard_normal(
                spec.usw_samples
            )
            usw.append(
                UswRecord(
                    x, y, SensorTrace(tin, spec.usw_dt), SensorTrace(tout, spec.usw_dt), spec.spacing
                )
            )

    bundle = SurveyBundle(spec.bridge_id, tuple(ie), tuple(usw), spec.material, spec.deck_extent)
    return bundle, rects
