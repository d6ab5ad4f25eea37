"""Trace-to-feature conversion.

IE records yield a peak frequency (kHz) from the amplitude spectrum.  USW
records yield an elasticity modulus (ksi): the inter-sensor delay from
cross-correlation gives the Rayleigh velocity, which is converted to shear
velocity with the Viktorov ratio and then to the dynamic modulus
``E = 2 rho Vs^2 (1 + nu)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import BridgeFuseError, CausalityError, DegenerateSignalError, InputError
from .ingest import PA_PER_KSI
from .records import (
    FeaturePoint,
    MaterialProps,
    Modality,
    SensorTrace,
    SkipReport,
    SurveyBundle,
    UswRecord,
)

MIN_TRACE_LENGTH = 8
# amplitudes this close to the maximum count as tied; the lowest frequency wins
PEAK_TIE_RTOL = 1e-9
# V_R / V_S = (a + b nu) / (1 + nu)
VIKTOROV = (0.87, 1.12)


@dataclass(frozen=True, eq=False)
class Spectrum:
    frequencies: np.ndarray  # kHz, strictly increasing, DC excluded
    amplitudes: np.ndarray

    def __len__(self) -> int:
        return self.frequencies.shape[0]

    @property
    def bin_width(self) -> float:
        if len(self) > 1:
            return float(self.frequencies[1] - self.frequencies[0])
        return float(self.frequencies[0])


def _windowed(trace: SensorTrace, hann: bool) -> np.ndarray:
    n = len(trace)
    if n < MIN_TRACE_LENGTH:
        raise InputError(f"trace needs at least {MIN_TRACE_LENGTH} samples, got {n}")
    x = trace.samples
    if hann:
        x = x * np.hanning(n)
    return x


def amplitude_spectrum(
    trace: SensorTrace, *, hann: bool = False, min_frequency: float | None = None
) -> Spectrum:
    """One-sided magnitude spectrum over (0, Nyquist] in kHz.

    Coefficients use the orthonormal DFT scaling, so the two-sided squared
    magnitudes sum to the trace energy.  ``min_frequency`` (kHz) drops bins
    below a cutoff; by default only the DC bin is dropped.
    """
    x = _windowed(trace, hann)
    coeffs = np.fft.rfft(x, norm="ortho")
    freqs = np.fft.rfftfreq(x.shape[0], trace.sample_interval) / 1000.0
    keep = slice(1, None)
    freqs = freqs[keep]
    amps = np.abs(coeffs[keep])
    if min_frequency is not None:
        sel = freqs >= min_frequency
        if not np.any(sel):
            raise InputError(f"min_frequency {min_frequency} kHz is above Nyquist")
        freqs = freqs[sel]
        amps = amps[sel]
    return Spectrum(freqs, amps)


def spectral_energy(trace: SensorTrace) -> float:
    """Sum of squared two-sided DFT magnitudes, DC included."""
    coeffs = np.fft.fft(trace.samples, norm="ortho")
    return float(np.sum(coeffs.real**2 + coeffs.imag**2))


def peak_frequency(
    trace: SensorTrace, *, hann: bool = False, min_frequency: float | None = None
) -> float:
    spec = amplitude_spectrum(trace, hann=hann, min_frequency=min_frequency)
    amps = spec.amplitudes
    top = amps.max()
    idx = int(np.argmax(amps >= top * (1.0 - PEAK_TIE_RTOL)))
    return float(spec.frequencies[idx])


def cross_correlation_delay(a: SensorTrace, b: SensorTrace) -> float:
    """Delay of ``b`` behind ``a`` in seconds, from the correlation maximum.

    The best lag must be non-negative: a received signal that leads its
    input means the sensors are swapped, which raises :class:`CausalityError`.
    """
    if len(a) != len(b):
        raise InputError(f"trace lengths differ: {len(a)} vs {len(b)}")
    if a.sample_interval != b.sample_interval:
        raise InputError("traces differ in sample_interval")
    if not np.any(a.samples) or not np.any(b.samples):
        raise DegenerateSignalError("zero-energy trace")
    corr = kernels.xcorr_full(a.samples, b.samples)
    lag = int(np.argmax(corr)) - (len(a) - 1)
    if lag < 0:
        raise CausalityError(f"received signal leads input by {-lag} samples")
    return lag * a.sample_interval


def rayleigh_to_shear(v_r: float, nu: float, coeffs: tuple[float, float] = VIKTOROV) -> float:
    a, b = coeffs
    return v_r * (1.0 + nu) / (a + b * nu)


def dynamic_modulus_pa(v_s: float, density: float, nu: float) -> float:
    return 2.0 * density * v_s * v_s * (1.0 + nu)


def modulus_from_delay(
    delay: float,
    spacing: float,
    material: MaterialProps,
    coeffs: tuple[float, float] = VIKTOROV,
) -> float:
    if delay <= 0.0:
        raise DegenerateSignalError("zero inter-sensor delay; velocity is undefined")
    v_r = spacing / delay
    v_s = rayleigh_to_shear(v_r, material.poisson_ratio, coeffs)
    return dynamic_modulus_pa(v_s, material.density, material.poisson_ratio) / PA_PER_KSI


def delay_for_modulus(
    modulus_ksi: float,
    spacing: float,
    material: MaterialProps,
    coeffs: tuple[float, float] = VIKTOROV,
) -> float:
    """Inverse of :func:`modulus_from_delay`; used by the synthetic generator."""
    nu = material.poisson_ratio
    v_s = math.sqrt(modulus_ksi * PA_PER_KSI / (2.0 * material.density * (1.0 + nu)))
    a, b = coeffs
    v_r = v_s * (a + b * nu) / (1.0 + nu)
    return spacing / v_r


def elasticity_modulus(
    rec: UswRecord, mat: MaterialProps, coeffs: tuple[float, float] = VIKTOROV
) -> float:
    delay = cross_correlation_delay(rec.trace_in, rec.trace_out)
    return modulus_from_delay(delay, rec.sensor_spacing, mat, coeffs)


@dataclass
class FeatureSet:
    ie: list[FeaturePoint] = field(default_factory=list)
    usw: list[FeaturePoint] = field(default_factory=list)
    skipped: SkipReport = field(default_factory=SkipReport)


def extract_features(
    bundle: SurveyBundle,
    *,
    hann: bool = False,
    min_frequency: float | None = None,
    coeffs: tuple[float, float] = VIKTOROV,
) -> FeatureSet:
    """One feature point per record; failing records land in ``skipped``."""
    out = FeatureSet()
    for i, rec in enumerate(bundle.ie_records):
        try:
            f = peak_frequency(rec.trace, hann=hann, min_frequency=min_frequency)
        except BridgeFuseError as exc:
            out.skipped.add(Modality.IE, i, rec.x, rec.y, str(exc))
            continue
        out.ie.append(FeaturePoint(rec.x, rec.y, f, Modality.IE))
    for i, rec in enumerate(bundle.usw_records):
        try:
            e = elasticity_modulus(rec, bundle.material, coeffs)
        except BridgeFuseError as exc:
            out.skipped.add(Modality.USW, i, rec.x, rec.y, str(exc))
            continue
        out.usw.append(FeaturePoint(rec.x, rec.y, e, Modality.USW))
    return out
