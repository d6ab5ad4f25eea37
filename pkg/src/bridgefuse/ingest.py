"""Sensor bundle XML, feature CSV files and unit conversion.

Bundle schema (all attributes are decimal text)::

    <survey bridge_id="..." xy_unit="ft">
      <material nu="0.2" rho="2400"/>
      <deck x_min="0" x_max="30" y_min="0" y_max="15"/>      (optional)
      <ie x="1.0" y="2.0">
        <trace dt="1e-05" dt_unit="s" v_unit="V">0.01 0.02 ...</trace>
      </ie>
      <usw x="1.0" y="2.0" spacing="0.15" spacing_unit="m">
        <in dt="1e-06">...</in>
        <out dt="1e-06">...</out>
      </usw>
    </survey>

Unit attributes are optional and default to the canonical units
(feet, seconds, volts, metres for USW sensor spacing).
"""

from __future__ import annotations

import csv
import io
import math
import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CsvParseError, FormatError, ParseError, SchemaError, ValidationError
from .records import (
    FeaturePoint,
    IeRecord,
    MaterialProps,
    Modality,
    SensorTrace,
    SkipReport,
    SurveyBundle,
    UswRecord,
)

FEET_PER_METRE = 1.0 / 0.3048
PA_PER_KSI = 6.894757e6

LENGTH_TO_FEET = {"ft": 1.0, "m": FEET_PER_METRE, "in": 1.0 / 12.0}
LENGTH_TO_METRES = {"m": 1.0, "mm": 1e-3, "cm": 1e-2, "ft": 0.3048, "in": 0.0254}
TIME_TO_SECONDS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9}
VOLTAGE_TO_VOLTS = {"V": 1.0, "mV": 1e-3, "uV": 1e-6}

FEATURE_HEADER = ("x", "y", "value")


def pa_to_ksi(pa: float) -> float:
    return pa / PA_PER_KSI


def ksi_to_pa(ksi: float) -> float:
    return ksi * PA_PER_KSI


def hz_to_khz(hz: float) -> float:
    return hz / 1000.0


# ---------------------------------------------------------------------------
# XML


def _unit(elem: ET.Element, attr: str, table: dict[str, float]) -> float:
    name = elem.get(attr)
    if name is None:
        return 1.0
    try:
        return table[name.strip()]
    except KeyError:
        raise SchemaError(
            f"<{elem.tag}> {attr}={name!r} is not one of {sorted(table)}", field=attr
        ) from None


def _number(elem: ET.Element, attr: str) -> float:
    raw = elem.get(attr)
    if raw is None:
        raise SchemaError(f"missing field {attr}", field=attr)
    try:
        value = float(raw)
    except ValueError:
        raise SchemaError(f"field {attr} of <{elem.tag}> is not a number: {raw!r}", field=attr) from None
    if not math.isfinite(value):
        raise ValidationError(f"field {attr} of <{elem.tag}> must be finite, got {raw!r}")
    return value


def _child(elem: ET.Element, tag: str) -> ET.Element:
    found = elem.findall(tag)
    if not found:
        raise SchemaError(f"missing field {tag}", field=tag)
    if len(found) > 1:
        raise SchemaError(f"<{elem.tag}> has {len(found)} <{tag}> elements, expected one", field=tag)
    return found[0]


def _trace(elem: ET.Element) -> SensorTrace:
    dt = _number(elem, "dt") * _unit(elem, "dt_unit", TIME_TO_SECONDS)
    if dt <= 0.0:
        raise ValidationError(f"<{elem.tag}> sample interval must be > 0, got dt={elem.get('dt')!r}")
    scale = _unit(elem, "v_unit", VOLTAGE_TO_VOLTS)
    text = (elem.text or "").split()
    if not text:
        raise ValidationError(f"<{elem.tag}> has no samples")
    try:
        samples = np.array([float(tok) for tok in text], dtype=np.float64)
    except ValueError as exc:
        raise SchemaError(f"<{elem.tag}> holds a non-numeric sample: {exc}", field="samples") from None
    return SensorTrace(samples * scale, dt)


def parse_xml_bundle(data: bytes | str) -> SurveyBundle:
    """Parse a survey document into a :class:`SurveyBundle`.

    Raises :class:`ParseError` (with line/column) for malformed XML,
    :class:`SchemaError` for missing or mistyped fields and
    :class:`ValidationError` for values outside their invariants.
    """
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        line, col = exc.position
        reason = str(exc).split(":")[0]
        raise ParseError(f"malformed XML: {reason}", line, col + 1) from None

    if root.tag != "survey":
        raise SchemaError(f"root element must be <survey>, got <{root.tag}>", field="survey")
    bridge_id = root.get("bridge_id")
    if bridge_id is None:
        raise SchemaError("missing field bridge_id", field="bridge_id")
    xy_scale = _unit(root, "xy_unit", LENGTH_TO_FEET)

    mat_el = _child(root, "material")
    material = MaterialProps(_number(mat_el, "nu"), _number(mat_el, "rho"))

    ie: list[IeRecord] = []
    usw: list[UswRecord] = []
    deck = None
    for elem in root:
        if elem.tag == "material":
            continue
        if elem.tag == "deck":
            deck = tuple(_number(elem, k) * xy_scale for k in ("x_min", "x_max", "y_min", "y_max"))
        elif elem.tag == "ie":
            x = _number(elem, "x") * xy_scale
            y = _number(elem, "y") * xy_scale
            ie.append(IeRecord(x, y, _trace(_child(elem, "trace"))))
        elif elem.tag == "usw":
            x = _number(elem, "x") * xy_scale
            y = _number(elem, "y") * xy_scale
            spacing = _number(elem, "spacing") * _unit(elem, "spacing_unit", LENGTH_TO_METRES)
            if spacing <= 0.0:
                raise ValidationError(f"USW spacing must be > 0, got {elem.get('spacing')!r}")
            usw.append(
                UswRecord(x, y, _trace(_child(elem, "in")), _trace(_child(elem, "out")), spacing)
            )
        else:
            raise SchemaError(f"unexpected element <{elem.tag}> in <survey>", field=elem.tag)

    if deck is None:
        deck = _bbox([(r.x, r.y) for r in (*ie, *usw)])
    return SurveyBundle(bridge_id, tuple(ie), tuple(usw), material, deck)


def _bbox(xy: Sequence[tuple[float, float]]) -> tuple[float, float, float, float]:
    if not xy:
        return (0.0, 0.0, 0.0, 0.0)
    xs = [p[0] for p in xy]
    ys = [p[1] for p in xy]
    return (min(xs), max(xs), min(ys), max(ys))


def read_xml_bundle(path: str | Path) -> SurveyBundle:
    return parse_xml_bundle(Path(path).read_bytes())


def _samples_text(trace: SensorTrace, fmt: str) -> str:
    if fmt == "r":
        return " ".join(repr(v) for v in trace.samples.tolist())
    return " ".join(format(v, fmt) for v in trace.samples.tolist())


def bundle_to_xml(bundle: SurveyBundle, sample_format: str = ".6g") -> bytes:
    """Serialise a bundle in canonical units; byte-stable for equal input.

    ``sample_format`` is a format spec for trace samples; ``"r"`` writes
    ``repr`` so samples round-trip exactly.
    """
    out = io.StringIO()
    w = out.write
    w('<?xml version="1.0" encoding="UTF-8"?>\n')
    w(f'<survey bridge_id="{_attr(bundle.bridge_id)}" xy_unit="ft">\n')
    m = bundle.material
    w(f'  <material nu="{m.poisson_ratio!r}" rho="{m.density!r}"/>\n')
    x0, x1, y0, y1 = bundle.deck_extent
    w(f'  <deck x_min="{x0!r}" x_max="{x1!r}" y_min="{y0!r}" y_max="{y1!r}"/>\n')
    for rec in bundle.ie_records:
        w(f'  <ie x="{rec.x!r}" y="{rec.y!r}">')
        w(f'<trace dt="{rec.trace.sample_interval!r}">{_samples_text(rec.trace, sample_format)}</trace>')
        w("</ie>\n")
    for rec in bundle.usw_records:
        w(f'  <usw x="{rec.x!r}" y="{rec.y!r}" spacing="{rec.sensor_spacing!r}">')
        w(f'<in dt="{rec.trace_in.sample_interval!r}">{_samples_text(rec.trace_in, sample_format)}</in>')
        w(f'<out dt="{rec.trace_out.sample_interval!r}">{_samples_text(rec.trace_out, sample_format)}</out>')
        w("</usw>\n")
    w("</survey>\n")
    return out.getvalue().encode("utf-8")


def _attr(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace('"', "&quot;").replace("<", "&lt;").replace(">", "&gt;")
    )


# ---------------------------------------------------------------------------
# feature CSV


def write_feature_csv(points: Iterable[FeaturePoint], path: str | Path) -> None:
    """Write ``x,y,value`` rows; floats use ``repr`` so they round-trip exactly."""
    rows = []
    for p in points:
        for v in (p.x, p.y, p.value):
            if not math.isfinite(v):
                raise ValidationError(f"non-finite value in feature point {p}")
        rows.append(f"{p.x!r},{p.y!r},{p.value!r}\n")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(FEATURE_HEADER) + "\n")
        fh.writelines(rows)


def read_feature_csv(path: str | Path, modality: Modality = Modality.IE) -> list[FeaturePoint]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != FEATURE_HEADER:
            raise FormatError(f"{path}: expected header 'x,y,value', got {header!r}")
        points = []
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != 3:
                raise CsvParseError(f"expected 3 columns, got {len(row)}", row_no)
            try:
                x, y, v = (float(c) for c in row)
            except ValueError:
                raise CsvParseError(f"non-numeric cell in {row!r}", row_no) from None
            points.append(FeaturePoint(x, y, v, modality))
    return points


FUSED_HEADER = ("x", "y", "value", "modality")


def write_fused_csv(points: Iterable[FeaturePoint], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(FUSED_HEADER) + "\n")
        for p in points:
            fh.write(f"{p.x!r},{p.y!r},{p.value!r},{p.modality.value}\n")


def read_fused_csv(path: str | Path) -> list[FeaturePoint]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != FUSED_HEADER:
            raise FormatError(f"{path}: expected header 'x,y,value,modality', got {header!r}")
        points = []
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != 4:
                raise CsvParseError(f"expected 4 columns, got {len(row)}", row_no)
            try:
                x, y, v = (float(c) for c in row[:3])
                mod = Modality(row[3].strip())
            except ValueError:
                raise CsvParseError(f"bad cell in {row!r}", row_no) from None
            points.append(FeaturePoint(x, y, v, mod))
    return points


def write_skipped_csv(report: SkipReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["modality", "index", "x", "y", "reason"])
        for mod, idx, x, y, reason in report.entries:
            writer.writerow([mod.value, idx, repr(x), repr(y), reason])
