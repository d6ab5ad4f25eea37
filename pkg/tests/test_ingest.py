import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bridgefuse import ingest, synth
from bridgefuse.errors import (
    BridgeFuseError,
    CsvParseError,
    FormatError,
    ParseError,
    SchemaError,
    SpecError,
    ValidationError,
)
from bridgefuse.records import FeaturePoint, MaterialProps, Modality, SensorTrace, SkipReport
from bridgefuse.signal import extract_features

from conftest import fp


def _doc(ie=(), usw=(), material='<material nu="0.2" rho="2400"/>', extra=""):
    parts = ['<survey bridge_id="B-1">', material, extra]
    for x, y in ie:
        parts.append(f'<ie x="{x}" y="{y}"><trace dt="1e-5">0 1 0 -1 0 1 0 -1</trace></ie>')
    for x, y in usw:
        parts.append(
            f'<usw x="{x}" y="{y}" spacing="0.15">'
            '<in dt="1e-6">0 1 0 0 0 0 0 0</in><out dt="1e-6">0 0 0 1 0 0 0 0</out></usw>'
        )
    parts.append("</survey>")
    return "\n".join(parts)


class TestXml:
    def test_counts_preserved(self):
        b = ingest.parse_xml_bundle(_doc(ie=[(0, 0), (1, 1)], usw=[(0, 1), (1, 0), (0.5, 0.5)]))
        assert (len(b.ie_records), len(b.usw_records)) == (2, 3)
        assert b.bridge_id == "B-1"
        assert b.material == MaterialProps(0.2, 2400.0)

    def test_missing_y_names_field(self):
        doc = _doc(ie=[(0, 0)]).replace('y="0"', "", 1)
        with pytest.raises(SchemaError, match="missing field y") as info:
            ingest.parse_xml_bundle(doc)
        assert info.value.field == "y"

    def test_zero_sample_interval(self):
        doc = _doc(ie=[(0, 0)]).replace('dt="1e-5"', 'dt="0"')
        with pytest.raises(ValidationError):
            ingest.parse_xml_bundle(doc)

    def test_malformed_reports_position(self):
        with pytest.raises(ParseError) as info:
            ingest.parse_xml_bundle('<survey bridge_id="b">\n  <ie x="1" y="2">\n</survey>')
        assert info.value.line == 3
        assert info.value.column is not None and info.value.column >= 1

    def test_unit_conversion(self):
        doc = (
            '<survey bridge_id="u" xy_unit="m"><material nu="0.25" rho="2300"/>'
            '<ie x="1" y="0"><trace dt="10" dt_unit="us" v_unit="mV">1 2 3 4 5 6 7 8</trace></ie>'
            '<usw x="0" y="0" spacing="150" spacing_unit="mm">'
            '<in dt="1e-6">1 0 0 0 0 0 0 0</in><out dt="1e-6">0 1 0 0 0 0 0 0</out></usw>'
            "</survey>"
        )
        b = ingest.parse_xml_bundle(doc)
        rec = b.ie_records[0]
        assert rec.x == pytest.approx(1 / 0.3048)
        assert rec.trace.sample_interval == pytest.approx(1e-5)
        assert rec.trace.samples[0] == pytest.approx(1e-3)
        assert b.usw_records[0].sensor_spacing == pytest.approx(0.15)

    def test_unknown_element_is_schema_error(self):
        with pytest.raises(SchemaError):
            ingest.parse_xml_bundle(_doc(ie=[(0, 0)], extra="<gps/>"))

    def test_mismatched_usw_traces(self):
        doc = _doc(usw=[(0, 0)]).replace('<out dt="1e-6">', '<out dt="2e-6">')
        with pytest.raises(BridgeFuseError):
            ingest.parse_xml_bundle(doc)

    def test_round_trip_through_writer(self, small_bundle):
        bundle, _ = small_bundle
        text = ingest.bundle_to_xml(bundle, sample_format="r")
        back = ingest.parse_xml_bundle(text)
        assert back.deck_extent == bundle.deck_extent
        assert len(back.ie_records) == len(bundle.ie_records)
        for a, b in zip(back.ie_records[:20], bundle.ie_records[:20]):
            assert (a.x, a.y) == (b.x, b.y)
            np.testing.assert_array_equal(a.trace.samples, b.trace.samples)
        assert ingest.bundle_to_xml(back, sample_format="r") == text

    @given(
        st.lists(
            st.sampled_from(
                [
                    '<ie x="1" y="1"><trace dt="1e-5">1 2 3 4 5 6 7 8</trace></ie>',
                    '<ie x="1"><trace dt="1e-5">1 2</trace></ie>',
                    '<ie x="a" y="1"><trace dt="1">1</trace></ie>',
                    '<ie x="1" y="1"><trace dt="-1">1</trace></ie>',
                    '<ie x="1" y="1"><trace dt="1e-5"></trace></ie>',
                    '<ie x="1" y="1"><trace dt="1e-5">1 x</trace></ie>',
                    '<ie x="1" y="1"><trace dt="1e-5">nan</trace></ie>',
                    '<ie x="inf" y="1"><trace dt="1e-5">1</trace></ie>',
                    '<ie x="1" y="1"/>',
                    '<usw x="0" y="0" spacing="0.1"><in dt="1">1 2</in><out dt="1">2 1</out></usw>',
                    '<usw x="0" y="0" spacing="0"><in dt="1">1</in><out dt="1">1</out></usw>',
                    '<usw x="0" y="0" spacing="0.1"><in dt="1">1 2</in></usw>',
                    '<usw x="0" y="0" spacing="1" spacing_unit="furlong"><in dt="1">1</in><out dt="1">1</out></usw>',
                    '<deck x_min="0" x_max="2" y_min="0" y_max="2"/>',
                    '<deck x_min="5" x_max="6" y_min="5" y_max="6"/>',
                    '<material nu="0.7" rho="1"/>',
                    "<note/>",
                ]
            ),
            max_size=6,
        ),
        st.sampled_from(['<material nu="0.2" rho="2400"/>', '<material nu="0.2"/>', ""]),
    )
    def test_fuzzed_documents_parse_or_raise_structured(self, elems, material):
        doc = '<survey bridge_id="f">' + material + "".join(elems) + "</survey>"
        try:
            ingest.parse_xml_bundle(doc)
        except BridgeFuseError:
            pass


class TestFeatureCsv:
    def test_single_row_round_trip(self, tmp_path):
        path = tmp_path / "f.csv"
        pts = [fp(1.0, 2.0, 4.31)]
        ingest.write_feature_csv(pts, path)
        assert path.read_bytes() == b"x,y,value\n1.0,2.0,4.31\n"
        assert ingest.read_feature_csv(path) == pts

    def test_empty(self, tmp_path):
        path = tmp_path / "e.csv"
        ingest.write_feature_csv([], path)
        assert path.read_text() == "x,y,value\n"
        assert ingest.read_feature_csv(path) == []

    def test_non_numeric_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,y,value\na,2,3\n")
        with pytest.raises(CsvParseError) as info:
            ingest.read_feature_csv(path)
        assert info.value.row == 1

    def test_wrong_header(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("x,y,val\n1,2,3\n")
        with pytest.raises(FormatError):
            ingest.read_feature_csv(path)

    def test_non_finite_rejected_on_write(self, tmp_path):
        with pytest.raises(ValidationError):
            ingest.write_feature_csv([fp(0, 0, math.nan)], tmp_path / "n.csv")

    @given(
        st.lists(
            st.tuples(
                st.floats(allow_nan=False, allow_infinity=False),
                st.floats(allow_nan=False, allow_infinity=False),
                st.floats(allow_nan=False, allow_infinity=False),
            ),
            max_size=30,
        ),
        st.sampled_from(list(Modality)),
    )
    def test_round_trip_property(self, tmp_path_factory, rows, mod):
        path = tmp_path_factory.mktemp("csv") / "p.csv"
        pts = [FeaturePoint(x, y, v, mod) for x, y, v in rows]
        ingest.write_feature_csv(pts, path)
        assert ingest.read_feature_csv(path, mod) == pts

    def test_fused_csv_round_trip(self, tmp_path):
        pts = [fp(1, 2, 3.5), fp(4, 5, 1800.25, Modality.USW)]
        ingest.write_fused_csv(pts, tmp_path / "fused.csv")
        assert (tmp_path / "fused.csv").read_text().splitlines()[0] == "x,y,value,modality"
        assert ingest.read_fused_csv(tmp_path / "fused.csv") == pts

    def test_skipped_csv(self, tmp_path):
        rep = SkipReport()
        rep.add(Modality.USW, 3, 1.0, 2.0, "zero-energy trace, retry")
        ingest.write_skipped_csv(rep, tmp_path / "s.csv")
        assert (tmp_path / "s.csv").read_text() == (
            "modality,index,x,y,reason\nUSW,3,1.0,2.0,\"zero-energy trace, retry\"\n"
        )


class TestUnits:
    def test_ksi_round_trip(self):
        assert ingest.pa_to_ksi(ingest.ksi_to_pa(2012.0)) == pytest.approx(2012.0)
        assert ingest.ksi_to_pa(1.0) == 6.894757e6

    def test_hz(self):
        assert ingest.hz_to_khz(4310.0) == pytest.approx(4.31)


class TestRecords:
    def test_trace_invariants(self):
        with pytest.raises(ValidationError):
            SensorTrace(np.array([]), 1e-5)
        with pytest.raises(ValidationError):
            SensorTrace(np.array([1.0, math.inf]), 1e-5)
        with pytest.raises(ValidationError):
            SensorTrace(np.array([1.0]), 0.0)

    def test_trace_is_read_only(self):
        t = SensorTrace(np.arange(4.0), 1.0)
        with pytest.raises(ValueError):
            t.samples[0] = 9.0

    @pytest.mark.parametrize("nu", [0.0, 0.5, -0.1])
    def test_material_bounds(self, nu):
        with pytest.raises(ValidationError):
            MaterialProps(nu, 2400.0)


class TestSynthetic:
    def test_bytes_reproducible(self):
        spec = synth.SyntheticSpec(deck_extent=(0, 4, 0, 3), defects=((1, 3, 1, 2),))
        a = ingest.bundle_to_xml(synth.generate_synthetic_bundle(spec, 7)[0])
        b = ingest.bundle_to_xml(synth.generate_synthetic_bundle(spec, 7)[0])
        c = ingest.bundle_to_xml(synth.generate_synthetic_bundle(spec, 8)[0])
        assert a == b
        assert a != c

    def test_defect_outside_deck(self):
        with pytest.raises(SpecError):
            synth.generate_synthetic_bundle(
                synth.SyntheticSpec(deck_extent=(0, 4, 0, 3), defects=((3, 5, 1, 2),)), 0
            )

    def test_no_defects(self):
        spec = synth.SyntheticSpec(deck_extent=(0, 4, 0, 3))
        bundle, truth = synth.generate_synthetic_bundle(spec, 1)
        assert truth == []
        feats = extract_features(bundle)
        assert min(p.value for p in feats.usw) >= spec.healthy_ksi[0] * 0.97
        assert min(p.value for p in feats.ie) >= spec.healthy_khz[0] - 0.2

    def test_defect_band_recovered(self, small_bundle, small_spec):
        bundle, truth = small_bundle
        feats = extract_features(bundle)
        bin_khz = 1.0 / (small_spec.ie_samples * small_spec.ie_dt) / 1000.0
        inside = [p for p in feats.ie if truth[0].contains(p.x, p.y)]
        assert inside
        for p in inside:
            assert 2.0 - bin_khz <= p.value <= 4.0 + bin_khz
        for p in feats.usw:
            if truth[0].contains(p.x, p.y):
                assert p.value < 2000.0
