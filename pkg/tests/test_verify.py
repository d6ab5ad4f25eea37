import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bridgefuse import imaging, verify
from bridgefuse.errors import UsageError
from bridgefuse.imaging import AxisCalibration, PixelBox
from bridgefuse.records import DataBox, Modality
from bridgefuse.verify import MatchOutcome

from conftest import fp

coords = st.floats(0, 40, allow_nan=False)


@st.composite
def boxes(draw, x_lo=0.0, x_hi=40.0, max_size=6):
    out = []
    for _ in range(draw(st.integers(0, max_size))):
        x0 = draw(st.floats(x_lo, x_hi - 1))
        y0 = draw(st.floats(0, 39))
        out.append(DataBox(x0, x0 + draw(st.floats(0.1, x_hi - x0)), y0, y0 + draw(st.floats(0.1, 40 - y0))))
    return out


@st.composite
def points(draw, x_lo=0.0, x_hi=40.0, mod=Modality.IE, max_size=15):
    xy = draw(st.lists(st.tuples(st.floats(x_lo, x_hi), coords), max_size=max_size))
    return [fp(x, y, 1.0, mod) for x, y in xy]


class TestMatch:
    BOX = DataBox(0.0, 2.0, 0.0, 2.0)

    def test_point_at_centre(self):
        o = verify.match_points_to_boxes([fp(1, 1, 1)], [self.BOX])
        assert (o.tp, o.fp, o.fn) == (1, 0, 0)
        assert o.pairs == ((0, 0),)

    def test_point_far(self):
        o = verify.match_points_to_boxes([fp(10, 10, 1)], [self.BOX])
        assert (o.tp, o.fp, o.fn) == (0, 1, 1)

    def test_two_points_one_empty_box(self):
        o = verify.match_points_to_boxes([fp(0.5, 0.5, 1), fp(1.5, 1.5, 1)], [self.BOX, DataBox(5, 6, 5, 6)])
        assert (o.tp, o.fp, o.fn) == (2, 0, 1)

    def test_first_box_wins(self):
        o = verify.match_points_to_boxes([fp(1, 1, 1)], [DataBox(5, 6, 5, 6), self.BOX, DataBox(0, 3, 0, 3)])
        assert o.pairs == ((0, 1),)
        assert o.fn == 1  # box 2 contains the point too, so only box 0 is unmatched

    def test_tolerance(self):
        p = [fp(2.3, 1.0, 1)]
        assert verify.match_points_to_boxes(p, [self.BOX], 0.0).tp == 0
        assert verify.match_points_to_boxes(p, [self.BOX], 0.5).tp == 1
        assert verify.match_points_to_boxes([fp(2.0, 2.0, 1)], [self.BOX], 0.0).tp == 1  # closed box

    def test_empty_sides(self):
        assert verify.match_points_to_boxes([], [self.BOX, self.BOX]) == MatchOutcome(0, 0, 2)
        assert verify.match_points_to_boxes([fp(0, 0, 1)] * 3, []) == MatchOutcome(0, 3, 0)

    @pytest.mark.parametrize("tol", [-0.1, float("nan")])
    def test_bad_tol(self, tol):
        with pytest.raises(UsageError):
            verify.match_points_to_boxes([], [], tol)

    @given(points(), boxes(), st.floats(0, 5), st.floats(0, 5))
    def test_tol_monotone(self, pts, bxs, t1, dt):
        a = verify.match_points_to_boxes(pts, bxs, t1)
        b = verify.match_points_to_boxes(pts, bxs, t1 + dt)
        assert b.tp >= a.tp and b.fn <= a.fn

    @given(points(), boxes())
    def test_zero_tol_is_strict_containment(self, pts, bxs):
        o = verify.match_points_to_boxes(pts, bxs, 0.0)
        want = sum(any(b.contains(p.x, p.y) for b in bxs) for p in pts)
        assert o.tp == want
        assert o.tp + o.fp == len(pts)
        assert len({i for i, _ in o.pairs}) == o.tp
        assert o.fn == sum(not any(b.contains(p.x, p.y) for p in pts) for b in bxs)


class TestMetrics:
    def test_metric_anchor(self):
        p, r, f1 = verify.metrics_from_counts(33, 11, 3)
        assert f"{p:.4f}/{r:.4f}/{f1:.4f}" == "0.7500/0.9167/0.8250"
        assert f"{p:.2f}/{r:.2f}/{f1:.2f}" == "0.75/0.92/0.83"

    def test_balanced(self):
        assert verify.metrics_from_counts(3, 1, 1) == pytest.approx((0.75, 0.75, 0.75))

    def test_absent(self):
        assert verify.metrics_from_counts(0, 0, 5) == (None, 0.0, None)
        assert verify.metrics_from_counts(0, 4, 0) == (0.0, None, None)
        assert verify.metrics_from_counts(0, 2, 3) == (0.0, 0.0, 0.0)

    @given(st.integers(0, 10_000), st.integers(0, 10_000), st.integers(0, 10_000))
    def test_f1_two_ways(self, tp, fp_, fn):
        _, _, f1 = verify.metrics_from_counts(tp, fp_, fn)
        if f1 is None:
            return
        assert f1 == pytest.approx(2 * tp / (2 * tp + fp_ + fn), abs=1e-12)
        assert 0.0 <= f1 <= 1.0

    @given(points(), boxes(), st.data())
    def test_adding_point_in_matched_box(self, pts, bxs, data):
        before = verify.match_points_to_boxes(pts, bxs)
        if not before.pairs:
            return
        j = data.draw(st.sampled_from([b for _, b in before.pairs]))
        b = bxs[j]
        extra = fp(data.draw(st.floats(b.x_min, b.x_max)), data.draw(st.floats(b.y_min, b.y_max)), 1.0)
        after = verify.match_points_to_boxes(pts + [extra], bxs)
        p0, r0, _ = verify.metrics_from_counts(before.tp, before.fp, before.fn)
        p1, r1, _ = verify.metrics_from_counts(after.tp, after.fp, after.fn)
        assert p1 >= p0 and r1 >= r0

    @given(points(0, 18), boxes(0, 18), points(22, 40, Modality.USW), boxes(22, 40))
    def test_micro_equals_concatenation(self, ie_pts, ie_boxes, usw_pts, usw_boxes):
        # the identity needs point/box pairings to stay within a modality; the
        # strategies keep the two modalities in separate halves of the deck
        tol = 0.5
        ie = verify.match_points_to_boxes(ie_pts, ie_boxes, tol)
        usw = verify.match_points_to_boxes(usw_pts, usw_boxes, tol)
        rep = verify.micro_metrics(ie, usw)
        cat = verify.match_points_to_boxes(ie_pts + usw_pts, ie_boxes + usw_boxes, tol)
        assert (rep.tp, rep.fp, rep.fn) == (cat.tp, cat.fp, cat.fn)
        assert (rep.precision, rep.recall, rep.f1) == verify.metrics_from_counts(cat.tp, cat.fp, cat.fn)


class TestReport:
    def _report(self, notes=()):
        return verify.micro_metrics(MatchOutcome(20, 6, 2), MatchOutcome(13, 5, 1), notes)

    def test_csv(self):
        assert verify.report_csv(self._report()) == "modality,tp,fp,fn\nIE,20,6,2\nUSW,13,5,1\nmicro,0.7500,0.9167,0.8250\n"

    def test_csv_absent(self):
        rep = verify.micro_metrics(MatchOutcome(0, 0, 2), MatchOutcome(0, 0, 3))
        assert verify.report_csv(rep).splitlines()[-1] == "micro,n/a,0.0000,n/a"

    def test_text_and_files(self, tmp_path):
        verify.write_report(self._report(["IE: no image to annotate"]), tmp_path)
        text = (tmp_path / "report.txt").read_text()
        assert "pooled        33    11     3" in text
        assert "f1         0.8250" in text
        assert "note: IE: no image to annotate" in text
        assert (tmp_path / "report.csv").exists()


class TestOverlay:
    CAL = AxisCalibration(PixelBox(10, 10, 200, 100), (0.0, 20.0), (0.0, 10.0))

    def _setup(self):
        img = np.full((130, 240, 3), 200, dtype=np.uint8)
        boxes = {Modality.IE: [DataBox(2, 5, 2, 5), DataBox(12, 14, 6, 8)], Modality.USW: [DataBox(2, 5, 2, 5)]}
        ie = [fp(3, 3, 2.0), fp(18, 1, 2.0)]
        usw = [fp(4, 4, 1500, Modality.USW)]
        return img, boxes, ie, usw

    def test_counts_match_direct_matching(self, tmp_path):
        img, boxes, ie, usw = self._setup()
        res = verify.overlay_report(
            ie, usw, boxes, {Modality.IE: img, Modality.USW: img}, {Modality.IE: self.CAL, Modality.USW: self.CAL}, tmp_path
        )
        assert res.report.ie == verify.match_points_to_boxes(ie, boxes[Modality.IE])
        assert res.report.usw == verify.match_points_to_boxes(usw, boxes[Modality.USW])
        assert res.problems == []
        for path in res.annotated.values():
            out = imaging.load_png(path)
            assert out.shape == img.shape and not np.array_equal(out, img)

    def test_missing_calibration_still_reports(self, tmp_path):
        img, boxes, ie, usw = self._setup()
        res = verify.overlay_report(ie, usw, boxes, {Modality.IE: img, Modality.USW: None}, {Modality.USW: self.CAL}, tmp_path)
        assert len(res.problems) == 2 and res.annotated == {}
        assert res.report.tp == 2
        assert res.report.notes == tuple(res.problems)

    def test_empty_fused(self, tmp_path):
        img, boxes, _, _ = self._setup()
        res = verify.overlay_report([], [], boxes, {}, {}, None)
        assert (res.report.tp, res.report.fp, res.report.fn) == (0, 0, 3)

    def test_no_boxes(self):
        _, _, ie, usw = self._setup()
        res = verify.overlay_report(ie, usw, {}, {}, {}, None)
        assert (res.report.tp, res.report.fp, res.report.fn) == (0, 3, 0)
