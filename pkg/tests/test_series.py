import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from campaignfx.errors import IneligibleCampaign, InsufficientData
from campaignfx.series import (
    DailyCumulative,
    SnapshotReading,
    counters_at_day,
    daily_checkins,
    interpolate_daily,
    parse_snapshots,
    segment,
)

from conftest import make_series

HOUR = 3600.0


def reading(venue_id, ts, checkins, users=0, specials=0, tips=0, likes=0):
    return SnapshotReading(venue_id, float(ts), checkins, users, specials, tips, likes)


def snapshot_line(venue_id="v1", ts="2012-10-22T00:00:00Z", checkins=0, **kw):
    obj = {"venue_id": venue_id, "ts": ts, "checkins": checkins,
           "users": kw.get("users", 0), "specials": kw.get("specials", 0),
           "tips": kw.get("tips", 0), "likes": kw.get("likes", 0)}
    return json.dumps(obj)


class TestParseSnapshots:
    def test_out_of_order_lines_sorted(self):
        lines = [
            snapshot_line(ts="2012-10-23T00:00:00Z", checkins=5),
            snapshot_line(ts="2012-10-22T00:00:00Z", checkins=3),
        ]
        report = parse_snapshots(lines)
        assert report.error_count == 0
        readings = report.readings["v1"]
        assert [r.checkins for r in readings] == [3, 5]
        assert readings[0].ts < readings[1].ts

    def test_duplicate_timestamp_keeps_last(self):
        lines = [
            snapshot_line(checkins=3),
            snapshot_line(checkins=7),
        ]
        report = parse_snapshots(lines)
        assert [r.checkins for r in report.readings["v1"]] == [7]
        assert report.duplicate_timestamps == 1

    def test_missing_field_skips_line_keeps_others(self):
        bad = json.dumps({"venue_id": "v1", "ts": "2012-10-22T00:00:00Z"})
        lines = [bad, snapshot_line(ts="2012-10-23T00:00:00Z", checkins=2)]
        report = parse_snapshots(lines)
        assert report.error_count == 1
        assert report.errors[0].line_no == 1
        assert "checkins" in report.errors[0].message
        assert len(report.readings["v1"]) == 1

    def test_negative_count_rejected(self):
        report = parse_snapshots([snapshot_line(checkins=-1)])
        assert report.error_count == 1

    def test_invalid_json_recorded(self):
        report = parse_snapshots(["{not json", snapshot_line()])
        assert report.error_count == 1
        assert len(report.readings["v1"]) == 1

    def test_csv_alternative(self):
        lines = [
            "venue_id,ts,checkins,users,specials,tips,likes",
            "v1,2012-10-22T00:00:00Z,3,1,0,0,0",
            "v1,2012-10-23T00:00:00Z,5,2,0,1,1",
        ]
        report = parse_snapshots(lines)
        assert report.error_count == 0
        assert [r.checkins for r in report.readings["v1"]] == [3, 5]


class TestInterpolateDaily:
    def test_hand_linear_interpolation(self):
        # 10 check-ins at t=0h, 20 at t=25h: the 24h grid point interpolates
        # to 10 + 24/25 * 10 = 19.6
        readings = [reading("v1", 0.0, 10), reading("v1", 25 * HOUR, 20)]
        dc = interpolate_daily(readings)
        assert dc.origin_ts == 0.0
        assert np.allclose(dc.values, [10.0, 19.6])
        assert dc.anomaly_count == 0

    def test_identity_on_exact_grid(self):
        readings = [reading("v1", i * 86400.0, c) for i, c in enumerate([0, 4, 9, 9, 15])]
        dc = interpolate_daily(readings)
        assert np.array_equal(dc.values, [0, 4, 9, 9, 15])

    def test_decrease_clamped_and_counted(self):
        readings = [
            reading("v1", 0.0, 10),
            reading("v1", 86400.0, 8),
            reading("v1", 2 * 86400.0, 12),
        ]
        dc = interpolate_daily(readings)
        assert np.array_equal(dc.values, [10, 10, 12])
        assert dc.anomaly_count == 1

    def test_insufficient_data(self):
        with pytest.raises(InsufficientData):
            interpolate_daily([reading("v1", 0.0, 1)])

    def test_no_extrapolation_beyond_last_reading(self):
        readings = [reading("v1", 0.0, 0), reading("v1", 86400.0 * 2.5, 10)]
        dc = interpolate_daily(readings)
        assert len(dc.values) == 3  # grid days 0, 1, 2 only

    @given(st.lists(st.integers(min_value=0, max_value=1000), min_size=2, max_size=40))
    def test_anomaly_count_matches_raw_decreases(self, counts):
        readings = [reading("v1", i * 86400.0 + (i % 3) * HOUR, c) for i, c in enumerate(counts)]
        dc = interpolate_daily(readings)
        expected = sum(1 for a, b in zip(counts, counts[1:]) if b < a)
        assert dc.anomaly_count == expected
        assert np.all(np.diff(dc.values) >= 0)


class TestDailyCheckins:
    def test_direct_difference(self):
        dc = DailyCumulative("v1", 0.0, np.array([10.0, 12.0, 15.0]))
        ds = daily_checkins(dc)
        assert np.array_equal(ds.values, [2, 3])
        assert ds.origin_day == 0

    def test_constant_series(self):
        dc = DailyCumulative("v1", 0.0, np.array([5.0, 5.0, 5.0, 5.0]))
        assert np.array_equal(daily_checkins(dc).values, [0, 0, 0])

    def test_real_valued(self):
        dc = DailyCumulative("v1", 0.0, np.array([0.0, 1.5, 4.0]))
        assert np.allclose(daily_checkins(dc).values, [1.5, 2.5])

    def test_too_short(self):
        with pytest.raises(InsufficientData):
            daily_checkins(DailyCumulative("v1", 0.0, np.array([1.0])))

    @given(st.lists(st.integers(min_value=0, max_value=500), min_size=2, max_size=60))
    def test_telescoping_sum(self, counts):
        values = np.maximum.accumulate(np.asarray(counts, dtype=float))
        ds = daily_checkins(DailyCumulative("v1", 0.0, values))
        assert ds.values.sum() == pytest.approx(values[-1] - values[0])
        assert np.all(ds.values >= 0)


class TestSegment:
    def test_full_after_window(self):
        s = make_series(np.arange(70))
        seg = segment(s, 30, 40)
        assert len(seg.before) == 28
        assert len(seg.during) == 11
        assert len(seg.after) == 28
        assert seg.before[0] == 2  # days 2..29

    def test_short_after_window_kept(self):
        s = make_series(np.arange(50))
        seg = segment(s, 30, 40)
        assert len(seg.after) == 9

    def test_tiny_after_window_absent(self):
        s = make_series(np.arange(45))
        seg = segment(s, 30, 40)
        assert seg.after is None

    def test_short_history_rejected(self):
        s = make_series(np.arange(60))
        with pytest.raises(IneligibleCampaign) as exc:
            segment(s, 20, 30)
        assert exc.value.reason == "ShortHistory"

    def test_short_campaign_rejected(self):
        s = make_series(np.arange(60))
        with pytest.raises(IneligibleCampaign) as exc:
            segment(s, 30, 33)
        assert exc.value.reason == "ShortCampaign"

    def test_campaign_truncated_to_data(self):
        # campaign extends beyond the observed series: during is truncated
        s = make_series(np.arange(60))
        seg = segment(s, 30, 200)
        assert seg.end_day == 59
        assert len(seg.during) == 30
        assert seg.after is None

    @given(
        st.integers(min_value=28, max_value=60),
        st.integers(min_value=7, max_value=40),
        st.integers(min_value=0, max_value=40),
    )
    def test_segments_disjoint_and_contiguous(self, start, duration, extra_after):
        n = start + duration + extra_after
        s = make_series(np.arange(n))
        seg = segment(s, start, start + duration - 1)
        assert seg.before[-1] == start - 1
        assert seg.during[0] == start
        assert seg.during[-1] == seg.end_day
        if seg.after is not None:
            assert 7 <= len(seg.after) <= 28
            assert seg.after[0] == seg.end_day + 1
        chained = np.concatenate(
            [seg.before, seg.during] + ([seg.after] if seg.after is not None else [])
        )
        assert np.all(np.diff(chained) == 1)  # strictly increasing day labels


class TestCountersAtDay:
    def test_interpolates_all_counters(self):
        readings = [
            reading("v1", 0.0, 0, users=0, tips=0, likes=0),
            reading("v1", 2 * 86400.0, 10, users=4, tips=2, likes=6),
        ]
        c = counters_at_day(readings, 0.0, 1)
        assert c["checkins"] == pytest.approx(5.0)
        assert c["users"] == pytest.approx(2.0)
        assert c["tips"] == pytest.approx(1.0)
        assert c["likes"] == pytest.approx(3.0)
