"""Snapshot parsing, daily-grid interpolation, and campaign segmentation.

Raw venue snapshots arrive roughly once per day but never exactly on a 24h
cadence. This module rebuilds an exact daily grid anchored at each venue's
first observation, first-differences the cumulative check-in counter into
daily counts, and slices those counts into before / during / after windows
around a campaign.

Day-index convention: grid point ``g`` sits at ``origin_ts + g * 86400``
seconds. The daily value labelled day ``d`` is the accrual over the grid
window ``[d, d+1)``, i.e. ``values[d - origin_day]`` of a ``DailySeries``
with ``origin_day = 0``. Campaign day indices use the same labels.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import IneligibleCampaign, InsufficientData, MalformedRecord

DAY_SECONDS = 86400.0

BEFORE_DAYS = 28          # k: baseline window length
AFTER_MAX_DAYS = 28       # cap on the post-campaign window
AFTER_MIN_DAYS = 7        # minimum post-campaign window for long-term analysis
MIN_CAMPAIGN_DAYS = 7     # minimum campaign duration

_SNAPSHOT_FIELDS = ("venue_id", "ts", "checkins", "users", "specials", "tips", "likes")
_COUNTER_FIELDS = ("checkins", "users", "specials", "tips", "likes")


@dataclass(frozen=True, slots=True)
class SnapshotReading:
    """One API observation of a venue's cumulative counters."""

    venue_id: str
    ts: float  # seconds since epoch, UTC
    checkins: int
    users: int
    specials: int
    tips: int
    likes: int


@dataclass
class DailyCumulative:
    """Cumulative check-ins interpolated onto an exact 24h grid."""

    venue_id: str
    origin_ts: float
    values: np.ndarray
    anomaly_count: int = 0


@dataclass
class DailySeries:
    """Daily check-in counts: first difference of a ``DailyCumulative``."""

    venue_id: str
    origin_day: int
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.values)

    @property
    def last_day(self) -> int:
        return self.origin_day + len(self.values) - 1

    def day_slice(self, start_day: int, end_day: int) -> np.ndarray:
        """Values for day labels ``start_day..end_day`` inclusive."""
        lo = start_day - self.origin_day
        hi = end_day - self.origin_day + 1
        if lo < 0 or hi > len(self.values):
            raise InsufficientData(
                f"days [{start_day}, {end_day}] outside series of {self.venue_id}"
            )
        return self.values[lo:hi]


@dataclass
class SegmentedSeries:
    """Daily counts split around a campaign window."""

    before: np.ndarray
    during: np.ndarray
    after: Optional[np.ndarray]
    start_day: int
    end_day: int

    @property
    def long_term_eligible(self) -> bool:
        return self.after is not None


@dataclass
class ParseError:
    line_no: int
    message: str


@dataclass
class ParseReport:
    """Outcome of parsing a snapshot or offer file."""

    readings: dict[str, list[SnapshotReading]] = field(default_factory=dict)
    errors: list[ParseError] = field(default_factory=list)
    duplicate_timestamps: int = 0

    @property
    def error_count(self) -> int:
        return len(self.errors)


def parse_timestamp(raw: object) -> float:
    """ISO-8601 UTC string (or epoch seconds) -> seconds since epoch."""
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return float(raw)
    if not isinstance(raw, str):
        raise ValueError(f"timestamp must be a string or number, got {type(raw).__name__}")
    text = raw.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def format_timestamp(ts: float) -> str:
    dt = datetime.fromtimestamp(ts, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def _reading_from_mapping(obj: dict, line_no: int) -> SnapshotReading:
    try:
        venue_id = obj["venue_id"]
        ts = parse_timestamp(obj["ts"])
        counters = {}
        for name in _COUNTER_FIELDS:
            value = obj[name]
            counters[name] = int(value)
            if counters[name] < 0:
                raise ValueError(f"{name} is negative")
    except KeyError as exc:
        raise MalformedRecord(line_no, f"missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise MalformedRecord(line_no, str(exc)) from exc
    if not isinstance(venue_id, str) or not venue_id:
        raise MalformedRecord(line_no, "venue_id must be a non-empty string")
    return SnapshotReading(venue_id=venue_id, ts=ts, **counters)


def parse_snapshots(lines: Iterable[str]) -> ParseReport:
    """Parse snapshot records (JSONL, or CSV with identical column names).

    Per venue, readings come back sorted by timestamp with exact-duplicate
    timestamps collapsed to the record that appeared last in the input.
    Malformed lines are recorded and skipped rather than aborting the parse.
    """
    lines = list(lines)
    fmt = _sniff_format(lines)
    report = ParseReport()
    per_venue: dict[str, list[tuple[float, int, SnapshotReading]]] = {}

    for line_no, obj in _iter_records(lines, fmt, report):
        try:
            reading = _reading_from_mapping(obj, line_no)
        except MalformedRecord as exc:
            report.errors.append(ParseError(exc.line_no, exc.message))
            continue
        per_venue.setdefault(reading.venue_id, []).append((reading.ts, line_no, reading))

    for venue_id, entries in per_venue.items():
        entries.sort(key=lambda e: (e[0], e[1]))
        deduped: list[SnapshotReading] = []
        for ts, _, reading in entries:
            if deduped and deduped[-1].ts == ts:
                deduped[-1] = reading  # later poll supersedes
                report.duplicate_timestamps += 1
            else:
                deduped.append(reading)
        report.readings[venue_id] = deduped
    return report


def _sniff_format(lines: Sequence[str]) -> str:
    for line in lines:
        stripped = line.strip()
        if stripped:
            return "jsonl" if stripped.startswith("{") else "csv"
    return "jsonl"


def _iter_records(lines: Sequence[str], fmt: str, report: ParseReport):
    if fmt == "jsonl":
        for line_no, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                report.errors.append(ParseError(line_no, f"invalid JSON: {exc.msg}"))
                continue
            if not isinstance(obj, dict):
                report.errors.append(ParseError(line_no, "record is not an object"))
                continue
            yield line_no, obj
    else:
        reader = csv.DictReader(io.StringIO("".join(line if line.endswith("\n") else line + "\n" for line in lines)))
        if reader.fieldnames is None or set(_SNAPSHOT_FIELDS) - set(reader.fieldnames):
            report.errors.append(ParseError(1, "CSV header missing required columns"))
            return
        for line_no, row in enumerate(reader, start=2):
            yield line_no, {k: v for k, v in row.items() if k is not None}


def interpolate_daily(readings: Sequence[SnapshotReading]) -> DailyCumulative:
    """Linearly interpolate cumulative check-ins onto the venue's 24h grid.

    The grid is anchored at the first reading and never extrapolates beyond
    the last one. Decreases between consecutive raw readings (API noise) are
    clamped to the running maximum; each decreasing raw pair increments
    ``anomaly_count``.
    """
    if len(readings) < 2:
        raise InsufficientData("need at least 2 readings to interpolate")
    ts = np.array([r.ts for r in readings], dtype=float)
    raw = np.array([r.checkins for r in readings], dtype=float)
    anomalies = int(np.count_nonzero(np.diff(raw) < 0))
    clamped = np.maximum.accumulate(raw)

    origin = ts[0]
    n_days = int((ts[-1] - origin) // DAY_SECONDS) + 1
    grid = origin + DAY_SECONDS * np.arange(n_days)
    values = np.interp(grid, ts, clamped)
    return DailyCumulative(
        venue_id=readings[0].venue_id,
        origin_ts=origin,
        values=values,
        anomaly_count=anomalies,
    )


def daily_checkins(dc: DailyCumulative) -> DailySeries:
    """First difference of the daily cumulative series."""
    if len(dc.values) < 2:
        raise InsufficientData("need at least 2 grid points to difference")
    return DailySeries(
        venue_id=dc.venue_id,
        origin_day=0,
        values=np.diff(dc.values),
    )


def counters_at_day(readings: Sequence[SnapshotReading], origin_ts: float, day: int) -> dict[str, float]:
    """Interpolate every cumulative counter at grid day ``day``.

    Counters are clamped monotone first (counters never truly decrease).
    Requests outside the observation span clamp to the nearest endpoint,
    which keeps neighborhood aggregates total.
    """
    if not readings:
        raise InsufficientData("no readings")
    t = origin_ts + day * DAY_SECONDS
    ts = np.array([r.ts for r in readings], dtype=float)
    out = {}
    for name in ("checkins", "users", "tips", "likes"):
        series = np.maximum.accumulate(np.array([getattr(r, name) for r in readings], dtype=float))
        out[name] = float(np.interp(t, ts, series))
    return out


def segment(
    s: DailySeries,
    start_day: int,
    end_day: int,
    k: int = BEFORE_DAYS,
    w_max: int = AFTER_MAX_DAYS,
    w_min: int = AFTER_MIN_DAYS,
    min_duration: int = MIN_CAMPAIGN_DAYS,
) -> SegmentedSeries:
    """Split daily counts into before / during / after windows.

    ``before`` is the ``k`` days ending the day before the campaign starts.
    ``during`` covers the campaign, truncated to observed data. ``after`` is
    up to ``w_max`` post-campaign days and is present only when at least
    ``w_min`` are observed. Raises ``IneligibleCampaign`` with reason
    ``ShortHistory`` or ``ShortCampaign`` when the windows cannot be formed.
    """
    effective_end = min(end_day, s.last_day)
    duration = effective_end - start_day + 1
    if duration < min_duration:
        raise IneligibleCampaign("ShortCampaign")
    if start_day - s.origin_day < k:
        raise IneligibleCampaign("ShortHistory")

    before = s.day_slice(start_day - k, start_day - 1)
    during = s.day_slice(start_day, effective_end)
    available_after = s.last_day - effective_end
    after = None
    if available_after >= w_min:
        w = min(w_max, available_after)
        after = s.day_slice(effective_end + 1, effective_end + w)
    return SegmentedSeries(
        before=before,
        during=during,
        after=after,
        start_day=start_day,
        end_day=effective_end,
    )
