"""Matched reference groups and group-level effect statistics.

Reference venues never ran a promotion; sampling them to match each
promotion venue's category and location, and replaying pseudo-promotion
windows drawn from the real campaigns' empirical distribution, yields a
baseline that absorbs seasonal and platform-wide externalities. Comparing
increase fractions between the two cohorts is what separates genuine
campaign effects from background drift.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .effect import EffectLabel, EffectResult
from .errors import EmptyDenominator, MalformedRecord
from .series import DailySeries, ParseError

MATCH_CELL_DEG = 0.1
N_REFERENCE_GROUPS = 20
PSEUDO_PERIOD_MAX_ATTEMPTS = 100


class Category(Enum):
    NIGHTLIFE = "Nightlife"
    FOOD = "Food"
    SHOPS = "Shops"
    ARTS = "Arts"
    COLLEGE = "College"
    OUTDOORS = "Outdoors"
    TRAVEL = "Travel"
    RESIDENCE = "Residence"
    PROFESSIONAL = "Professional"


CATEGORIES = tuple(Category)


@dataclass(frozen=True)
class VenueProfile:
    venue_id: str
    category: Category
    lat: float
    lon: float
    has_promotion: bool = False

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} out of range")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} out of range")


@dataclass
class VenueParseReport:
    profiles: list[VenueProfile] = field(default_factory=list)
    errors: list[ParseError] = field(default_factory=list)


def parse_venues(lines: Iterable[str], promoted_ids: Optional[set[str]] = None) -> VenueParseReport:
    """Parse venue-profile JSONL; ``promoted_ids`` sets the promotion flag."""
    report = VenueParseReport()
    promoted_ids = promoted_ids or set()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise MalformedRecord(line_no, "record is not an object")
            category = Category(obj["category"])
            profile = VenueProfile(
                venue_id=str(obj["venue_id"]),
                category=category,
                lat=float(obj["lat"]),
                lon=float(obj["lon"]),
                has_promotion=str(obj["venue_id"]) in promoted_ids,
            )
        except MalformedRecord as exc:
            report.errors.append(ParseError(exc.line_no, exc.message))
            continue
        except json.JSONDecodeError as exc:
            report.errors.append(ParseError(line_no, f"invalid JSON: {exc.msg}"))
            continue
        except KeyError as exc:
            report.errors.append(ParseError(line_no, f"missing field {exc.args[0]!r}"))
            continue
        except (TypeError, ValueError) as exc:
            report.errors.append(ParseError(line_no, str(exc)))
            continue
        report.profiles.append(profile)
    return report


@dataclass
class ReferenceMember:
    venue_id: str
    counterpart_id: str
    pseudo_start: Optional[int] = None
    pseudo_end: Optional[int] = None


@dataclass
class ReferenceGroup:
    group_id: int
    members: list[ReferenceMember] = field(default_factory=list)


@dataclass
class PoolExhausted:
    venue_id: str  # promotion venue that could not be matched
    group_id: int


@dataclass
class UnfittablePeriod:
    venue_id: str


@dataclass
class MatchReport:
    groups: list[ReferenceGroup] = field(default_factory=list)
    exhausted: list[PoolExhausted] = field(default_factory=list)
    unfittable: list[UnfittablePeriod] = field(default_factory=list)


def _match_cell(lat: float, lon: float, cell_deg: float) -> tuple[int, int]:
    return (int(math.floor(lat / cell_deg)), int(math.floor(lon / cell_deg)))


def match_reference(
    promo: Sequence[VenueProfile],
    pool: Sequence[VenueProfile],
    n_groups: int = N_REFERENCE_GROUPS,
    rng: np.random.Generator = None,
    cell_deg: float = MATCH_CELL_DEG,
) -> MatchReport:
    """Sample non-overlapping reference groups matched on category and cell.

    For every promotion venue and every group, one pool venue with the same
    category and the same 0.1-degree cell is drawn without replacement across
    all groups; when the cell is exhausted the search widens to the 3x3 cell
    neighborhood. Slots that still cannot be filled are recorded.
    """
    if rng is None:
        raise ValueError("match_reference requires a seeded rng")
    promoted = [p for p in pool if p.has_promotion]
    if promoted:
        raise ValueError(f"pool contains promoted venues, e.g. {promoted[0].venue_id}")

    buckets: dict[tuple[Category, tuple[int, int]], list[VenueProfile]] = {}
    for profile in pool:
        key = (profile.category, _match_cell(profile.lat, profile.lon, cell_deg))
        buckets.setdefault(key, []).append(profile)
    for bucket in buckets.values():
        bucket.sort(key=lambda p: p.venue_id)

    used: set[str] = set()
    report = MatchReport()

    def take_from(keys: list[tuple[Category, tuple[int, int]]]) -> Optional[VenueProfile]:
        candidates: list[VenueProfile] = []
        for key in keys:
            bucket = buckets.get(key)
            if not bucket:
                continue
            bucket[:] = [p for p in bucket if p.venue_id not in used]
            candidates.extend(bucket)
        if not candidates:
            return None
        pick = candidates[int(rng.integers(len(candidates)))]
        used.add(pick.venue_id)
        return pick

    for group_id in range(n_groups):
        group = ReferenceGroup(group_id=group_id)
        for venue in promo:
            row, col = _match_cell(venue.lat, venue.lon, cell_deg)
            pick = take_from([(venue.category, (row, col))])
            if pick is None:
                ring = [
                    (venue.category, (row + dr, col + dc))
                    for dr in (-1, 0, 1)
                    for dc in (-1, 0, 1)
                    if not (dr == 0 and dc == 0)
                ]
                pick = take_from(ring)
            if pick is None:
                report.exhausted.append(PoolExhausted(venue_id=venue.venue_id, group_id=group_id))
                continue
            group.members.append(ReferenceMember(venue_id=pick.venue_id, counterpart_id=venue.venue_id))
        report.groups.append(group)
    return report


def assign_pseudo_periods(
    group: ReferenceGroup,
    empirical_periods: Sequence[tuple[int, int]],
    series_index: Mapping[str, DailySeries],
    rng: np.random.Generator,
    max_attempts: int = PSEUDO_PERIOD_MAX_ATTEMPTS,
    min_history: int = 28,
    min_duration: int = 7,
) -> tuple[ReferenceGroup, list[UnfittablePeriod]]:
    """Draw (start, duration) pairs from the real campaigns for each member.

    Draws are rejected and retried (up to ``max_attempts``) until the window
    fits the member's series under the usual segmentation rules; members with
    no fitting window are dropped and recorded.
    """
    if not empirical_periods:
        raise ValueError("empirical_periods must be non-empty")
    kept: list[ReferenceMember] = []
    dropped: list[UnfittablePeriod] = []
    for member in group.members:
        s = series_index.get(member.venue_id)
        assigned = None
        if s is not None:
            for _ in range(max_attempts):
                start, duration = empirical_periods[int(rng.integers(len(empirical_periods)))]
                end = start + duration - 1
                if duration < min_duration:
                    continue
                if start - s.origin_day < min_history:
                    continue
                if end > s.last_day:
                    continue
                assigned = (start, end)
                break
        if assigned is None:
            dropped.append(UnfittablePeriod(venue_id=member.venue_id))
        else:
            kept.append(replace(member, pseudo_start=assigned[0], pseudo_end=assigned[1]))
    return ReferenceGroup(group_id=group.group_id, members=kept), dropped


def filter_zero_activity(members: Sequence, series_index: Mapping[str, DailySeries]) -> list:
    """Drop members whose daily series is identically zero.

    Such venues carry no usable signal (their bootstrap tests are degenerate)
    and would pile up mass at d = 0. Members may be venue-id strings or any
    object with a ``venue_id`` attribute; missing series are kept.
    """
    kept = []
    for member in members:
        venue_id = member if isinstance(member, str) else member.venue_id
        s = series_index.get(venue_id)
        if s is not None and len(s.values) > 0 and not np.any(s.values):
            continue
        kept.append(member)
    return kept


class FractionMode(Enum):
    RAW_SIGN = "RawSign"
    SIGNIFICANT_ONLY = "SignificantOnly"


_COUNTED_LABELS = (
    EffectLabel.SIGNIFICANT_INCREASE,
    EffectLabel.SIGNIFICANT_DECREASE,
    EffectLabel.POWERED_NULL,
)


@dataclass
class IncreaseFraction:
    fraction: float
    ci_low: float
    ci_high: float
    n: int


def _fraction_of(results: Sequence[EffectResult], mode: FractionMode) -> tuple[int, int]:
    if mode is FractionMode.RAW_SIGN:
        return sum(1 for r in results if r.diff > 0), len(results)
    counted = [r for r in results if r.label in _COUNTED_LABELS]
    hits = sum(1 for r in counted if r.label is EffectLabel.SIGNIFICANT_INCREASE)
    return hits, len(counted)


def increase_fraction(
    results: Sequence[EffectResult],
    mode: FractionMode,
    groups: Optional[Sequence[int]] = None,
) -> IncreaseFraction:
    """Fraction of campaigns showing an increase, with a 95% interval.

    ``RawSign`` counts positive observed differences over everything (zero is
    not an increase). ``SignificantOnly`` counts significant increases among
    the robust outcomes only (significant either way, or a powered null).
    With ``groups`` given, the fraction is the mean of per-group fractions
    and the interval is a normal interval over groups; otherwise a binomial
    normal approximation applies.
    """
    if groups is not None and len(groups) != len(results):
        raise ValueError("groups must align with results")
    if not results:
        raise EmptyDenominator("no results")

    if groups is not None and len(set(groups)) > 1:
        per_group: dict[int, list[EffectResult]] = {}
        for gid, result in zip(groups, results):
            per_group.setdefault(gid, []).append(result)
        fractions = []
        for gid in sorted(per_group):
            hits, n = _fraction_of(per_group[gid], mode)
            if n > 0:
                fractions.append(hits / n)
        if not fractions:
            raise EmptyDenominator("no group has qualifying results")
        arr = np.array(fractions)
        mean = float(arr.mean())
        half = 1.96 * float(arr.std(ddof=1)) / math.sqrt(len(arr)) if len(arr) > 1 else 0.0
        return IncreaseFraction(mean, mean - half, mean + half, n=len(arr))

    hits, n = _fraction_of(results, mode)
    if n == 0:
        raise EmptyDenominator("no qualifying results")
    p = hits / n
    half = 1.96 * math.sqrt(p * (1.0 - p) / n)
    return IncreaseFraction(p, p - half, p + half, n=n)


@dataclass
class EcdfResult:
    points: list[tuple[float, float]]
    n: int
    undefined_count: int


def effect_ecdf(ds: Sequence[Optional[float]]) -> EcdfResult:
    """Right-continuous empirical CDF points of the defined effect sizes."""
    defined = [d for d in ds if d is not None]
    undefined = len(ds) - len(defined)
    if not defined:
        return EcdfResult(points=[], n=0, undefined_count=undefined)
    values = np.sort(np.asarray(defined, dtype=float))
    n = len(values)
    points = []
    for i, v in enumerate(values, start=1):
        if i == n or values[i] != v:
            points.append((float(v), i / n))
    return EcdfResult(points=points, n=n, undefined_count=undefined)
