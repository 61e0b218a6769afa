"""Effect sizes and the block-bootstrap mean test with power estimation.

The test compares daily check-ins before a campaign against those during
(or after) it. Both samples are centered to mean zero to make the null
hypothesis true, then resampled with a moving-block bootstrap so short-range
day-to-day dependence survives resampling. The empirical p-value counts
resampled mean differences at least as extreme as the observed one, with
add-one smoothing so it is never zero. Power is estimated from a second,
uncentered bootstrap run: the fraction of its mean differences falling
outside the null critical interval.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import InsufficientSample

DEFAULT_BOOTSTRAPS = 4999
DEFAULT_ALPHA = 0.05
DEFAULT_BLOCK_LEN = 2
DEFAULT_POWER_MIN = 0.8


class Horizon(Enum):
    SHORT_TERM = "ShortTerm"
    LONG_TERM = "LongTerm"


class EffectLabel(Enum):
    SIGNIFICANT_INCREASE = "SignificantIncrease"
    SIGNIFICANT_DECREASE = "SignificantDecrease"
    POWERED_NULL = "PoweredNull"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class TestConfig:
    __test__ = False  # not a pytest class

    bootstraps: int = DEFAULT_BOOTSTRAPS
    alpha: float = DEFAULT_ALPHA
    block_len: int = DEFAULT_BLOCK_LEN
    power_min: float = DEFAULT_POWER_MIN
    seed: int = 0


@dataclass
class EffectResult:
    """Outcome of one campaign-window comparison."""

    diff: float
    cohens_d: Optional[float]
    p_value: float
    power: float
    ci_low: float
    ci_high: float
    horizon: Horizon
    label: EffectLabel
    degenerate: bool = False


def cohens_d(before: Sequence[float], other: Sequence[float]) -> Optional[float]:
    """Standardized mean difference using the pooled standard deviation.

    Returns ``None`` (undefined) when the pooled deviation is zero but the
    means differ; a flat pair with equal means yields 0 by convention.
    """
    n1, n2 = len(before), len(other)
    if n1 < 2 or n2 < 2:
        raise InsufficientSample("cohens_d needs at least 2 values per sample")
    a = np.asarray(before, dtype=float)
    b = np.asarray(other, dtype=float)
    m1 = a.mean()
    m2 = b.mean()
    v1 = np.sum((a - m1) ** 2) / (n1 - 1)
    v2 = np.sum((b - m2) ** 2) / (n2 - 1)
    pooled = np.sqrt(((n1 - 1) * v1 + (n2 - 1) * v2) / (n1 + n2 - 2))
    if pooled == 0.0:
        return 0.0 if m1 == m2 else None
    return float((m2 - m1) / pooled)


def _resample_indices(
    n: int, block_len: int, n_draws: int, rng: np.random.Generator
) -> np.ndarray:
    """Index matrix (n_draws, n) of moving-block resamples."""
    length = min(block_len, n)
    n_starts = n - length + 1
    blocks_per_draw = -(-n // length)  # ceil
    starts = rng.integers(0, n_starts, size=(n_draws, blocks_per_draw))
    idx = starts[:, :, None] + np.arange(length)
    return idx.reshape(n_draws, blocks_per_draw * length)[:, :n]


def block_resample(
    sample: Sequence[float], block_len: int, rng: np.random.Generator
) -> np.ndarray:
    """One moving-block bootstrap resample of ``sample``.

    Overlapping blocks of ``block_len`` observations are drawn uniformly with
    replacement, concatenated, and truncated to the original length. A sample
    shorter than the block length falls back to its own length.
    """
    values = np.asarray(sample, dtype=float)
    if len(values) == 0:
        raise InsufficientSample("cannot resample an empty sample")
    if block_len < 1:
        raise ValueError("block_len must be >= 1")
    idx = _resample_indices(len(values), block_len, 1, rng)
    return values[idx[0]]


def _resample_means(
    values: np.ndarray, block_len: int, n_draws: int, rng: np.random.Generator
) -> np.ndarray:
    """Means of moving-block resamples, via precomputed sliding block sums.

    Draws the same start indices as materializing each resample would, but
    accumulates block sums instead of gathering elements.
    """
    n = len(values)
    length = min(block_len, n)
    n_starts = n - length + 1
    full, tail = divmod(n, length)
    cum = np.concatenate([[0.0], np.cumsum(values)])
    block_sums = cum[length:] - cum[:-length]
    starts = rng.integers(0, n_starts, size=(n_draws, full + (1 if tail else 0)))
    totals = block_sums[starts[:, :full]].sum(axis=1)
    if tail:
        tail_sums = cum[tail : n_starts + tail] - cum[:n_starts]
        totals += tail_sums[starts[:, full]]
    return totals / n


@dataclass
class BootstrapTest:
    """Null-hypothesis side of the test: p-value and critical interval."""

    diff: float
    p_value: float
    crit_low: float
    crit_high: float


def bootstrap_test(
    before: Sequence[float],
    other: Sequence[float],
    *,
    bootstraps: int = DEFAULT_BOOTSTRAPS,
    alpha: float = DEFAULT_ALPHA,
    block_len: int = DEFAULT_BLOCK_LEN,
    rng: np.random.Generator,
) -> BootstrapTest:
    """Two-sided block-bootstrap test of equal means.

    Each sample is centered to mean zero; ``bootstraps`` resample pairs give
    the null distribution of the mean difference. The p-value is
    ``(1 + #{|diff*| >= |diff_obs|}) / (bootstraps + 1)``. The critical
    interval holds the alpha/2 and 1-alpha/2 quantiles of the null
    differences, used downstream for the power estimate.
    """
    a = np.asarray(before, dtype=float)
    b = np.asarray(other, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise InsufficientSample("bootstrap_test needs at least 2 values per sample")
    diff_obs = float(b.mean() - a.mean())
    a_centered = a - a.mean()
    b_centered = b - b.mean()
    deltas = _resample_means(b_centered, block_len, bootstraps, rng) - _resample_means(
        a_centered, block_len, bootstraps, rng
    )
    exceed = int(np.count_nonzero(np.abs(deltas) >= abs(diff_obs)))
    p = (1 + exceed) / (bootstraps + 1)
    crit_low, crit_high = np.quantile(deltas, [alpha / 2.0, 1.0 - alpha / 2.0])
    return BootstrapTest(diff=diff_obs, p_value=p, crit_low=float(crit_low), crit_high=float(crit_high))


def bootstrap_power(
    before: Sequence[float],
    other: Sequence[float],
    *,
    bootstraps: int = DEFAULT_BOOTSTRAPS,
    alpha: float = DEFAULT_ALPHA,
    block_len: int = DEFAULT_BLOCK_LEN,
    rng: np.random.Generator,
    crit: Optional[tuple[float, float]] = None,
) -> float:
    """Estimated power: mass of the uncentered difference distribution
    outside the null critical interval.

    When ``crit`` is omitted the null interval is rebuilt internally with the
    same procedure as :func:`bootstrap_test`.
    """
    a = np.asarray(before, dtype=float)
    b = np.asarray(other, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise InsufficientSample("bootstrap_power needs at least 2 values per sample")
    if crit is None:
        null = bootstrap_test(
            a, b, bootstraps=bootstraps, alpha=alpha, block_len=block_len, rng=rng
        )
        crit = (null.crit_low, null.crit_high)
    deltas = _resample_means(b, block_len, bootstraps, rng) - _resample_means(
        a, block_len, bootstraps, rng
    )
    outside = (deltas < crit[0]) | (deltas > crit[1])
    return float(np.count_nonzero(outside) / bootstraps)


def classify_effect(
    p: float,
    power: float,
    diff: float,
    alpha: float = DEFAULT_ALPHA,
    power_min: float = DEFAULT_POWER_MIN,
) -> EffectLabel:
    """Label a test outcome.

    Significant shifts are split by the sign of the observed difference; a
    non-significant result with power >= ``power_min`` is a trustworthy null,
    anything else is inconclusive.
    """
    if p < alpha:
        if diff > 0:
            return EffectLabel.SIGNIFICANT_INCREASE
        if diff < 0:
            return EffectLabel.SIGNIFICANT_DECREASE
        # |diff| = 0 cannot be significant with add-one smoothing; guard anyway
        return EffectLabel.INCONCLUSIVE
    if power >= power_min:
        return EffectLabel.POWERED_NULL
    return EffectLabel.INCONCLUSIVE


def evaluate_effect(
    before: Sequence[float],
    other: Sequence[float],
    horizon: Horizon,
    config: TestConfig,
    rng: np.random.Generator,
) -> EffectResult:
    """Full per-campaign evaluation: test, power, effect size, and label.

    The null critical interval from the test run is reused for the power
    estimate; the reported confidence interval is the percentile interval of
    the uncentered (alternative-hypothesis) difference distribution.
    """
    a = np.asarray(before, dtype=float)
    b = np.asarray(other, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise InsufficientSample("evaluate_effect needs at least 2 values per sample")

    null = bootstrap_test(
        a, b,
        bootstraps=config.bootstraps, alpha=config.alpha,
        block_len=config.block_len, rng=rng,
    )
    alt = _resample_means(b, config.block_len, config.bootstraps, rng) - _resample_means(
        a, config.block_len, config.bootstraps, rng
    )
    outside = (alt < null.crit_low) | (alt > null.crit_high)
    power = float(np.count_nonzero(outside) / config.bootstraps)
    ci_low, ci_high = np.quantile(alt, [config.alpha / 2.0, 1.0 - config.alpha / 2.0])

    d = cohens_d(a, b)
    label = classify_effect(null.p_value, power, null.diff, config.alpha, config.power_min)
    degenerate = bool(np.all(a == a[0]) and np.all(b == b[0]))
    return EffectResult(
        diff=null.diff,
        cohens_d=d,
        p_value=null.p_value,
        power=power,
        ci_low=float(ci_low),
        ci_high=float(ci_high),
        horizon=horizon,
        label=label,
        degenerate=degenerate,
    )
