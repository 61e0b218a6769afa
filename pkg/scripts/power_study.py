#!/usr/bin/env python3
"""Detection-rate study: how often planted lifts of varying size are found.

For each target effect size, solves for the Poisson lift that produces it,
simulates campaigns, and reports the rate of SignificantIncrease labels plus
the mean estimated power. Writes a CSV suitable for plotting.

Usage: python scripts/power_study.py [--campaigns N] [--lam L] [--out FILE]
"""

import argparse
import csv
import sys

from campaignfx.effect import EffectLabel, Horizon, TestConfig, evaluate_effect
from campaignfx.rng import derive_rng
from campaignfx.synth import delta_for_target_d, sample_segment_pair

GRID = (0.0, 0.1, 0.2, 0.3, 0.5, 0.8, 1.2)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--campaigns", type=int, default=300)
    parser.add_argument("--lam", type=float, default=3.0)
    parser.add_argument("--n-before", type=int, default=28)
    parser.add_argument("--n-during", type=int, default=14)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="-")
    args = parser.parse_args()

    rows = [("d_target", "delta", "detection_rate", "mean_power", "mean_observed_d")]
    config = TestConfig()
    for d_target in GRID:
        delta = delta_for_target_d(args.lam, d_target, args.n_before, args.n_during)
        detected = 0
        power_total = 0.0
        d_total = 0.0
        d_count = 0
        for i in range(args.campaigns):
            before, during = sample_segment_pair(
                args.lam, delta, args.n_before, args.n_during,
                derive_rng(args.seed, "study", d_target, i),
            )
            result = evaluate_effect(before, during, Horizon.SHORT_TERM, config,
                                     derive_rng(args.seed, "test", d_target, i))
            detected += result.label is EffectLabel.SIGNIFICANT_INCREASE
            power_total += result.power
            if result.cohens_d is not None:
                d_total += result.cohens_d
                d_count += 1
        rows.append((
            d_target, round(delta, 6), detected / args.campaigns,
            round(power_total / args.campaigns, 4),
            round(d_total / max(1, d_count), 4),
        ))
        print(f"d={d_target:>4}: delta={delta:.4f} detection={detected / args.campaigns:.3f} "
              f"mean_power={power_total / args.campaigns:.3f}")

    sink = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    writer = csv.writer(sink)
    writer.writerows(rows)
    if sink is not sys.stdout:
        sink.close()
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
