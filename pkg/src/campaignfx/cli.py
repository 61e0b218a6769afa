"""Batch command-line front end.

Subcommands mirror the pipeline stages: ``synth`` builds a seeded corpus,
``segment``/``test`` run eligibility and the bootstrap tests, ``match``
builds reference groups, ``features``/``train`` produce the learning
artifacts, and ``report`` aggregates everything into ``report.json``.

Exit codes: 0 success, 1 validation error, 2 I/O error. Artifacts written by
a failing command are removed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .campaign import offer_stats
from .config import RunConfig, build_run_config
from .errors import CampaignFxError, InvalidConfig
from .pipeline import (
    LoadedCorpus,
    load_corpus,
    match_stage,
    read_effects_csv,
    read_groups_csv,
    reference_test_stage,
    segment_stage,
    test_stage,
    write_campaigns_csv,
    write_effects_csv,
    write_groups_csv,
    write_skipped_csv,
    features_stage,
)
from .features import read_features_csv, write_features_csv
from .report import build_report, feature_auc_csv, render_report, train_models
from .synth import SynthConfig, generate_corpus_data

_KNOB_FLAGS = (
    ("alpha", float),
    ("bootstraps", int),
    ("block_len", int),
    ("power_min", float),
    ("k", int),
    ("w_max", int),
    ("min_duration", int),
    ("radius_miles", float),
    ("grid_deg", float),
    ("n_groups", int),
    ("folds", int),
    ("seed", int),
    ("jobs", int),
)


class ArtifactSink:
    """Tracks written artifacts so a failing command leaves nothing behind."""

    def __init__(self):
        self.paths: list[Path] = []

    def write(self, path: Path, text: str) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        self.paths.append(path)
        print(f"wrote {path}")

    def cleanup(self) -> None:
        for path in self.paths:
            try:
                path.unlink()
            except OSError:
                pass


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="key = value config file")
    for name, kind in _KNOB_FLAGS:
        parser.add_argument(f"--{name.replace('_', '-')}", dest=name, type=kind, default=None)
    parser.add_argument("--horizon", choices=("short", "long", "both"), default=None)


def _run_config(args: argparse.Namespace) -> RunConfig:
    file_text = None
    if args.config is not None:
        file_text = args.config.read_text()
    overrides = {name: getattr(args, name) for name, _ in _KNOB_FLAGS}
    overrides["horizon"] = args.horizon
    return build_run_config(file_text=file_text, overrides=overrides)


def _read_lines(path: Path) -> list[str]:
    return path.read_text().splitlines()


def _load_inputs(args: argparse.Namespace, with_venues: bool = False) -> LoadedCorpus:
    snapshot_lines = _read_lines(args.snapshots)
    offer_lines = _read_lines(args.offers)
    venue_lines = _read_lines(args.venues) if with_venues and args.venues else None
    corpus = load_corpus(snapshot_lines, offer_lines, venue_lines)
    if corpus.parse_errors:
        first = corpus.parse_errors[0]
        print(
            f"warning: {len(corpus.parse_errors)} malformed records skipped "
            f"(first: line {first.line_no}: {first.message})",
            file=sys.stderr,
        )
    return corpus


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = SynthConfig(
        n_venues=args.venues,
        days=args.days,
        base_rate_log_mean=args.base_log_mean,
        base_rate_log_sd=args.base_log_sd,
        weekly_seasonality_amp=args.seasonality,
        platform_trend_per_day=args.trend,
        promo_fraction=args.promo_fraction,
        effect_multiplier=args.effect_multiplier,
        zero_venue_fraction=args.zero_fraction,
        seed=args.seed if args.seed is not None else 0,
        poll_jitter_hours=args.jitter_hours,
        venue_prefix=args.venue_prefix,
    )
    corpus = generate_corpus_data(cfg)
    sink = ArtifactSink()
    out = args.out
    try:
        sink.write(out / "snapshots.jsonl", "\n".join(corpus.snapshot_lines()) + "\n")
        sink.write(out / "offers.jsonl", "\n".join(corpus.offer_lines()) + "\n")
        sink.write(out / "venues.jsonl", "\n".join(corpus.venue_lines()) + "\n")
        lines = corpus.ground_truth_lines()
        sink.write(out / "ground_truth.jsonl", ("\n".join(lines) + "\n") if lines else "")
    except BaseException:
        sink.cleanup()
        raise
    return 0


def cmd_segment(args: argparse.Namespace) -> int:
    config = _run_config(args)
    corpus = _load_inputs(args)
    eligibility = segment_stage(corpus, config)
    stats = offer_stats(corpus.periods)
    stats_payload = {
        "kind_counts": stats.kind_counts,
        "kind_shares": stats.kind_shares,
        "duration_ecdf": {k: [[d, f] for d, f in points]
                          for k, points in stats.duration_ecdf.items()},
    }
    sink = ArtifactSink()
    try:
        sink.write(args.out / "campaigns.csv", write_campaigns_csv(eligibility))
        sink.write(args.out / "skipped.csv", write_skipped_csv(eligibility))
        sink.write(args.out / "offer_stats.json",
                   json.dumps(stats_payload, sort_keys=True, indent=2) + "\n")
    except BaseException:
        sink.cleanup()
        raise
    print(f"eligible campaigns: {len(eligibility.eligible)}, skipped: {len(eligibility.skipped)}")
    return 0


def cmd_test(args: argparse.Namespace) -> int:
    config = _run_config(args)
    corpus = _load_inputs(args)
    eligibility = segment_stage(corpus, config)
    groups = read_groups_csv(args.groups.read_text()) if args.groups else None
    effects = test_stage(corpus, eligibility, config)
    sink = ArtifactSink()
    try:
        sink.write(args.out / "effects.csv", write_effects_csv(effects))
        if groups is not None:
            reference = reference_test_stage(corpus, groups, config)
            sink.write(args.out / "reference_effects.csv", write_effects_csv(reference))
    except BaseException:
        sink.cleanup()
        raise
    print(f"tested {len(effects)} campaign windows")
    return 0


def cmd_match(args: argparse.Namespace) -> int:
    config = _run_config(args)
    corpus = _load_inputs(args, with_venues=True)
    if not corpus.profiles:
        raise InvalidConfig("matching requires a venues file with profiles")
    eligibility = segment_stage(corpus, config)
    result = match_stage(corpus, eligibility, config)
    sink = ArtifactSink()
    try:
        sink.write(args.out / "groups.csv", write_groups_csv(result.groups))
    except BaseException:
        sink.cleanup()
        raise
    filled = sum(len(g.members) for g in result.groups)
    print(
        f"groups: {len(result.groups)}, members: {filled}, "
        f"exhausted slots: {result.exhausted_count}, unfittable: {result.unfittable_count}, "
        f"zero-activity removed: {result.zero_removed}"
    )
    return 0


def cmd_features(args: argparse.Namespace) -> int:
    config = _run_config(args)
    corpus = _load_inputs(args, with_venues=True)
    if not corpus.profiles:
        raise InvalidConfig("feature extraction requires a venues file")
    eligibility = segment_stage(corpus, config)
    effects = read_effects_csv(args.effects.read_text())
    rows = features_stage(corpus, eligibility, effects, config)
    sink = ArtifactSink()
    try:
        sink.write(args.out / "features.csv", write_features_csv(rows))
    except BaseException:
        sink.cleanup()
        raise
    print(f"extracted {len(rows)} feature rows")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = _run_config(args)
    rows = read_features_csv(args.features.read_text())
    metrics, gaps = train_models(rows, config)
    payload = {
        "models": metrics,
        "rms_gaps": gaps,
        "seed": config.seed,
        "folds": config.folds,
    }
    sink = ArtifactSink()
    try:
        sink.write(args.out / "model_metrics.json", json.dumps(payload, sort_keys=True, indent=2) + "\n")
    except BaseException:
        sink.cleanup()
        raise
    print(f"trained {len(metrics)} model configurations")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    config = _run_config(args)
    effects = read_effects_csv(args.effects.read_text())
    reference = read_effects_csv(args.reference_effects.read_text()) if args.reference_effects else []
    feature_rows = read_features_csv(args.features.read_text()) if args.features else []
    profiles = []
    if args.venues:
        from .cohort import parse_venues

        profiles = parse_venues(_read_lines(args.venues)).profiles
    model_payload = None
    if args.model_metrics:
        model_payload = json.loads(args.model_metrics.read_text())

    promo_keys = {(e.venue_id, e.start_day) for e in effects}
    group_ids = {e.group_id for e in reference if e.group_id is not None}
    summary = {
        "n_venues": len(profiles) if profiles else None,
        "n_promotion_campaigns": len(promo_keys),
        "n_promotion_tests": len(effects),
        "n_long_term_tests": sum(1 for e in effects if e.horizon.value == "LongTerm"),
        "n_reference_tests": len(reference),
        "n_reference_groups": len(group_ids),
        "n_degenerate_tests": sum(1 for e in effects if e.result.degenerate),
    }
    report = build_report(
        config,
        summary,
        effects,
        reference,
        profiles,
        feature_rows,
        model_payload.get("models") if model_payload else None,
        model_payload.get("rms_gaps") if model_payload else None,
    )
    sink = ArtifactSink()
    try:
        sink.write(args.out / "report.json", render_report(report))
        if feature_rows:
            sink.write(args.out / "feature_aucs.csv", feature_auc_csv(report["feature_aucs"]))
    except BaseException:
        sink.cleanup()
        raise
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="campaignfx")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a seeded synthetic corpus")
    p.add_argument("--venues", type=int, required=True)
    p.add_argument("--days", type=int, default=120)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--promo-fraction", type=float, default=0.1)
    p.add_argument("--effect-multiplier", type=float, default=0.0)
    p.add_argument("--zero-fraction", type=float, default=0.0)
    p.add_argument("--seasonality", type=float, default=0.15)
    p.add_argument("--trend", type=float, default=0.0)
    p.add_argument("--jitter-hours", type=float, default=2.0)
    p.add_argument("--base-log-mean", type=float, default=1.0)
    p.add_argument("--base-log-sd", type=float, default=0.6)
    p.add_argument("--venue-prefix", default="v")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("segment", help="eligibility filters and segmentation")
    p.add_argument("--snapshots", type=Path, required=True)
    p.add_argument("--offers", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("test", help="bootstrap tests for eligible campaigns")
    p.add_argument("--snapshots", type=Path, required=True)
    p.add_argument("--offers", type=Path, required=True)
    p.add_argument("--groups", type=Path, help="reference groups CSV; also test pseudo-campaigns")
    p.add_argument("--out", type=Path, required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("match", help="build matched reference groups")
    p.add_argument("--snapshots", type=Path, required=True)
    p.add_argument("--offers", type=Path, required=True)
    p.add_argument("--venues", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("features", help="extract feature vectors")
    p.add_argument("--snapshots", type=Path, required=True)
    p.add_argument("--offers", type=Path, required=True)
    p.add_argument("--venues", type=Path, required=True)
    p.add_argument("--effects", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="cross-validate classifiers")
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("report", help="aggregate results into report.json")
    p.add_argument("--effects", type=Path, required=True)
    p.add_argument("--reference-effects", type=Path)
    p.add_argument("--features", type=Path)
    p.add_argument("--model-metrics", type=Path)
    p.add_argument("--venues", type=Path)
    p.add_argument("--out", type=Path, required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CampaignFxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
