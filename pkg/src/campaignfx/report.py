"""Aggregation of per-campaign results into plot-ready report tables.

The report mirrors the analysis outputs: increase-fraction tables with
confidence intervals for the promotion and reference cohorts, effect-size
ECDF points per venue category, a per-feature discrimination table, model
metrics for every feature-set combination, and the probability gap between
the with- and without-promotion-feature logistic models.
"""

from __future__ import annotations

import csv
import io
import json
from typing import Optional, Sequence

from .cohort import CATEGORIES, FractionMode, VenueProfile, effect_ecdf, increase_fraction
from .config import RunConfig
from .effect import EffectLabel, Horizon
from .errors import EmptyDenominator, SingularFit, TooFewRows
from .features import FeatureVector, feature_values
from .learn import (
    Dataset,
    NEGATIVE_LABELS,
    POSITIVE_LABEL,
    cross_validate,
    feature_auc,
    mann_whitney,
    out_of_sample_eval,
    rms_gap,
    rms_probability_gap,
    train_model,
)
from .pipeline import CampaignEffect

# numeric features reported in the per-feature table
TABLE_FEATURES = [
    "c_a", "m_b", "loyalty", "likes", "tips",
    "duration", "n_s",
    "density", "area_pop", "competitiveness", "entropy",
]

FEATURE_SET_COMBOS: tuple[tuple[str, ...], ...] = (
    ("F_p",),
    ("F_v",),
    ("F_g",),
    ("F_p", "F_v"),
    ("F_p", "F_g"),
    ("F_v", "F_g"),
    ("F_p", "F_v", "F_g"),
)

MODEL_KINDS = ("logistic", "forest")

RMS_PAIR = (("F_v", "F_g"), ("F_p", "F_v", "F_g"))


def _horizon_key(horizon: Horizon) -> str:
    return "short_term" if horizon is Horizon.SHORT_TERM else "long_term"


def _fraction_entry(results, mode, groups=None) -> Optional[dict]:
    try:
        f = increase_fraction(results, mode, groups=groups)
    except EmptyDenominator:
        return None
    return {"fraction": f.fraction, "ci_low": f.ci_low, "ci_high": f.ci_high, "n": f.n}


def effect_tables(
    effects: Sequence[CampaignEffect],
    reference_effects: Sequence[CampaignEffect],
    profiles: Sequence[VenueProfile],
) -> dict:
    """Increase fractions, label counts, and effect-size ECDFs per horizon."""
    category_of = {p.venue_id: p.category.value for p in profiles}
    tables: dict = {}
    for horizon in (Horizon.SHORT_TERM, Horizon.LONG_TERM):
        promo = [e for e in effects if e.horizon is horizon]
        ref = [e for e in reference_effects if e.horizon is horizon]
        if not promo and not ref:
            continue
        entry: dict = {"n_promotion": len(promo), "n_reference": len(ref)}
        promo_results = [e.result for e in promo]
        ref_results = [e.result for e in ref]
        ref_groups = [e.group_id for e in ref]
        if promo_results:
            entry["promotion"] = {
                "raw_sign": _fraction_entry(promo_results, FractionMode.RAW_SIGN),
                "significant_only": _fraction_entry(promo_results, FractionMode.SIGNIFICANT_ONLY),
            }
            entry["label_counts"] = {
                label.value: sum(1 for r in promo_results if r.label is label)
                for label in EffectLabel
            }
        if ref_results:
            entry["reference"] = {
                "raw_sign": _fraction_entry(ref_results, FractionMode.RAW_SIGN, groups=ref_groups),
                "significant_only": _fraction_entry(
                    ref_results, FractionMode.SIGNIFICANT_ONLY, groups=ref_groups
                ),
            }
        by_category = {}
        for cat in CATEGORIES:
            cat_results = [
                e.result for e in promo if category_of.get(e.venue_id) == cat.value
            ]
            if not cat_results:
                continue
            by_category[cat.value] = {
                "raw_sign": _fraction_entry(cat_results, FractionMode.RAW_SIGN),
                "significant_only": _fraction_entry(cat_results, FractionMode.SIGNIFICANT_ONLY),
            }
        entry["promotion_by_category"] = by_category

        ecdf_tables = {}
        if promo_results:
            overall = effect_ecdf([r.cohens_d for r in promo_results])
            ecdf_tables["all"] = {
                "points": [[x, f] for x, f in overall.points],
                "n": overall.n,
                "undefined": overall.undefined_count,
            }
            for cat in CATEGORIES:
                ds = [
                    e.result.cohens_d for e in promo
                    if category_of.get(e.venue_id) == cat.value
                ]
                if not ds:
                    continue
                ecdf = effect_ecdf(ds)
                ecdf_tables[cat.value] = {
                    "points": [[x, f] for x, f in ecdf.points],
                    "n": ecdf.n,
                    "undefined": ecdf.undefined_count,
                }
        entry["effect_ecdf"] = ecdf_tables
        tables[_horizon_key(horizon)] = entry
    return tables


def feature_auc_table(rows: Sequence[FeatureVector]) -> list[dict]:
    """Per-feature AUC and Mann-Whitney p for both horizons."""
    out = []
    by_horizon: dict[Horizon, list[FeatureVector]] = {
        Horizon.SHORT_TERM: [r for r in rows if r.horizon is Horizon.SHORT_TERM],
        Horizon.LONG_TERM: [r for r in rows if r.horizon is Horizon.LONG_TERM],
    }
    for feature in TABLE_FEATURES:
        record: dict = {"feature": feature}
        for horizon, suffix in ((Horizon.SHORT_TERM, "short"), (Horizon.LONG_TERM, "long")):
            pos = []
            neg = []
            for r in by_horizon[horizon]:
                if r.label is POSITIVE_LABEL:
                    pos.append(feature_values(r)[feature])
                elif r.label in NEGATIVE_LABELS:
                    neg.append(feature_values(r)[feature])
            if pos and neg:
                mw = mann_whitney(pos, neg)
                record[f"auc_{suffix}"] = feature_auc(pos, neg)
                record[f"p_{suffix}"] = mw.p_value
            else:
                record[f"auc_{suffix}"] = None
                record[f"p_{suffix}"] = None
        out.append(record)
    return out


def feature_auc_csv(table: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["feature", "auc_short", "p_short", "auc_long", "p_long"])
    for rec in table:
        writer.writerow([
            rec["feature"],
            *("" if rec[k] is None else repr(rec[k])
              for k in ("auc_short", "p_short", "auc_long", "p_long")),
        ])
    return buf.getvalue()


def train_models(
    rows: Sequence[FeatureVector], config: RunConfig
) -> tuple[list[dict], dict]:
    """Cross-validated and out-of-sample metrics for every model combo.

    Returns the model-metrics records and the RMS probability gaps between
    the logistic models with and without promotion features.
    """
    metrics_records: list[dict] = []
    rms_gaps: dict = {"cv": {}, "out_of_sample": {}}
    horizons = []
    if config.horizon in ("short", "both"):
        horizons.append(Horizon.SHORT_TERM)
    if config.horizon in ("long", "both"):
        horizons.append(Horizon.LONG_TERM)

    for horizon in horizons:
        h_rows = [r for r in rows if r.horizon is horizon]
        if not h_rows:
            continue
        ds = Dataset.from_rows(h_rows)
        inconclusive = [r for r in h_rows if r.label is EffectLabel.INCONCLUSIVE]
        eval_rows = [r for r in inconclusive if r.d_observed is not None and r.d_observed != 0.0]
        if len(ds) < config.folds:
            raise TooFewRows(
                f"{len(ds)} labelled rows for {_horizon_key(horizon)} < {config.folds} folds"
            )
        if ds.n_positive < 2 or ds.n_negative < 2:
            raise TooFewRows(
                f"{_horizon_key(horizon)}: need at least 2 rows per class "
                f"(got {ds.n_positive} positive, {ds.n_negative} negative)"
            )
        cv_scores: dict = {}
        for kind in MODEL_KINDS:
            for combo in FEATURE_SET_COMBOS:
                record = {
                    "model": kind,
                    "feature_sets": list(combo),
                    "horizon": _horizon_key(horizon),
                    "n_rows": len(ds),
                    "seed": config.seed,
                    "standardized": kind == "logistic",
                }
                try:
                    cv = cross_validate(ds, kind, combo, k=config.folds, seed=config.seed)
                except SingularFit as exc:
                    # e.g. a corpus where every venue is isolated leaves the
                    # geographic block constant; record and move on
                    record["skipped"] = str(exc)
                    metrics_records.append(record)
                    continue
                record["metrics"] = cv.metrics.as_dict()
                if kind == "logistic":
                    cv_scores[combo] = cv.scores
                if eval_rows:
                    model = train_model(ds.rows, ds.y, kind, combo, seed=config.seed)
                    record["out_of_sample"] = {
                        "metrics": out_of_sample_eval(model, eval_rows).as_dict(),
                        "n_rows": len(eval_rows),
                    }
                metrics_records.append(record)

        pair_a, pair_b = RMS_PAIR
        if pair_a in cv_scores and pair_b in cv_scores:
            rms_gaps["cv"][_horizon_key(horizon)] = rms_gap(cv_scores[pair_a], cv_scores[pair_b])
        if eval_rows and pair_a in cv_scores and pair_b in cv_scores:
            model_a = train_model(ds.rows, ds.y, "logistic", pair_a, seed=config.seed)
            model_b = train_model(ds.rows, ds.y, "logistic", pair_b, seed=config.seed)
            rms_gaps["out_of_sample"][_horizon_key(horizon)] = rms_probability_gap(
                model_a, model_b, eval_rows
            )
    return metrics_records, rms_gaps


def build_report(
    config: RunConfig,
    cohort_summary: dict,
    effects: Sequence[CampaignEffect],
    reference_effects: Sequence[CampaignEffect],
    profiles: Sequence[VenueProfile],
    feature_rows: Sequence[FeatureVector],
    model_metrics: Optional[list[dict]],
    rms_gaps: Optional[dict],
) -> dict:
    return {
        "config": config.as_dict(),
        "cohort_summary": cohort_summary,
        "effect_tables": effect_tables(effects, reference_effects, profiles),
        "feature_aucs": feature_auc_table(feature_rows) if feature_rows else [],
        "model_metrics": model_metrics or [],
        "rms_gaps": rms_gaps or {"cv": {}, "out_of_sample": {}},
    }


def render_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"
