"""Composed analysis steps shared by the command line and the end-to-end checks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import irt
from .core import FeatureTable, RatingMatrix, Recording, RowId, check_scale
from .signal import (
    BandPassSpec,
    average_by_item,
    bandpass_recording,
    extract_epochs,
    features_48,
    features_192,
    grand_average,
)

__all__ = [
    "FeatureSets",
    "extract_features",
    "fit_scale",
    "ScaleFit",
    "level_dataset",
    "grade_dataset",
    "item_targets",
]


@dataclass(frozen=True)
class FeatureSets:
    erp48: FeatureTable | None = None
    trial48: FeatureTable | None = None
    grand192: FeatureTable | None = None


def extract_features(
    recordings: Sequence[Recording],
    which: Sequence[int] = (48, 192),
    spec: BandPassSpec | None = BandPassSpec(),
) -> FeatureSets:
    """Band-pass, epoch and summarise recordings.

    48: per (rater, photo) ERP over trials, plus per single trial.
    192: per photo, the ERP averaged over every rater and trial.
    """
    per_rater_erps = []
    trial_rows, trial_vecs, erp_rows, erp_vecs = [], [], [], []
    for rec in recordings:
        if spec is not None:
            rec = bandpass_recording(rec, spec)
        epochs = extract_epochs(rec)
        erps = average_by_item(epochs)
        per_rater_erps.append(erps)
        if 48 in which:
            for e in epochs:
                trial_rows.append(RowId(e.rater_id, e.item_id, e.trial_index))
                trial_vecs.append(features_48(e))
            for e in erps:
                erp_rows.append(RowId(e.rater_id, e.item_id))
                erp_vecs.append(features_48(e))
    out = {}
    if 48 in which:
        out["erp48"] = FeatureTable.from_vectors(erp_rows, erp_vecs)
        out["trial48"] = FeatureTable.from_vectors(trial_rows, trial_vecs)
    if 192 in which:
        by_item: dict[str, list] = {}
        for erps in per_rater_erps:
            for e in erps:
                by_item.setdefault(e.item_id, []).append(e)
        rows, vecs = [], []
        for item, group in by_item.items():
            rows.append(RowId("all", item))
            vecs.append(features_192(grand_average(group)))
        out["grand192"] = FeatureTable.from_vectors(rows, vecs)
    return FeatureSets(**out)


@dataclass(frozen=True)
class ScaleFit:
    scale: str
    models: list
    maps: list
    scores: np.ndarray
    score_sd: np.ndarray
    fit: irt.GrmFit


def fit_scale(ratings: RatingMatrix, scale: str, target_levels: int = 4, **em_opts) -> ScaleFit:
    """GRM per rater, collapsed category maps, and EAP sensitivity per photo."""
    scale = check_scale(scale)
    fit = irt.fit_grm_em(ratings.grades(scale), ratings.raters, scale, **em_opts)
    maps = [irt.collapse_scale(m, target_levels) for m in fit.models]
    scores, sd = irt.eap_scores(fit.models, ratings.grades(scale))
    return ScaleFit(scale, fit.models, maps, scores, sd, fit)


def level_dataset(
    ratings: RatingMatrix, maps: Sequence[irt.CategoryMap], table: FeatureTable, scale: str
) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Per rater: features of each photo's ERP and the rater's collapsed level for it."""
    grades = ratings.grades(scale)
    col = {r: k for k, r in enumerate(ratings.raters)}
    row = {i: k for k, i in enumerate(ratings.items)}
    by_rater = {m.rater_id: m for m in maps}
    out = {}
    for rater in ratings.raters:
        rows, X = table.select(rater)
        g = np.array([grades[row[r.item], col[rater]] for r in rows])
        out[rater] = (X, np.asarray(irt.apply_map(by_rater[rater], g)))
    return out


def grade_dataset(ratings: RatingMatrix, table: FeatureTable, scale: str) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Per rater: single-trial features with the raw 1..9 grade as the label."""
    grades = ratings.grades(scale)
    col = {r: k for k, r in enumerate(ratings.raters)}
    row = {i: k for k, i in enumerate(ratings.items)}
    out = {}
    for rater in ratings.raters:
        rows, X = table.select(rater)
        out[rater] = (X, np.array([grades[row[r.item], col[rater]] for r in rows]))
    return out


def item_targets(table: FeatureTable, items: Sequence[str], values: np.ndarray) -> np.ndarray:
    """Reorder per-photo values to follow the rows of a per-photo feature table."""
    pos = {i: k for k, i in enumerate(items)}
    return np.array([values[pos[r.item]] for r in table.rows])
