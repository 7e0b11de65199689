"""Predicting Affect Grid impressions of facial-emotion photos from scalp potentials.

Modules
-------
core
    Data model (ratings, recordings, epochs, feature tables) and file formats.
signal
    Band-pass filtering, epoching, ERP averaging and windowed spectral power.
irt
    Graded response model per rater, category curves, EAP scores, scale collapsing.
cluster
    WPGMA clustering of Affect Grid responses.
predict
    Logistic classifiers, stepwise regression, leave-one-subject-out evaluation, metrics.
synth
    Seeded synthetic studies with known ground truth.
pipeline
    Composed steps shared by the command line and end-to-end checks.
"""

from . import cluster, core, irt, pipeline, predict, signal, synth
from .core import (
    CHANNELS,
    EMOTIONS,
    SCALES,
    AffectRating,
    Epoch,
    Erp,
    FeatureKey,
    FeatureTable,
    FeatureVector,
    RatingMatrix,
    Recording,
    StudyDesign,
    load_ratings,
    load_recording,
)
from .irt import CategoryMap, GrmModel, SensitivityScore, collapse_scale, crc, eap_score, fit_grm, occ
from .predict import ConfusionMatrix, LogisticModel, OneVsRestClassifier, SensitivityRegressor, loso
from .synth import SynthConfig, gen_ratings, gen_recordings

__version__ = "0.1.0"

__all__ = [
    "cluster",
    "core",
    "irt",
    "pipeline",
    "predict",
    "signal",
    "synth",
    "CHANNELS",
    "EMOTIONS",
    "SCALES",
    "AffectRating",
    "Epoch",
    "Erp",
    "FeatureKey",
    "FeatureTable",
    "FeatureVector",
    "RatingMatrix",
    "Recording",
    "StudyDesign",
    "load_ratings",
    "load_recording",
    "CategoryMap",
    "GrmModel",
    "SensitivityScore",
    "collapse_scale",
    "crc",
    "eap_score",
    "fit_grm",
    "occ",
    "ConfusionMatrix",
    "LogisticModel",
    "OneVsRestClassifier",
    "SensitivityRegressor",
    "loso",
    "SynthConfig",
    "gen_ratings",
    "gen_recordings",
    "__version__",
]
