"""Seeded synthetic studies with known ground truth.

Ratings are sampled from per-rater graded response models at each photo's
latent sensitivity; recordings carry sinusoidal bursts whose amplitude tracks
that sensitivity, buried in white (or pink) noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import (
    CHANNELS,
    EMOTIONS,
    SCALES,
    Event,
    RatingMatrix,
    Recording,
    StudyDesign,
    check_scale,
    derive_rng,
    ms_to_samples,
)
from .irt import GrmModel, crc

__all__ = [
    "RaterParams",
    "PlantedComponent",
    "EegConfig",
    "SynthConfig",
    "item_ids",
    "rater_ids",
    "item_emotions",
    "true_models",
    "gen_latents",
    "gen_ratings",
    "gen_recordings",
    "gen_affect_blobs",
]

RAMP_MS = 20.0


def _fill_thresholds(row: Sequence[float | None]) -> tuple[float, ...]:
    """Turn a parameter-table row with gaps into 8 increasing thresholds.

    A gap means the grade was never used, so the neighbouring boundaries are
    pushed together (interior) or far out (edges) to give it negligible mass.
    """
    vals = list(row)
    present = [k for k, v in enumerate(vals) if v is not None]
    first, last = present[0], present[-1]
    for k in range(first - 1, -1, -1):
        vals[k] = vals[k + 1] - 4.0 if k == first - 1 else vals[k + 1] - 0.01
    for k in range(last + 1, len(vals)):
        vals[k] = vals[k - 1] + 4.0 if k == last + 1 else vals[k - 1] + 0.01
    for k in range(len(vals) - 1, -1, -1):
        if vals[k] is None:
            vals[k] = vals[k + 1] - 0.01
    return tuple(float(v) for v in vals)


_ = None
# Slope and thresholds per rater, shaped like published rater tables (gaps = unused grades).
_PLEASANT_TABLE = [
    (4.76, [-1.27, -0.57, -0.14, 0.33, 0.95, 1.09, 1.48, _]),
    (3.98, [-1.34, -1.06, -0.28, 0.40, _, _, 1.28, 1.50]),
    (3.17, [-1.45, -0.77, -0.23, 0.24, 1.04, 1.18, 1.54, 2.02]),
    (5.11, [_, -0.96, -0.45, 0.22, 0.92, 1.28, 1.50, 2.07]),
    (3.18, [-2.00, -0.94, -0.42, 0.15, 0.67, 1.13, 1.72, 2.70]),
    (3.57, [-0.93, -0.63, -0.10, 0.13, 0.46, 0.60, 1.04, 2.15]),
]
_AROUSAL_TABLE = [
    (3.77, [_, _, -2.17, -1.19, -0.51, -0.19, 0.29, 1.09]),
    (1.18, [-3.33, -2.68, -1.67, -0.53, 0.07, 0.95, 1.72, 2.88]),
    (2.65, [-2.67, -2.28, -1.25, -0.73, -0.32, 0.32, 0.73, 1.27]),
    (2.78, [_, -2.69, -1.47, -1.35, -0.78, -0.18, 0.74, 1.70]),
    (2.34, [_, -1.97, -1.29, -0.65, -0.06, 0.94, 1.57, _]),
    (1.23, [-2.49, -1.79, _, -0.39, 0.07, 0.60, 1.23, 2.02]),
]

# (pleasant, arousal) latent means per emotion category
DEFAULT_EMOTION_MEANS = {
    "Anger": (-0.8, 0.5),
    "Contempt": (-0.4, -0.3),
    "Disgust": (-0.9, 0.4),
    "Fear": (-0.6, 0.6),
    "Happiness": (1.8, 0.5),
    "Sadness": (-1.0, -0.9),
    "Surprise": (0.3, 0.9),
}

# Positive control: emotions spread further apart on the pleasant axis.
HIGH_SNR_EMOTION_MEANS = {
    "Anger": (-1.28, 0.5),
    "Contempt": (-0.64, -0.3),
    "Disgust": (-1.44, 0.4),
    "Fear": (-0.96, 0.6),
    "Happiness": (2.5, 0.5),
    "Sadness": (-1.6, -0.9),
    "Surprise": (0.48, 0.9),
}
_HIGH_SNR_BASE = (-1.6, -1.1, -0.6, -0.2, 0.2, 0.6, 1.1, 1.6)


@dataclass(frozen=True)
class RaterParams:
    slope: float
    thresholds: tuple[float, ...]

    def __post_init__(self):
        if not self.slope > 0 or np.any(np.diff(self.thresholds) <= 0):
            raise ValueError("rater needs a positive slope and strictly increasing thresholds")


@dataclass(frozen=True)
class PlantedComponent:
    """A sinusoidal burst on one channel whose amplitude is ``offset + gain * latent[scale]``."""

    channel: str
    frequency: float
    start_ms: float
    end_ms: float
    gain: float
    scale: str = "pleasant"
    offset: float = 0.0

    def __post_init__(self):
        check_scale(self.scale)
        if not (np.isfinite(self.gain) and np.isfinite(self.offset)):
            raise ValueError("gain and offset must be finite")
        if self.end_ms - self.start_ms <= 2 * RAMP_MS:
            raise ValueError("burst must be longer than its two ramps")


@dataclass(frozen=True)
class EegConfig:
    noise_sd: float = 5.0
    components: tuple[PlantedComponent, ...] = ()
    pink: bool = False
    sample_rate: float = 400.0
    channels: tuple[str, ...] = CHANNELS
    isi_ms: float = 1000.0
    lead_ms: float = 1000.0

    def __post_init__(self):
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")


def _table_params(table) -> tuple[RaterParams, ...]:
    return tuple(RaterParams(s, _fill_thresholds(th)) for s, th in table)


@dataclass(frozen=True)
class SynthConfig:
    design: StudyDesign = field(default_factory=StudyDesign.full)
    pleasant_raters: tuple[RaterParams, ...] = field(default_factory=lambda: _table_params(_PLEASANT_TABLE))
    arousal_raters: tuple[RaterParams, ...] = field(default_factory=lambda: _table_params(_AROUSAL_TABLE))
    emotion_means: dict = field(default_factory=lambda: dict(DEFAULT_EMOTION_MEANS))
    emotion_sd: float = 0.45
    eeg: EegConfig = field(default_factory=EegConfig)
    seed: int = 0

    def __post_init__(self):
        n = self.design.n_raters
        if len(self.pleasant_raters) != n or len(self.arousal_raters) != n:
            raise ValueError(f"need parameters for exactly {n} raters on each scale")
        for emo in self.design.emotion_categories:
            if emo not in self.emotion_means:
                raise ValueError(f"no latent mean for emotion {emo!r}")
        for p, a in self.emotion_means.values():
            if abs(p) > 3 or abs(a) > 3:
                raise ValueError("emotion means must lie within [-3, 3]")

    def raters_for(self, scale: str) -> tuple[RaterParams, ...]:
        return self.pleasant_raters if check_scale(scale) == "pleasant" else self.arousal_raters

    def with_seed(self, seed: int) -> "SynthConfig":
        return replace(self, seed=seed)

    @classmethod
    def high_snr(cls, seed: int = 0) -> "SynthConfig":
        """Full-size study with strong 12.5 Hz bursts tied to both scales.

        Pleasant raters are sharp (slope 8) and share nearly the same
        thresholds, so their collapsed levels agree across raters.
        """
        comps = (
            PlantedComponent("Cz", 12.5, 220.0, 380.0, gain=3.0, scale="pleasant", offset=8.0),
            PlantedComponent("Fz", 12.5, 220.0, 380.0, gain=4.0, scale="pleasant"),
            PlantedComponent("Cz", 12.5, 380.0, 540.0, gain=3.0, scale="arousal", offset=8.0),
            PlantedComponent("Fz", 12.5, 60.0, 220.0, gain=4.0, scale="arousal"),
        )
        raters = tuple(
            RaterParams(8.0, tuple(b + 0.05 * (r - 2.5) for b in _HIGH_SNR_BASE)) for r in range(6)
        )
        return cls(
            pleasant_raters=raters,
            emotion_means=dict(HIGH_SNR_EMOTION_MEANS),
            eeg=EegConfig(noise_sd=4.0, components=comps),
            seed=seed,
        )

    @classmethod
    def null(cls, seed: int = 0, noise_sd: float = 10.0) -> "SynthConfig":
        """Full-size study whose recordings carry no planted signal."""
        return cls(eeg=EegConfig(noise_sd=noise_sd), seed=seed)


def rater_ids(design: StudyDesign) -> tuple[str, ...]:
    return tuple(f"sub{r + 1}" for r in range(design.n_raters))


def item_ids(design: StudyDesign) -> tuple[str, ...]:
    return tuple(str(i + 1) for i in range(design.n_items))


def item_emotions(design: StudyDesign) -> dict[str, str]:
    """Photos are grouped in consecutive blocks of ``items_per_category`` per emotion."""
    if not design.emotion_categories:
        return {}
    ids = item_ids(design)
    k = design.items_per_category
    return {ids[i]: design.emotion_categories[i // k] for i in range(design.n_items)}


def true_models(cfg: SynthConfig, scale: str) -> list[GrmModel]:
    return [
        GrmModel(rid, check_scale(scale), p.slope, p.thresholds, tuple(range(1, len(p.thresholds) + 2)))
        for rid, p in zip(rater_ids(cfg.design), cfg.raters_for(scale))
    ]


def gen_latents(cfg: SynthConfig) -> dict[str, np.ndarray]:
    """Per-photo latent sensitivity on each scale; N(0, 1) when no emotion categories are set."""
    rng = derive_rng(cfg.seed, 0)
    d = cfg.design
    if not d.emotion_categories:
        return {s: rng.standard_normal(d.n_items) for s in SCALES}
    means = np.array([cfg.emotion_means[e] for e in d.emotion_categories])
    centre = np.repeat(means, d.items_per_category, axis=0)
    draws = centre + cfg.emotion_sd * rng.standard_normal(centre.shape)
    return {"pleasant": draws[:, 0], "arousal": draws[:, 1]}


def _sample_grades(models: Sequence[GrmModel], latent: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    out = np.zeros((len(latent), len(models)), dtype=np.int64)
    for r, m in enumerate(models):
        cdf = np.cumsum(crc(m, latent), axis=1)
        u = rng.random(len(latent))
        k = np.sum(u[:, None] > cdf[:, :-1], axis=1)
        out[:, r] = np.asarray(m.used_categories)[k]
    return out


def gen_ratings(cfg: SynthConfig) -> tuple[RatingMatrix, dict[str, np.ndarray]]:
    """Sample a complete rating matrix and return it with the true latents."""
    latents = gen_latents(cfg)
    grades = {}
    for k, scale in enumerate(SCALES):
        grades[scale] = _sample_grades(true_models(cfg, scale), latents[scale], derive_rng(cfg.seed, 1, k))
    rm = RatingMatrix(cfg.design, rater_ids(cfg.design), item_ids(cfg.design), grades["pleasant"], grades["arousal"])
    return rm, latents


def _pink(n: int, rng: np.random.Generator) -> np.ndarray:
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.arange(len(spec), dtype=float)
    f[0] = 1.0
    x = np.fft.irfft(spec / np.sqrt(f), n=n)
    return x / x.std()


def _burst(comp: PlantedComponent, fs: float) -> tuple[int, np.ndarray]:
    """Unit-amplitude burst waveform and its offset (samples) from onset."""
    a = ms_to_samples(comp.start_ms, fs)
    n = ms_to_samples(comp.end_ms, fs) - a
    t = np.arange(n) / fs
    wave = np.sin(2 * np.pi * comp.frequency * t)
    nr = max(1, int(round(RAMP_MS * fs / 1000.0)))
    ramp = 0.5 * (1 - np.cos(np.pi * (np.arange(nr) + 0.5) / nr))
    wave[:nr] *= ramp
    wave[-nr:] *= ramp[::-1]
    return a, wave


def gen_recordings(cfg: SynthConfig, latents: dict[str, np.ndarray]) -> list[Recording]:
    """One continuous recording per rater; each photo is shown once per trial in shuffled order."""
    d, eeg = cfg.design, cfg.eeg
    fs = eeg.sample_rate
    isi = ms_to_samples(eeg.isi_ms, fs)
    lead = ms_to_samples(eeg.lead_ms, fs)
    n_events = d.n_items * d.n_trials
    n_total = 2 * lead + n_events * isi
    ids = item_ids(d)
    ch_index = {c: k for k, c in enumerate(eeg.channels)}
    for comp in eeg.components:
        if comp.channel not in ch_index:
            raise ValueError(f"planted channel {comp.channel!r} not recorded")
    bursts = [(comp, *_burst(comp, fs)) for comp in eeg.components]

    recs = []
    for r, rid in enumerate(rater_ids(d)):
        rng = derive_rng(cfg.seed, 2, r)
        if eeg.pink:
            x = np.vstack([_pink(n_total, rng) for _ in eeg.channels]) * eeg.noise_sd
        else:
            x = rng.standard_normal((len(eeg.channels), n_total)) * eeg.noise_sd
        events = []
        pos = lead
        for trial in range(1, d.n_trials + 1):
            for i in rng.permutation(d.n_items):
                events.append(Event(pos, ids[i], trial))
                for comp, off, wave in bursts:
                    amp = comp.offset + comp.gain * latents[comp.scale][i]
                    x[ch_index[comp.channel], pos + off : pos + off + len(wave)] += amp * wave
                pos += isi
        recs.append(Recording(rid, fs, eeg.channels, x, tuple(events)))
    return recs


def gen_affect_blobs(
    n: int = 336,
    pleasant_share: float = 0.42,
    seed: int = 0,
    centres: tuple[tuple[float, float], tuple[float, float]] = ((7.0, 5.0), (3.0, 4.5)),
    sd: float = 0.6,
) -> tuple[np.ndarray, np.ndarray]:
    """Two Gaussian blobs on the (pleasant, arousal) plane split along the pleasant axis.

    Returns points (n x 2) and labels, 0 for the pleasant blob and 1 otherwise.
    """
    rng = derive_rng(seed, 3)
    n_p = int(round(pleasant_share * n))
    labels = np.r_[np.zeros(n_p, dtype=int), np.ones(n - n_p, dtype=int)]
    pts = np.asarray(centres, dtype=float)[labels] + sd * rng.standard_normal((n, 2))
    order = rng.permutation(n)
    return pts[order], labels[order]
