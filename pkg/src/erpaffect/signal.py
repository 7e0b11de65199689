"""Filtering, epoching, ERP averaging and windowed spectral power features."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import signal as sps

from .core import (
    EPOCH_POST_MS,
    EPOCH_PRE_MS,
    EpochBoundsError,
    Epoch,
    Erp,
    FeatureKey,
    FeatureVector,
    Recording,
    canonical_order,
    ms_to_samples,
)

__all__ = [
    "BandPassSpec",
    "WindowSpec",
    "bandpass",
    "bandpass_recording",
    "extract_epochs",
    "average_erp",
    "average_by_item",
    "grand_average",
    "window_power",
    "features_48",
    "features_192",
    "FEATURES_48_FREQS",
    "FEATURES_48_STARTS",
    "FEATURES_192_FREQS",
    "FEATURES_192_STARTS",
]

WINDOW_MS = 160.0

FEATURES_48_FREQS = (6.25, 12.5, 18.75, 25.0)
FEATURES_48_STARTS = (-100.0, 60.0, 220.0, 380.0)
FEATURES_48_CHANNELS = ("Fz", "Cz", "Oz")

FEATURES_192_FREQS = tuple(2.5 * k for k in range(1, 9))
FEATURES_192_STARTS = tuple(40.0 * k for k in range(12))
FEATURES_192_CHANNELS = ("Fz", "Cz")


@dataclass(frozen=True)
class BandPassSpec:
    low_cut: float = 2.0
    high_cut: float = 30.0
    order: int = 4
    zero_phase: bool = True

    def validate(self, fs: float) -> None:
        if not (0 < self.low_cut < self.high_cut < fs / 2):
            raise ValueError(
                f"band {self.low_cut}-{self.high_cut} Hz must satisfy 0 < low < high < fs/2 = {fs / 2}"
            )
        if self.order < 1:
            raise ValueError("filter order must be positive")

    def sos(self, fs: float) -> np.ndarray:
        self.validate(fs)
        return sps.butter(self.order, [self.low_cut, self.high_cut], btype="bandpass", fs=fs, output="sos")


@dataclass(frozen=True)
class WindowSpec:
    """A 160 ms analysis window starting ``start_ms`` after onset, zero-padded to ``pad_to_samples``."""

    start_ms: float
    pad_to_samples: int
    length_ms: float = WINDOW_MS

    def n_samples(self, fs: float) -> int:
        n = ms_to_samples(self.length_ms, fs)
        if self.pad_to_samples < n:
            raise ValueError(f"pad_to_samples={self.pad_to_samples} is shorter than the {n}-sample window")
        return n

    @property
    def end_ms(self) -> float:
        return self.start_ms + self.length_ms


def bandpass(x: np.ndarray, spec: BandPassSpec = BandPassSpec(), fs: float = 400.0) -> np.ndarray:
    """Butterworth band-pass, applied forward and backward when ``spec.zero_phase``.

    Works along the last axis, so a channels x time matrix is filtered row-wise.
    """
    sos = spec.sos(fs)
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if n < 3 * spec.order:
        raise ValueError(f"series of {n} samples is too short for an order-{spec.order} filter")
    if not spec.zero_phase:
        return sps.sosfilt(sos, x, axis=-1)
    # scipy's default edge padding, capped so short series still work
    ntaps = 2 * len(sos) + 1 - min((sos[:, 2] == 0).sum(), (sos[:, 5] == 0).sum())
    padlen = min(3 * ntaps, n - 1)
    return sps.sosfiltfilt(sos, x, axis=-1, padlen=padlen)


def bandpass_recording(rec: Recording, spec: BandPassSpec = BandPassSpec()) -> Recording:
    return Recording(rec.rater_id, rec.sample_rate, rec.channels, bandpass(rec.samples, spec, rec.sample_rate), rec.events)


def extract_epochs(
    rec: Recording, pre_ms: float = EPOCH_PRE_MS, post_ms: float = EPOCH_POST_MS, baseline: bool = True
) -> list[Epoch]:
    """Cut one epoch per event, spanning ``[-pre_ms, +post_ms)`` around onset.

    With ``baseline`` each channel has its mean over the pre-onset interval removed.
    """
    fs = rec.sample_rate
    pre, post = ms_to_samples(pre_ms, fs), ms_to_samples(post_ms, fs)
    out = []
    for ev in rec.events:
        a, b = ev.onset - pre, ev.onset + post
        if a < 0 or b > rec.n_samples:
            raise EpochBoundsError(f"event at sample {ev.onset} needs [{a}, {b}) of {rec.n_samples} samples")
        seg = rec.samples[:, a:b].copy()
        if baseline and pre > 0:
            seg -= seg[:, :pre].mean(axis=1, keepdims=True)
        seg.setflags(write=False)
        out.append(Epoch(rec.rater_id, ev.item_id, ev.trial, rec.channels, seg, pre, fs))
    return out


def average_erp(epochs: Sequence[Epoch]) -> Erp:
    if not epochs:
        raise ValueError("cannot average an empty list of epochs")
    first = epochs[0]
    for e in epochs[1:]:
        if (
            e.samples.shape != first.samples.shape
            or e.channels != first.channels
            or e.sample_rate != first.sample_rate
            or e.onset_offset != first.onset_offset
        ):
            raise ValueError("epochs differ in shape, channels, sample rate or onset offset")
    mean = np.mean([e.samples for e in epochs], axis=0)
    mean.setflags(write=False)
    return Erp(first.rater_id, first.item_id, first.channels, mean, first.onset_offset, first.sample_rate, len(epochs))


def average_by_item(epochs: Sequence[Epoch]) -> list[Erp]:
    """One ERP per (rater, item), in order of first appearance."""
    groups: dict[tuple[str, str], list[Epoch]] = {}
    for e in epochs:
        groups.setdefault((e.rater_id, e.item_id), []).append(e)
    return [average_erp(g) for g in groups.values()]


def grand_average(erps: Sequence[Erp], rater_id: str = "all") -> Erp:
    """Trial-weighted mean of ERPs for the same item across raters."""
    if not erps:
        raise ValueError("no ERPs to average")
    w = np.array([e.n_trials_averaged for e in erps], dtype=float)
    mean = np.tensordot(w / w.sum(), np.array([e.samples for e in erps]), axes=1)
    first = erps[0]
    return Erp(rater_id, first.item_id, first.channels, mean, first.onset_offset, first.sample_rate, int(w.sum()))


def _window_slice(n_total: int, onset_offset: int, w: WindowSpec, fs: float) -> slice:
    n = w.n_samples(fs)
    a = onset_offset + ms_to_samples(w.start_ms, fs)
    if a < 0 or a + n > n_total:
        raise ValueError(f"window {w.start_ms}-{w.end_ms} ms falls outside the {n_total}-sample series")
    return slice(a, a + n)


def _bins(freqs: Sequence[float], w: WindowSpec, fs: float) -> np.ndarray:
    k = np.asarray(freqs, dtype=float) * w.pad_to_samples / fs
    kr = np.round(k)
    if np.any(np.abs(k - kr) > 1e-9) or np.any(kr < 0) or np.any(kr > w.pad_to_samples // 2):
        bad = [f for f, kk, r in zip(freqs, k, kr) if abs(kk - r) > 1e-9]
        raise ValueError(f"frequencies {bad or list(freqs)} are not on the {fs / w.pad_to_samples:g} Hz DFT grid")
    return kr.astype(int)


def _window_powers(x: np.ndarray, w: WindowSpec, freqs: Sequence[float], fs: float, onset_offset: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    seg = x[..., _window_slice(x.shape[-1], onset_offset, w, fs)]
    seg = seg - seg.mean(axis=-1, keepdims=True)
    spec = np.fft.rfft(seg, n=w.pad_to_samples, axis=-1)
    n = seg.shape[-1]
    return (np.abs(spec[..., _bins(freqs, w, fs)]) / n) ** 2


def window_power(x: np.ndarray, w: WindowSpec, f: float, fs: float, onset_offset: int = 0) -> float:
    """Power (uV^2) at ``f`` Hz of one window of a single-channel series.

    The window is mean-subtracted, zero-padded to ``w.pad_to_samples`` and
    transformed; the DFT magnitude is divided by the unpadded window length,
    so a bin-centred sinusoid of amplitude A gives (A/2)^2 regardless of padding.
    ``onset_offset`` is the sample index of time zero within ``x``.
    """
    return float(_window_powers(x, w, [f], fs, onset_offset)[0])


def _features(
    source: Epoch | Erp,
    channels: Sequence[str],
    freqs: Sequence[float],
    starts: Sequence[float],
    pad: int,
) -> FeatureVector:
    values: dict[FeatureKey, float] = {}
    for ch in channels:
        x = source.channel(ch)
        for start in starts:
            w = WindowSpec(start, pad)
            p = _window_powers(x, w, freqs, source.sample_rate, source.onset_offset)
            for f, v in zip(freqs, p):
                values[FeatureKey(ch, float(f), float(start), float(w.end_ms))] = float(v)
    keys = canonical_order(values)
    return FeatureVector(tuple(keys), np.array([values[k] for k in keys]))


def features_48(epoch: Epoch | Erp) -> FeatureVector:
    """4 frequencies x Fz/Cz/Oz x four contiguous 160 ms windows from -100 ms (native 6.25 Hz grid)."""
    fs = epoch.sample_rate
    return _features(epoch, FEATURES_48_CHANNELS, FEATURES_48_FREQS, FEATURES_48_STARTS, ms_to_samples(WINDOW_MS, fs))


def features_192(erp: Erp | Epoch) -> FeatureVector:
    """2.5-20 Hz in 2.5 Hz steps x Fz/Cz x twelve 160 ms windows stepping 40 ms from onset.

    Windows are zero-padded to 400 ms so the DFT grid lands on 2.5 Hz.
    """
    fs = erp.sample_rate
    pad = int(round(fs / 2.5))
    return _features(erp, FEATURES_192_CHANNELS, FEATURES_192_FREQS, FEATURES_192_STARTS, pad)
