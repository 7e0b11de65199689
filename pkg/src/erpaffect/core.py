"""Domain types shared by every stage of the pipeline, plus file persistence.

Ratings and event lists are CSV, fitted models and reports are JSON carrying
``"format": 1``. All types are immutable after construction.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

FORMAT_VERSION = 1

EMOTIONS = ("Anger", "Contempt", "Disgust", "Fear", "Happiness", "Sadness", "Surprise")
CHANNELS = ("Fz", "Cz", "Oz")
SCALES = ("pleasant", "arousal")
GRADE_MIN, GRADE_MAX = 1, 9

SAMPLE_RATE = 400.0
EPOCH_PRE_MS = 100.0
EPOCH_POST_MS = 600.0


class DataError(ValueError):
    """Base class for malformed or inconsistent input data."""


class FormatError(DataError):
    """A file does not follow its documented layout."""


class GradeRangeError(DataError):
    """A rating grade lies outside 1..9."""


class CompletenessError(DataError):
    """A rating matrix has duplicate or missing (rater, item) cells."""


class EpochBoundsError(DataError):
    """An event leaves no room for the full epoch window."""


def check_scale(scale: str) -> str:
    scale = scale.lower()
    if scale not in SCALES:
        raise ValueError(f"unknown scale {scale!r}; expected one of {SCALES}")
    return scale


def ms_to_samples(ms: float, fs: float) -> int:
    """Convert a duration to a whole number of samples, refusing fractional results."""
    n = ms * fs / 1000.0
    if abs(n - round(n)) > 1e-9:
        raise ValueError(f"{ms} ms is not a whole number of samples at {fs} Hz")
    return int(round(n))


# --------------------------------------------------------------------------
# Study design and ratings
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class StudyDesign:
    n_raters: int
    n_items: int
    n_trials: int = 3
    emotion_categories: tuple[str, ...] = ()
    items_per_category: int = 0

    def __post_init__(self):
        if self.n_raters < 2:
            raise ValueError("a study needs at least 2 raters")
        if self.n_items < 1 or self.n_trials < 1:
            raise ValueError("n_items and n_trials must be positive")
        object.__setattr__(self, "emotion_categories", tuple(self.emotion_categories))
        if self.emotion_categories:
            if len(self.emotion_categories) * self.items_per_category != self.n_items:
                raise ValueError(
                    f"{len(self.emotion_categories)} categories x {self.items_per_category} "
                    f"items does not equal n_items={self.n_items}"
                )

    @classmethod
    def full(cls) -> "StudyDesign":
        """6 raters, 56 photos (7 emotions x 8), 3 viewing trials."""
        return cls(n_raters=6, n_items=56, n_trials=3, emotion_categories=EMOTIONS, items_per_category=8)


@dataclass(frozen=True)
class AffectRating:
    rater_id: str
    item_id: str
    pleasant: int
    arousal: int

    def __post_init__(self):
        for name in SCALES:
            g = getattr(self, name)
            if not (GRADE_MIN <= g <= GRADE_MAX):
                raise GradeRangeError(
                    f"{name} grade {g} for rater {self.rater_id}, item {self.item_id} is outside 1..9"
                )


@dataclass(frozen=True, eq=False)
class RatingMatrix:
    """Complete Affect Grid ratings, stored as (items x raters) grade arrays per scale."""

    design: StudyDesign
    raters: tuple[str, ...]
    items: tuple[str, ...]
    pleasant: np.ndarray
    arousal: np.ndarray

    def __post_init__(self):
        shape = (len(self.items), len(self.raters))
        for name in SCALES:
            arr = np.array(getattr(self, name), dtype=np.int64)
            if arr.shape != shape:
                raise ValueError(f"{name} grades have shape {arr.shape}, expected {shape}")
            if arr.size and (arr.min() < GRADE_MIN or arr.max() > GRADE_MAX):
                raise GradeRangeError(f"{name} grades outside 1..9")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if len(set(self.raters)) != len(self.raters) or len(set(self.items)) != len(self.items):
            raise CompletenessError("duplicate rater or item identifiers")
        if self.design.n_raters != len(self.raters) or self.design.n_items != len(self.items):
            raise ValueError("design does not match the rating dimensions")

    def grades(self, scale: str) -> np.ndarray:
        return getattr(self, check_scale(scale))

    def ratings(self) -> Iterator[AffectRating]:
        for r, rater in enumerate(self.raters):
            for i, item in enumerate(self.items):
                yield AffectRating(rater, item, int(self.pleasant[i, r]), int(self.arousal[i, r]))

    def __eq__(self, other):
        if not isinstance(other, RatingMatrix):
            return NotImplemented
        return (
            self.raters == other.raters
            and self.items == other.items
            and np.array_equal(self.pleasant, other.pleasant)
            and np.array_equal(self.arousal, other.arousal)
        )

    @classmethod
    def from_ratings(
        cls, ratings: Iterable[AffectRating], design: StudyDesign | None = None
    ) -> "RatingMatrix":
        ratings = list(ratings)
        raters = tuple(dict.fromkeys(r.rater_id for r in ratings))
        items = tuple(dict.fromkeys(r.item_id for r in ratings))
        cells: dict[tuple[str, str], AffectRating] = {}
        for r in ratings:
            key = (r.rater_id, r.item_id)
            if key in cells:
                raise CompletenessError(f"duplicate cell rater={key[0]} item={key[1]}")
            cells[key] = r
        missing = [(a, b) for a in raters for b in items if (a, b) not in cells]
        if missing:
            listing = ", ".join(f"{a}/{b}" for a, b in missing[:20])
            raise CompletenessError(f"missing {len(missing)} cell(s): {listing}")
        ri, ii = {r: k for k, r in enumerate(raters)}, {i: k for k, i in enumerate(items)}
        pleasant = np.zeros((len(items), len(raters)), dtype=np.int64)
        arousal = np.zeros_like(pleasant)
        for (a, b), r in cells.items():
            pleasant[ii[b], ri[a]] = r.pleasant
            arousal[ii[b], ri[a]] = r.arousal
        if design is None:
            design = StudyDesign(n_raters=len(raters), n_items=len(items))
        return cls(design, raters, items, pleasant, arousal)


def _open_csv(path: Path, header: Sequence[str]) -> Iterator[tuple[int, list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        if [h.strip() for h in first] != list(header):
            raise FormatError(f"{path}:1: header {first} does not match {list(header)}")
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            yield reader.line_num, [c.strip() for c in row]


def load_ratings(path: str | Path, design: StudyDesign | None = None) -> RatingMatrix:
    """Read ``rater,item,pleasant,arousal`` rows into a complete :class:`RatingMatrix`."""
    path = Path(path)
    ratings = []
    for line, row in _open_csv(path, ("rater", "item", "pleasant", "arousal")):
        if len(row) != 4:
            raise FormatError(f"{path}:{line}: expected 4 fields, got {len(row)}")
        try:
            p, a = int(row[2]), int(row[3])
        except ValueError:
            raise FormatError(f"{path}:{line}: grades must be integers") from None
        try:
            ratings.append(AffectRating(row[0], row[1], p, a))
        except GradeRangeError as exc:
            raise GradeRangeError(f"{path}:{line}: {exc}") from None
    if not ratings:
        raise FormatError(f"{path}: no rating rows")
    return RatingMatrix.from_ratings(ratings, design)


def save_ratings(ratings: RatingMatrix, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rater", "item", "pleasant", "arousal"])
        for r in ratings.ratings():
            w.writerow([r.rater_id, r.item_id, r.pleasant, r.arousal])


def load_item_emotions(path: str | Path) -> dict[str, str]:
    """Read the ``item,emotion`` table assigning each photo to its emotion category."""
    path = Path(path)
    out: dict[str, str] = {}
    for line, row in _open_csv(path, ("item", "emotion")):
        if len(row) != 2:
            raise FormatError(f"{path}:{line}: expected 2 fields")
        if row[0] in out:
            raise FormatError(f"{path}:{line}: duplicate item {row[0]}")
        out[row[0]] = row[1]
    return out


def save_item_emotions(emotions: dict[str, str], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["item", "emotion"])
        for item, emo in emotions.items():
            w.writerow([item, emo])


# --------------------------------------------------------------------------
# Recordings, epochs and ERPs
# --------------------------------------------------------------------------


class Event(NamedTuple):
    onset: int
    item_id: str
    trial: int


@dataclass(frozen=True, eq=False)
class Recording:
    """Continuous multichannel scalp potentials (microvolts) for one rater."""

    rater_id: str
    sample_rate: float
    channels: tuple[str, ...]
    samples: np.ndarray
    events: tuple[Event, ...] = ()

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        x = np.array(self.samples, dtype=float)
        if x.ndim != 2 or x.shape[0] != len(self.channels):
            raise ValueError(f"samples must be channels x time, got {x.shape} for {len(self.channels)} channels")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "channels", tuple(self.channels))
        events = tuple(Event(int(e[0]), str(e[1]), int(e[2])) for e in self.events)
        object.__setattr__(self, "events", events)
        pre = ms_to_samples(EPOCH_PRE_MS, self.sample_rate)
        post = ms_to_samples(EPOCH_POST_MS, self.sample_rate)
        for e in events:
            if e.onset - pre < 0 or e.onset + post > self.n_samples:
                raise EpochBoundsError(
                    f"event at sample {e.onset} (item {e.item_id}, trial {e.trial}) needs samples "
                    f"[{e.onset - pre}, {e.onset + post}) but the recording has {self.n_samples}"
                )

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Recording):
            return NotImplemented
        return (
            self.rater_id == other.rater_id
            and self.sample_rate == other.sample_rate
            and self.channels == other.channels
            and self.events == other.events
            and np.array_equal(self.samples, other.samples)
        )


@dataclass(frozen=True, eq=False)
class Epoch:
    rater_id: str
    item_id: str
    trial_index: int
    channels: tuple[str, ...]
    samples: np.ndarray
    onset_offset: int
    sample_rate: float

    def channel(self, name: str) -> np.ndarray:
        try:
            return self.samples[self.channels.index(name)]
        except ValueError:
            raise KeyError(f"channel {name!r} not in {self.channels}") from None

    @property
    def times_ms(self) -> np.ndarray:
        return (np.arange(self.samples.shape[1]) - self.onset_offset) * 1000.0 / self.sample_rate


@dataclass(frozen=True, eq=False)
class Erp:
    rater_id: str
    item_id: str
    channels: tuple[str, ...]
    samples: np.ndarray
    onset_offset: int
    sample_rate: float
    n_trials_averaged: int

    def __post_init__(self):
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("ERP samples must be finite")

    channel = Epoch.channel
    times_ms = Epoch.times_ms


def _fmt(x: float) -> str:
    return repr(float(x))


def save_recording(rec: Recording, directory: str | Path) -> Path:
    """Write ``recording_<rater>.csv`` and ``events_<rater>.csv``; return the recording path."""
    directory = Path(directory)
    path = directory / f"recording_{rec.rater_id}.csv"
    t = np.arange(rec.n_samples) / rec.sample_rate
    with open(path, "w") as fh:
        fh.write(",".join(("t",) + rec.channels) + "\n")
        cols = np.vstack([t, rec.samples]).T
        fh.writelines(",".join(map(_fmt, row)) + "\n" for row in cols)
    with open(directory / f"events_{rec.rater_id}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["onset_sample", "item", "trial"])
        for e in rec.events:
            w.writerow([e.onset, e.item_id, e.trial])
    return path


_REC_NAME = re.compile(r"^recording_(?P<rater>.+)\.csv$")


def load_recording(path: str | Path) -> Recording:
    """Read a recording CSV and its sibling events file."""
    path = Path(path)
    m = _REC_NAME.match(path.name)
    if not m:
        raise FormatError(f"{path}: recording files must be named recording_<rater>.csv")
    rater = m.group("rater")
    with open(path) as fh:
        header = [h.strip() for h in fh.readline().strip().split(",")]
        if len(header) < 2 or header[0] != "t":
            raise FormatError(f"{path}:1: header must be 't,<channel>,...', got {header}")
        channels = tuple(header[1:])
        rows = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) != len(header):
                raise FormatError(
                    f"{path}:{lineno}: {len(parts)} fields but header declares {len(header)} columns"
                )
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-numeric value") from None
    if len(rows) < 2:
        raise FormatError(f"{path}: need at least two samples to infer the sample rate")
    data = np.asarray(rows)
    dt = np.diff(data[:, 0])
    if np.any(dt <= 0) or np.ptp(dt) > 1e-6 * dt.mean():
        raise FormatError(f"{path}: time column is not uniformly increasing")
    fs = round((len(dt)) / (data[-1, 0] - data[0, 0]), 6)

    ev_path = path.with_name(f"events_{rater}.csv")
    events = []
    for line, row in _open_csv(ev_path, ("onset_sample", "item", "trial")):
        if len(row) != 3:
            raise FormatError(f"{ev_path}:{line}: expected 3 fields")
        try:
            onset, trial = int(row[0]), int(row[2])
        except ValueError:
            raise FormatError(f"{ev_path}:{line}: onset and trial must be integers") from None
        if onset >= len(data) or onset < 0:
            raise EpochBoundsError(f"{ev_path}:{line}: event at sample {onset} is beyond the recording")
        events.append(Event(onset, row[1], trial))
    return Recording(rater, fs, channels, data[:, 1:].T.copy(), tuple(events))


# --------------------------------------------------------------------------
# Features
# --------------------------------------------------------------------------


class FeatureKey(NamedTuple):
    """One spectral power feature: channel, frequency (Hz) and window bounds (ms from onset)."""

    channel: str
    frequency: float
    window_start: float
    window_end: float

    @property
    def label(self) -> str:
        return f"{self.channel}_{self.frequency:g}Hz_{self.window_start:g}_{self.window_end:g}ms"

    @classmethod
    def parse(cls, label: str) -> "FeatureKey":
        m = re.fullmatch(r"(?P<ch>[^_]+)_(?P<f>[-\d.e+]+)Hz_(?P<a>[-\d.e+]+)_(?P<b>[-\d.e+]+)ms", label)
        if not m:
            raise FormatError(f"not a feature label: {label!r}")
        return cls(m["ch"], float(m["f"]), float(m["a"]), float(m["b"]))

    def sort_key(self):
        return (self.channel, self.window_start, self.frequency)

    def __str__(self):
        return self.label


def canonical_order(keys: Iterable[FeatureKey]) -> list[FeatureKey]:
    """Sort by (channel, window start, frequency)."""
    return sorted(keys, key=FeatureKey.sort_key)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    keys: tuple[FeatureKey, ...]
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.keys),):
            raise ValueError("one value per key required")
        if len(set(self.keys)) != len(self.keys):
            raise ValueError("feature keys must be unique")
        if np.any(v < 0):
            raise ValueError("power features must be non-negative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.keys)

    def __getitem__(self, key: FeatureKey) -> float:
        return float(self.values[self.keys.index(key)])

    def as_dict(self) -> dict[FeatureKey, float]:
        return dict(zip(self.keys, self.values.tolist()))


class RowId(NamedTuple):
    rater: str
    item: str
    trial: int | None = None


@dataclass(frozen=True, eq=False)
class FeatureTable:
    """Feature vectors for many (rater, item[, trial]) rows sharing one key order."""

    rows: tuple[RowId, ...]
    keys: tuple[FeatureKey, ...]
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (len(self.rows), len(self.keys)):
            raise ValueError(f"matrix shape {m.shape} does not match rows x keys")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_vectors(cls, rows: Sequence[RowId], vectors: Sequence[FeatureVector]) -> "FeatureTable":
        if not vectors:
            raise ValueError("no feature vectors")
        keys = vectors[0].keys
        for v in vectors:
            if v.keys != keys:
                raise ValueError("feature vectors disagree on key order")
        return cls(tuple(rows), keys, np.vstack([v.values for v in vectors]))

    def select(self, rater: str | None = None) -> tuple[list[RowId], np.ndarray]:
        idx = [k for k, r in enumerate(self.rows) if rater is None or r.rater == rater]
        return [self.rows[k] for k in idx], self.matrix[idx]

    def lookup(self) -> dict[RowId, np.ndarray]:
        return {r: self.matrix[k] for k, r in enumerate(self.rows)}


def save_features(table: FeatureTable, path: str | Path) -> None:
    with_trial = any(r.trial is not None for r in table.rows)
    head = ["rater", "item"] + (["trial"] if with_trial else []) + [k.label for k in table.keys]
    with open(path, "w") as fh:
        fh.write(",".join(head) + "\n")
        for r, vals in zip(table.rows, table.matrix):
            ids = [r.rater, r.item] + ([str(r.trial)] if with_trial else [])
            fh.write(",".join(ids + [_fmt(v) for v in vals]) + "\n")


def load_features(path: str | Path) -> FeatureTable:
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header[:2] != ["rater", "item"]:
            raise FormatError(f"{path}:1: header must start with rater,item")
        with_trial = len(header) > 2 and header[2] == "trial"
        n_id = 3 if with_trial else 2
        keys = tuple(FeatureKey.parse(h) for h in header[n_id:])
        rows, vals = [], []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.strip().split(",")
            if len(parts) != len(header):
                raise FormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(parts)}")
            rows.append(RowId(parts[0], parts[1], int(parts[2]) if with_trial else None))
            vals.append([float(p) for p in parts[n_id:]])
    return FeatureTable(tuple(rows), keys, np.array(vals, dtype=float).reshape(len(rows), len(keys)))


# --------------------------------------------------------------------------
# JSON documents
# --------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps_json(kind: str, payload: dict) -> str:
    """Serialize deterministically: sorted keys, shortest round-trip floats, NaN as null."""
    doc = {"format": FORMAT_VERSION, "kind": kind, **_jsonable(payload)}
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path: str | Path, kind: str, payload: dict) -> None:
    Path(path).write_text(dumps_json(kind, payload))


def read_json(path: str | Path, kind: str | None = None) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None
    if doc.get("format") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {doc.get('format')!r}, expected {FORMAT_VERSION}")
    if kind is not None and doc.get("kind") != kind:
        raise FormatError(f"{path}: expected a {kind!r} document, found {doc.get('kind')!r}")
    return doc


def derive_rng(seed: int, *path: int) -> np.random.Generator:
    """PCG64 generator for ``seed`` and an optional sub-stream path (e.g. a rater index)."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.PCG64(ss))
