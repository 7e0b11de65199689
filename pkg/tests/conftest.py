import numpy as np
import pytest

from erpaffect import synth
from erpaffect.core import RatingMatrix, Recording, StudyDesign
from erpaffect.irt import GrmModel

# Converted-level confusion of the published pleasant-scale LOSO run (rows = true, cols = predicted).
REFERENCE_CONFUSION = np.array(
    [
        [13, 27, 3, 0],
        [44, 110, 27, 2],
        [1, 20, 36, 4],
        [0, 0, 6, 43],
    ]
)

# Published pleasant-scale parameters; None marks a grade the rater never used.
PLEASANT_ROWS = {
    "sub1": (4.76, [-1.27, -0.57, -0.14, 0.33, 0.95, 1.09, 1.48, None]),
    "sub2": (3.98, [-1.34, -1.06, -0.28, 0.40, None, None, 1.28, 1.50]),
    "sub3": (3.17, [-1.45, -0.77, -0.23, 0.24, 1.04, 1.18, 1.54, 2.02]),
    "sub4": (5.11, [None, -0.96, -0.45, 0.22, 0.92, 1.28, 1.50, 2.07]),
    "sub5": (3.18, [-2.00, -0.94, -0.42, 0.15, 0.67, 1.13, 1.72, 2.70]),
    "sub6": (3.57, [-0.93, -0.63, -0.10, 0.13, 0.46, 0.60, 1.04, 2.15]),
}
AROUSAL_ROWS = {
    "sub1": (3.77, [None, None, -2.17, -1.19, -0.51, -0.19, 0.29, 1.09]),
    "sub2": (1.18, [-3.33, -2.68, -1.67, -0.53, 0.07, 0.95, 1.72, 2.88]),
    "sub3": (2.65, [-2.67, -2.28, -1.25, -0.73, -0.32, 0.32, 0.73, 1.27]),
    "sub4": (2.78, [None, -2.69, -1.47, -1.35, -0.78, -0.18, 0.74, 1.70]),
    "sub5": (2.34, [None, -1.97, -1.29, -0.65, -0.06, 0.94, 1.57, None]),
    "sub6": (1.23, [-2.49, -1.79, None, -0.39, 0.07, 0.60, 1.23, 2.02]),
}


def published_model(rater: str, scale: str = "pleasant") -> GrmModel:
    """GrmModel from a published row.

    th_g sits just below grade g + 1, so a dash at th_g means grade g + 1 was
    never used. The lowest used grade is taken to be 1.
    """
    slope, row = (PLEASANT_ROWS if scale == "pleasant" else AROUSAL_ROWS)[rater]
    thresholds = tuple(t for t in row if t is not None)
    used = (1,) + tuple(g + 2 for g, t in enumerate(row) if t is not None)
    return GrmModel(rater, scale, slope, thresholds, used)


# Recovery design: slopes near 3 and six evenly spread thresholds on [-2, 2],
# nudged per rater so that no two raters share a boundary.
RECOVERY_SLOPES = (2.6, 2.8, 3.0, 3.0, 3.2, 3.4)


def recovery_config(n_items: int, seed: int = 0) -> synth.SynthConfig:
    base = np.linspace(-2.0, 2.0, 6)
    raters = tuple(synth.RaterParams(s, tuple(base + 0.04 * (r - 2.5))) for r, s in enumerate(RECOVERY_SLOPES))
    design = StudyDesign(n_raters=6, n_items=n_items)
    return synth.SynthConfig(design=design, pleasant_raters=raters, arousal_raters=raters, seed=seed)


def recovery_errors(truth, fitted) -> tuple[float, float]:
    """Worst relative slope error and worst absolute error over thresholds in [-2, 2]."""
    slope = max(abs(m.slope / t.slope - 1) for t, m in zip(truth, fitted))
    th = 0.0
    for t, m in zip(truth, fitted):
        if tuple(m.used_categories) != tuple(t.used_categories):
            return slope, float("inf")
        inside = np.abs(t.thresholds) <= 2 + 1e-9
        th = max(th, float(np.max(np.abs(m.thresholds - t.thresholds)[inside])))
    return slope, th


def reference_pairs():
    true, pred = [], []
    for i in range(4):
        for j in range(4):
            true += [i + 1] * REFERENCE_CONFUSION[i, j]
            pred += [j + 1] * REFERENCE_CONFUSION[i, j]
    return np.array(true), np.array(pred)


@pytest.fixture
def small_design():
    return StudyDesign(n_raters=3, n_items=4, n_trials=2)


@pytest.fixture
def small_ratings(small_design):
    pleasant = np.array([[1, 5, 9], [2, 6, 8], [3, 7, 7], [4, 4, 6]])
    arousal = np.array([[9, 1, 5], [8, 2, 5], [7, 3, 5], [6, 4, 5]])
    return RatingMatrix(small_design, ("sub1", "sub2", "sub3"), ("1", "2", "3", "4"), pleasant, arousal)


@pytest.fixture
def small_recording():
    rng = np.random.default_rng(3)
    fs = 400.0
    x = rng.standard_normal((3, 2000))
    events = ((100, "1", 1), (500, "2", 1), (900, "1", 2), (1300, "2", 2))
    return Recording("sub1", fs, ("Fz", "Cz", "Oz"), x, events)


@pytest.fixture(scope="session")
def default_study():
    cfg = synth.SynthConfig(seed=11)
    ratings, latents = synth.gen_ratings(cfg)
    return cfg, ratings, latents


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for key in sorted(results, key=lambda k: int(k.split()[-1])):
            terminalreporter.write_line(results[key])
