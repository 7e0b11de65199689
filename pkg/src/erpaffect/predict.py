"""Models linking scalp-potential features to ratings and sensitivities.

Ordinal levels are predicted with one-vs-rest ridge logistic regression
(argmax over member probabilities) and evaluated leave-one-subject-out.
Continuous sensitivities use forward stepwise least squares under AIC.
"""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol, Sequence

import numpy as np
from scipy import special, stats

from .core import FeatureKey

__all__ = [
    "LogisticModel",
    "OneVsRestClassifier",
    "SensitivityRegressor",
    "ConfusionMatrix",
    "LosoResult",
    "Comparison",
    "EmotionSummary",
    "fit_logistic",
    "fit_ovr",
    "predict",
    "ovr_trainer",
    "ConstantPredictor",
    "loso",
    "stepwise_select",
    "predict_sensitivity",
    "compare",
    "accuracy",
    "chance_accuracy",
    "majority_rate",
    "binomial_band",
    "rank_correlation",
    "emotion_profile",
]

log = logging.getLogger(__name__)

DEFAULT_RIDGE = 1e-3
_DEGENERATE_LOGIT = 30.0


# --------------------------------------------------------------------------
# Logistic regression
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LogisticModel:
    intercept: float
    coefficients: np.ndarray
    keys: tuple[FeatureKey, ...] | None = None
    label: int | None = None
    ridge: float = DEFAULT_RIDGE
    converged: bool = True
    n_iter: int = 0
    degenerate: bool = False

    def __post_init__(self):
        b = np.asarray(self.coefficients, dtype=float)
        if not (np.isfinite(self.intercept) and np.all(np.isfinite(b))):
            raise ValueError("logistic coefficients must be finite")
        if self.keys is not None and len(self.keys) != len(b):
            raise ValueError("one key per coefficient required")
        object.__setattr__(self, "coefficients", b)

    def linear_predictor(self, X) -> np.ndarray:
        return self.intercept + np.asarray(X, dtype=float) @ self.coefficients

    def predict_proba(self, X) -> np.ndarray:
        return special.expit(self.linear_predictor(X))

    def to_dict(self) -> dict:
        return {
            "intercept": self.intercept,
            "coefficients": self.coefficients.tolist(),
            "label": self.label,
            "ridge": self.ridge,
            "converged": self.converged,
            "n_iter": self.n_iter,
            "degenerate": self.degenerate,
        }

    @classmethod
    def from_dict(cls, d: Mapping, keys=None) -> "LogisticModel":
        return cls(
            d["intercept"], np.asarray(d["coefficients"], float), keys, d.get("label"),
            d.get("ridge", DEFAULT_RIDGE), d.get("converged", True), d.get("n_iter", 0), d.get("degenerate", False),
        )


def _penalized_loglik(beta, X1, y, ridge):
    eta = X1 @ beta
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)) - 0.5 * ridge * beta[1:] @ beta[1:])


def fit_logistic(
    X,
    y,
    ridge: float = DEFAULT_RIDGE,
    max_iter: int = 100,
    tol: float = 1e-8,
    keys: Sequence[FeatureKey] | None = None,
    label: int | None = None,
) -> LogisticModel:
    """Ridge-penalised logistic regression by iteratively reweighted least squares.

    The intercept is not penalised. Converged once no coefficient moves by
    more than ``tol``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ValueError("X must be n x p with one label per row")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0/1")
    n1 = int(y.sum())
    if n1 == 0 or n1 == len(y):
        raise ValueError("all labels belong to one class; logistic fit is undefined")
    if min(n1, len(y) - n1) < 2:
        warnings.warn("fewer than 2 examples in one class", RuntimeWarning, stacklevel=2)

    n, p = X.shape
    X1 = np.column_stack([np.ones(n), X])
    pen = np.full(p + 1, ridge)
    pen[0] = 0.0
    beta = np.zeros(p + 1)
    beta[0] = np.log(n1 / (n - n1))
    f = _penalized_loglik(beta, X1, y, ridge)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        mu = special.expit(X1 @ beta)
        w = mu * (1 - mu)
        grad = X1.T @ (y - mu) - pen * beta
        hess = (X1.T * w) @ X1 + np.diag(pen) + 1e-12 * np.eye(p + 1)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        t = 1.0
        for _ in range(50):
            cand = beta + t * step
            fc = _penalized_loglik(cand, X1, y, ridge)
            if fc >= f - 1e-12 * abs(f):
                break
            t *= 0.5
        delta = np.max(np.abs(cand - beta))
        beta, f = cand, fc
        if delta < tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"IRLS did not converge in {max_iter} iterations", RuntimeWarning, stacklevel=2)
    return LogisticModel(float(beta[0]), beta[1:], None if keys is None else tuple(keys), label, ridge, converged, it)


# --------------------------------------------------------------------------
# One-vs-rest
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OneVsRestClassifier:
    levels: tuple[int, ...]
    members: tuple[LogisticModel, ...]
    mean: np.ndarray
    scale: np.ndarray
    keys: tuple[FeatureKey, ...] | None = None
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.levels) != len(self.members):
            raise ValueError("exactly one member per level")

    def standardize(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.scale

    def predict_proba(self, X) -> np.ndarray:
        Z = self.standardize(np.atleast_2d(X))
        return np.column_stack([m.predict_proba(Z) for m in self.members])

    def predict(self, X) -> np.ndarray:
        """Level with the highest member probability; ties go to the lower level."""
        return np.asarray(self.levels)[np.argmax(self.predict_proba(X), axis=1)]

    def to_dict(self) -> dict:
        return {
            "levels": list(self.levels),
            "members": [m.to_dict() for m in self.members],
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "features": None if self.keys is None else [k.label for k in self.keys],
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "OneVsRestClassifier":
        keys = None if d.get("features") is None else tuple(FeatureKey.parse(s) for s in d["features"])
        return cls(
            tuple(d["levels"]), tuple(LogisticModel.from_dict(m) for m in d["members"]),
            np.asarray(d["mean"], float), np.asarray(d["scale"], float), keys, tuple(d.get("flags", ())),
        )


def _standardization(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    return mean, np.where(sd > 0, sd, 1.0)


def fit_ovr(
    X,
    y,
    ridge: float = DEFAULT_RIDGE,
    levels: Sequence[int] | None = None,
    keys: Sequence[FeatureKey] | None = None,
) -> OneVsRestClassifier:
    """One binary ridge-logistic member per level on standardized features.

    A level missing from ``y`` gets a flagged member with probability ~0; a
    level that is the only one present gets probability ~1.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).ravel()
    levels = tuple(int(v) for v in (sorted(set(y.tolist())) if levels is None else levels))
    mean, scale = _standardization(X)
    Z = (X - mean) / scale
    members, flags = [], []
    present = set(y.tolist())
    if len(present) == 1:
        warnings.warn(f"only level {present.pop()} in training data; predictor is constant", RuntimeWarning, stacklevel=2)
    zeros = np.zeros(X.shape[1])
    for lv in levels:
        yy = (y == lv).astype(float)
        if yy.sum() == 0 or yy.sum() == len(yy):
            sign = -1.0 if yy.sum() == 0 else 1.0
            flags.append(f"level {lv} {'absent from' if sign < 0 else 'is all of'} training data")
            members.append(LogisticModel(sign * _DEGENERATE_LOGIT, zeros, None, lv, ridge, True, 0, True))
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                m = fit_logistic(Z, yy, ridge, label=lv)
            if not m.converged:
                flags.append(f"level {lv} member did not converge")
            members.append(m)
    return OneVsRestClassifier(levels, tuple(members), mean, scale, None if keys is None else tuple(keys), tuple(flags))


def predict(clf: OneVsRestClassifier, x) -> tuple[np.ndarray, np.ndarray]:
    """(levels, member probabilities) for each row of ``x``."""
    proba = clf.predict_proba(x)
    return np.asarray(clf.levels)[np.argmax(proba, axis=1)], proba


class Predictor(Protocol):
    def predict(self, X) -> np.ndarray: ...


@dataclass(frozen=True)
class ConstantPredictor:
    level: int

    def predict(self, X) -> np.ndarray:
        return np.full(len(np.atleast_2d(X)), self.level)


def ovr_trainer(ridge: float = DEFAULT_RIDGE, levels: Sequence[int] | None = None) -> Callable:
    def train(X, y):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return fit_ovr(X, y, ridge, levels)

    return train


# --------------------------------------------------------------------------
# Leave-one-subject-out
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Counts with rows = true level, columns = predicted level."""

    levels: tuple[int, ...]
    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.shape != (len(self.levels), len(self.levels)) or np.any(c < 0) or not np.issubdtype(c.dtype, np.integer):
            raise ValueError("confusion counts must be a non-negative integer K x K matrix")
        object.__setattr__(self, "counts", c.astype(np.int64))

    @classmethod
    def from_pairs(cls, true, pred, levels: Sequence[int]) -> "ConfusionMatrix":
        idx = {lv: k for k, lv in enumerate(levels)}
        c = np.zeros((len(levels), len(levels)), dtype=np.int64)
        for t, p in zip(np.asarray(true).tolist(), np.asarray(pred).tolist()):
            c[idx[t], idx[p]] += 1
        return cls(tuple(levels), c)

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if self.levels != other.levels:
            raise ValueError("levels differ")
        return ConfusionMatrix(self.levels, self.counts + other.counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def truth_counts(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def predicted_counts(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Expand counts back to (true, predicted) level pairs."""
        lv = np.asarray(self.levels)
        ti, pi = np.nonzero(self.counts)
        reps = self.counts[ti, pi]
        return np.repeat(lv[ti], reps), np.repeat(lv[pi], reps)

    def to_dict(self) -> dict:
        return {"levels": list(self.levels), "counts": self.counts.tolist()}


def accuracy(cm: ConfusionMatrix) -> float:
    return float(np.trace(cm.counts) / cm.total)


def majority_rate(cm: ConfusionMatrix) -> float:
    return float(cm.truth_counts.max() / cm.total)


def chance_accuracy(cm: ConfusionMatrix) -> float:
    """Expected accuracy of predictions independent of the truth, given both marginals."""
    n = cm.total
    return float(cm.truth_counts @ cm.predicted_counts / n**2)


def binomial_band(p0: float, n: int, z: float = 1.96) -> tuple[float, float]:
    half = z * np.sqrt(p0 * (1 - p0) / n)
    return max(0.0, p0 - half), min(1.0, p0 + half)


@dataclass(frozen=True, eq=False)
class LosoResult:
    raters: tuple[str, ...]
    accuracies: np.ndarray
    folds: tuple[ConfusionMatrix, ...]
    confusion: ConfusionMatrix
    flags: dict

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def sd_accuracy(self) -> float:
        return float(np.std(self.accuracies, ddof=1)) if len(self.accuracies) > 1 else 0.0

    @property
    def pooled_accuracy(self) -> float:
        return accuracy(self.confusion)

    @property
    def fold_chance_accuracy(self) -> float:
        """Expected pooled accuracy if every fold's predictions ignored its truth.

        Differs from :func:`chance_accuracy` of the pooled matrix when raters
        use the levels in different proportions.
        """
        hits = sum(float(cm.truth_counts @ cm.predicted_counts) / cm.total for cm in self.folds if cm.total)
        return hits / self.confusion.total

    def to_dict(self) -> dict:
        t, p = self.confusion.pairs()
        return {
            "raters": list(self.raters),
            "accuracies": self.accuracies.tolist(),
            "mean_accuracy": self.mean_accuracy,
            "sd_accuracy": self.sd_accuracy,
            "pooled_accuracy": self.pooled_accuracy,
            "rank_correlation": rank_correlation(t, p) if len(set(t.tolist())) > 1 and len(set(p.tolist())) > 1 else None,
            "chance_accuracy": chance_accuracy(self.confusion),
            "fold_chance_accuracy": self.fold_chance_accuracy,
            "confusion": self.confusion.to_dict(),
            "fold_confusions": {r: f.to_dict() for r, f in zip(self.raters, self.folds)},
            "flags": self.flags,
        }


def loso(
    dataset: Mapping[str, tuple[np.ndarray, np.ndarray]],
    trainer: Callable[[np.ndarray, np.ndarray], Predictor],
    levels: Sequence[int] | None = None,
    jobs: int = 1,
) -> LosoResult:
    """Hold out each rater in turn, train on the rest and score the held-out rater."""
    raters = tuple(dataset)
    if len(raters) < 2:
        raise ValueError("leave-one-subject-out needs at least 2 raters")
    if levels is None:
        levels = sorted(set(np.concatenate([np.asarray(dataset[r][1]) for r in raters]).tolist()))
    levels = tuple(int(v) for v in levels)

    def fold(r):
        Xtr = np.vstack([dataset[o][0] for o in raters if o != r])
        ytr = np.concatenate([np.asarray(dataset[o][1]) for o in raters if o != r])
        missing = sorted(set(levels) - set(ytr.tolist()))
        model = trainer(Xtr, ytr)
        Xte, yte = dataset[r]
        pred = model.predict(Xte)
        return ConfusionMatrix.from_pairs(yte, pred, levels), missing

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(fold, raters))
    else:
        results = [fold(r) for r in raters]

    folds = tuple(cm for cm, _ in results)
    flags = {r: f"training data lacks level(s) {m}" for r, (_, m) in zip(raters, results) if m}
    pooled = folds[0]
    for cm in folds[1:]:
        pooled = pooled + cm
    return LosoResult(raters, np.array([accuracy(cm) for cm in folds]), folds, pooled, flags)


# --------------------------------------------------------------------------
# Stepwise regression of sensitivities
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SensitivityRegressor:
    """Least-squares model on a forward-selected feature subset (standardized inputs)."""

    intercept: float
    coefficients: np.ndarray
    selected: tuple[int, ...]
    mean: np.ndarray
    scale: np.ndarray
    r_squared: float
    trace: tuple[tuple[int, float], ...]
    base_aic: float
    keys: tuple[FeatureKey, ...] | None = None
    link: str = "identity"
    link_bounds: tuple[float, float] | None = None
    skipped: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.r_squared <= 1.0:
            raise ValueError("r_squared must lie in [0, 1]")

    @property
    def selected_keys(self) -> list[FeatureKey] | None:
        return None if self.keys is None else [self.keys[j] for j in self.selected]

    @property
    def aic_trace(self) -> list[float]:
        return [self.base_aic] + [a for _, a in self.trace]

    def to_dict(self) -> dict:
        sel = self.selected_keys
        return {
            "intercept": self.intercept,
            "coefficients": self.coefficients.tolist(),
            "selected": list(self.selected),
            "selected_features": None if sel is None else [k.label for k in sel],
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "r_squared": self.r_squared,
            "aic_trace": self.aic_trace,
            "features": None if self.keys is None else [k.label for k in self.keys],
            "link": self.link,
            "link_bounds": self.link_bounds,
            "skipped": list(self.skipped),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SensitivityRegressor":
        keys = None if d.get("features") is None else tuple(FeatureKey.parse(s) for s in d["features"])
        aic = d["aic_trace"]
        return cls(
            d["intercept"], np.asarray(d["coefficients"], float), tuple(d["selected"]),
            np.asarray(d["mean"], float), np.asarray(d["scale"], float), d["r_squared"],
            tuple(zip(d["selected"], aic[1:])), aic[0], keys, d.get("link", "identity"),
            None if d.get("link_bounds") is None else tuple(d["link_bounds"]), tuple(d.get("skipped", ())),
        )


def _ols_rss(Z: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    A = np.column_stack([np.ones(len(y)), Z])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return coef, float(resid @ resid)


def _aic(rss: float, n: int, k: int, tss: float) -> float:
    return n * np.log(max(rss, 1e-300 + 1e-15 * tss) / n) + 2 * (k + 1)


def stepwise_select(
    X,
    y,
    keys: Sequence[FeatureKey] | None = None,
    criterion: str = "aic",
    cap: int = 10,
    guard_alpha: float | None = 0.05,
    link: str = "identity",
) -> SensitivityRegressor:
    """Forward selection from the empty model.

    Each step adds the feature whose least-squares fit has the lowest AIC and
    stops when no candidate lowers AIC or ``cap`` features are in. With
    ``guard_alpha`` set, the chosen feature must also pass a partial F-test at
    ``guard_alpha / n_candidates``; without that guard, forward AIC over many
    pure-noise candidates keeps admitting features up to the cap.

    ``link="logistic"`` fits on the logit of the target rescaled into (0, 1)
    and maps predictions back through the inverse logit.
    """
    if criterion.lower() != "aic":
        raise ValueError("only the AIC criterion is implemented")
    X = np.asarray(X, dtype=float)
    y_raw = np.asarray(y, dtype=float).ravel()
    n, p = X.shape
    if n < 10:
        raise ValueError("stepwise selection needs at least 10 observations")
    if len(y_raw) != n:
        raise ValueError("one target per row required")

    bounds = None
    if link == "logistic":
        lo, hi = y_raw.min(), y_raw.max()
        pad = 0.05 * (hi - lo) if hi > lo else 1.0
        bounds = (float(lo - pad), float(hi + pad))
        y = special.logit((y_raw - bounds[0]) / (bounds[1] - bounds[0]))
    elif link == "identity":
        y = y_raw
    else:
        raise ValueError(f"unknown link {link!r}")

    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    skipped = tuple(int(j) for j in np.flatnonzero(sd <= 1e-12 * np.maximum(1.0, np.abs(mean))))
    if skipped:
        log.info("skipping %d zero-variance feature(s)", len(skipped))
    scale = np.where(sd > 0, sd, 1.0)
    Z = (X - mean) / scale

    tss = float(((y - y.mean()) ** 2).sum())
    selected: list[int] = []
    trace: list[tuple[int, float]] = []
    base_aic = _aic(tss, n, 0, tss) if tss > 0 else 0.0
    current_aic, current_rss = base_aic, tss
    candidates = [j for j in range(p) if j not in skipped]

    while tss > 0 and len(selected) < cap and candidates:
        best = None
        for j in candidates:
            _, rss = _ols_rss(Z[:, selected + [j]], y)
            aic = _aic(rss, n, len(selected) + 1, tss)
            if best is None or aic < best[1] - 1e-12:
                best = (j, aic, rss)
        j, aic, rss = best
        if not aic < current_aic:
            break
        if guard_alpha is not None:
            dof = n - len(selected) - 2
            if dof <= 0:
                break
            f = (current_rss - rss) / max(rss / dof, 1e-300)
            pval = stats.f.sf(f, 1, dof)
            if not pval < guard_alpha / len(candidates):
                break
        selected.append(j)
        candidates.remove(j)
        trace.append((j, float(aic)))
        current_aic, current_rss = aic, rss

    coef, rss = _ols_rss(Z[:, selected], y)
    reg = SensitivityRegressor(
        float(coef[0]), coef[1:], tuple(selected), mean, scale, 0.0, tuple(trace), float(base_aic),
        None if keys is None else tuple(keys), link, bounds, skipped,
    )
    if tss > 0:
        fitted = predict_sensitivity(reg, X)
        r2 = 1.0 - float(((y_raw - fitted) ** 2).sum()) / float(((y_raw - y_raw.mean()) ** 2).sum())
        object.__setattr__(reg, "r_squared", float(np.clip(r2, 0.0, 1.0)))
    return reg


def predict_sensitivity(reg: SensitivityRegressor, X) -> np.ndarray:
    Z = (np.atleast_2d(np.asarray(X, dtype=float)) - reg.mean) / reg.scale
    t = reg.intercept + Z[:, list(reg.selected)] @ reg.coefficients
    if reg.link == "logistic":
        lo, hi = reg.link_bounds
        return lo + (hi - lo) * special.expit(t)
    return t


@dataclass(frozen=True)
class Comparison:
    pearson_r: float
    measured_range: tuple[float, float]
    predicted_range: tuple[float, float]

    def to_dict(self) -> dict:
        return {"pearson_r": self.pearson_r, "measured_range": list(self.measured_range), "predicted_range": list(self.predicted_range)}


def compare(measured, predicted) -> Comparison:
    m = np.asarray(measured, dtype=float)
    p = np.asarray(predicted, dtype=float)
    r = float(np.corrcoef(m, p)[0, 1]) if np.std(m) > 0 and np.std(p) > 0 else float("nan")
    return Comparison(r, (float(m.min()), float(m.max())), (float(p.min()), float(p.max())))


# --------------------------------------------------------------------------
# Ordinal and profile metrics
# --------------------------------------------------------------------------


def rank_correlation(true, pred, method: str = "spearman") -> float:
    """Spearman's rho for ordinal pairs with tied values given their average rank.

    ``method="spearman"`` uses 1 - 6 sum(d^2) / (n (n^2 - 1)) on the average
    ranks; ``method="pearson"`` is the Pearson correlation of the average
    ranks, which additionally corrects the denominator for ties.
    """
    a = stats.rankdata(np.asarray(true, dtype=float))
    b = stats.rankdata(np.asarray(pred, dtype=float))
    n = len(a)
    if n != len(b) or n < 2:
        raise ValueError("need two equal-length sequences of at least 2 values")
    if method == "spearman":
        d = a - b
        return float(1.0 - 6.0 * (d @ d) / (n * (n * n - 1)))
    if method == "pearson":
        return float(np.corrcoef(a, b)[0, 1])
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class EmotionSummary:
    emotion: str
    n: int
    pleasant_mean: float
    pleasant_se: float
    arousal_mean: float
    arousal_se: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _se(v: np.ndarray) -> float:
    return float(np.std(v, ddof=1) / np.sqrt(len(v))) if len(v) > 1 else float("nan")


def emotion_profile(
    pleasant: Mapping[str, float],
    arousal: Mapping[str, float],
    emotions: Mapping[str, str],
    categories: Sequence[str] | None = None,
) -> list[EmotionSummary]:
    """Mean and standard error of per-photo scores within each emotion category."""
    if categories is None:
        categories = sorted(set(emotions.values()))
    out = []
    for emo in categories:
        items = [i for i, e in emotions.items() if e == emo and i in pleasant and i in arousal]
        if not items:
            raise ValueError(f"no scored photos for emotion {emo!r}")
        p = np.array([pleasant[i] for i in items])
        a = np.array([arousal[i] for i in items])
        out.append(EmotionSummary(emo, len(items), float(p.mean()), _se(p), float(a.mean()), _se(a)))
    return out
