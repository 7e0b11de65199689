"""Graded response model for per-rater Affect Grid behaviour.

Photos play the role of IRT "persons" (one latent sensitivity each, standard
normal prior) and raters play the role of IRT "items": every rater has one
slope and an increasing set of thresholds. The cumulative curve is

    P_i(x) = 1 / (1 + exp(-slope * (x - th_i)))

i.e. the probability of a grade above the i-th used boundary. Thresholds
increase, so P_i decreases in i and the category probabilities P_{i-1} - P_i
are non-negative.

Grades a rater never used are dropped before fitting; thresholds are labelled
with the original grade they sit above (``th_g`` separates grade g from the
next used grade), matching how unused grades show up as gaps in a parameter
table.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
from scipy import special, stats

from .core import GRADE_MAX, GRADE_MIN, RatingMatrix, check_scale

__all__ = [
    "GrmModel",
    "GrmFit",
    "SensitivityScore",
    "CategoryMap",
    "WaldResult",
    "DegenerateRaterError",
    "quadrature",
    "occ",
    "occ_complement",
    "crc",
    "log_crc",
    "category_index",
    "fit_grm",
    "fit_grm_em",
    "marginal_loglik",
    "wald_significance",
    "eap_score",
    "eap_scores",
    "category_masses",
    "merge_adjacent",
    "collapse_scale",
    "apply_map",
]

MAX_SLOPE = 30.0
QUAD_NODES = 41


class DegenerateRaterError(ValueError):
    """A rater used a single grade, so slope and thresholds are not identified."""


@dataclass(frozen=True, eq=False)
class GrmModel:
    """Fitted (or specified) GRM parameters for one rater on one scale.

    ``std_errors`` holds [slope, th_1, ..., th_{K-1}] and is ``None`` when not
    computed; entries are NaN when the information matrix was singular.
    """

    rater_id: str
    scale: str
    slope: float
    thresholds: np.ndarray
    used_categories: tuple[int, ...]
    std_errors: np.ndarray | None = None
    log_likelihood: float = float("nan")
    converged: bool = True
    n_iter: int = 0

    def __post_init__(self):
        th = np.array(self.thresholds, dtype=float).ravel()
        th.setflags(write=False)
        object.__setattr__(self, "thresholds", th)
        object.__setattr__(self, "used_categories", tuple(int(g) for g in self.used_categories))
        object.__setattr__(self, "slope", float(self.slope))
        if not self.slope > 0:
            raise ValueError(f"slope must be positive, got {self.slope}")
        if np.any(np.diff(th) <= 0):
            raise ValueError("thresholds must be strictly increasing")
        if len(th) != len(self.used_categories) - 1:
            raise ValueError("need exactly one threshold between consecutive used categories")
        if list(self.used_categories) != sorted(set(self.used_categories)):
            raise ValueError("used_categories must be strictly increasing")
        if self.std_errors is not None:
            se = np.array(self.std_errors, dtype=float)
            if se.shape != (len(th) + 1,):
                raise ValueError("std_errors must hold slope plus one entry per threshold")
            se.setflags(write=False)
            object.__setattr__(self, "std_errors", se)

    @property
    def n_categories(self) -> int:
        return len(self.used_categories)

    @property
    def threshold_labels(self) -> tuple[int, ...]:
        """Original grade g for each threshold, read as 'score higher than g'."""
        u = self.used_categories
        return tuple(u[j + 1] - 1 for j in range(len(u) - 1))

    @property
    def parameters(self) -> np.ndarray:
        return np.concatenate([[self.slope], self.thresholds])

    def to_dict(self) -> dict:
        return {
            "rater": self.rater_id,
            "scale": self.scale,
            "slope": self.slope,
            "thresholds": self.thresholds.tolist(),
            "threshold_labels": list(self.threshold_labels),
            "used_categories": list(self.used_categories),
            "std_errors": None if self.std_errors is None else self.std_errors.tolist(),
            "log_likelihood": self.log_likelihood,
            "converged": self.converged,
            "n_iter": self.n_iter,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "GrmModel":
        se = d.get("std_errors")
        if se is not None:
            se = [np.nan if v is None else v for v in se]
        ll = d.get("log_likelihood")
        return cls(
            rater_id=d["rater"],
            scale=d["scale"],
            slope=d["slope"],
            thresholds=d["thresholds"],
            used_categories=d["used_categories"],
            std_errors=se,
            log_likelihood=np.nan if ll is None else ll,
            converged=d.get("converged", True),
            n_iter=d.get("n_iter", 0),
        )


@lru_cache(maxsize=16)
def _quadrature(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.hermite_e.hermegauss(n)
    w = w / w.sum()
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def quadrature(n: int = QUAD_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Hermite nodes and weights for a standard normal density (weights sum to 1)."""
    if n < 5:
        raise ValueError("use at least 5 quadrature nodes")
    return _quadrature(int(n))


# --------------------------------------------------------------------------
# Response curves
# --------------------------------------------------------------------------


def _logits(slope: float, thresholds: np.ndarray, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return slope * (x[..., None] - thresholds)


def occ(model: GrmModel, x) -> np.ndarray:
    """Operating characteristic curves P_1..P_{K-1}: probability of a grade above each boundary."""
    return special.expit(_logits(model.slope, model.thresholds, x))


def occ_complement(model: GrmModel, x) -> np.ndarray:
    """1 - P_i evaluated without cancellation (accurate where P_i rounds to 1)."""
    return special.expit(-_logits(model.slope, model.thresholds, x))


def _log_category_probs(z: np.ndarray) -> np.ndarray:
    """log p_c for categories 0..m given boundary logits z (..., m), decreasing along the last axis.

    Uses  sig(z1) - sig(z2) = sig(z1) sig(-z2) (1 - exp(-(z1 - z2)))  for interior categories.
    """
    m = z.shape[-1]
    out = np.empty(z.shape[:-1] + (m + 1,))
    out[..., 0] = special.log_expit(-z[..., 0])
    out[..., m] = special.log_expit(z[..., m - 1])
    if m > 1:
        z1, z2 = z[..., :-1], z[..., 1:]
        delta = z1 - z2
        out[..., 1:m] = special.log_expit(z1) + special.log_expit(-z2) + np.log(-np.expm1(-delta))
    return out


def log_crc(model: GrmModel, x) -> np.ndarray:
    return _log_category_probs(_logits(model.slope, model.thresholds, x))


def crc(model: GrmModel, x) -> np.ndarray:
    """Category response curves: 1 - P_1, P_{i-1} - P_i, ..., P_{K-1} over the used categories."""
    return np.exp(log_crc(model, x))


def category_index(model: GrmModel, grade) -> np.ndarray:
    """Map original grades 1..9 to the model's compacted category index 0..K-1.

    A grade the rater never used falls into the category below the next boundary.
    """
    g = np.asarray(grade)
    if np.any((g < GRADE_MIN) | (g > GRADE_MAX)):
        raise ValueError("grades must lie in 1..9")
    labels = np.asarray(model.threshold_labels)
    return np.sum(g[..., None] > labels, axis=-1)


# --------------------------------------------------------------------------
# EM estimation
# --------------------------------------------------------------------------


def _dlog_dz(z: np.ndarray, counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and (tridiagonal) Hessian of sum_c counts[..., c] log p_c with respect to z."""
    m = z.shape[-1]
    # d log p_c / d z_{c-1} (upper boundary) and d log p_c / d z_c (lower boundary)
    g = np.zeros(z.shape)
    h = np.zeros(z.shape + (m,))
    sp, sm = special.expit(z), special.expit(-z)
    curv = sp * sm

    # first and last categories
    g[..., 0] += -sp[..., 0] * counts[..., 0]
    h[..., 0, 0] += -curv[..., 0] * counts[..., 0]
    g[..., m - 1] += sm[..., m - 1] * counts[..., m]
    h[..., m - 1, m - 1] += -curv[..., m - 1] * counts[..., m]
    if m > 1:
        delta = z[..., :-1] - z[..., 1:]
        inv = 1.0 / np.expm1(delta)
        cross = 1.0 / (np.expm1(delta) * -np.expm1(-delta))
        n = counts[..., 1:m]
        idx = np.arange(m - 1)
        g[..., :-1] += n * (sm[..., :-1] + inv)
        g[..., 1:] += n * (-sp[..., 1:] - inv)
        h[..., idx, idx] += n * (-curv[..., :-1] - cross)
        h[..., idx + 1, idx + 1] += n * (-curv[..., 1:] - cross)
        h[..., idx, idx + 1] += n * cross
        h[..., idx + 1, idx] += n * cross
    return g, h


def _mstep_objective(theta: np.ndarray, nodes: np.ndarray, counts: np.ndarray) -> float:
    z = theta[0] * (nodes[:, None] - theta[1:])
    return float(np.sum(counts * _log_category_probs(z)))


def _grad_hess_theta(theta: np.ndarray, nodes: np.ndarray, counts: np.ndarray):
    """Gradient and Hessian of the expected complete-data log-likelihood in (slope, thresholds)."""
    a, b = theta[0], theta[1:]
    m = len(b)
    diff = nodes[:, None] - b  # (Q, m)
    z = a * diff
    gz, hz = _dlog_dz(z, counts)
    d = m + 1
    jz = np.zeros((len(nodes), m, d))
    jz[:, :, 0] = diff
    jz[:, np.arange(m), 1 + np.arange(m)] = -a
    grad = np.einsum("qi,qid->d", gz, jz)
    hess = np.einsum("qid,qij,qje->de", jz, hz, jz)
    # d2 z_i / (da db_i) = -1
    cross = -gz.sum(axis=0)
    hess[0, 1:] += cross
    hess[1:, 0] += cross
    return grad, hess


def _to_phi(theta: np.ndarray) -> np.ndarray:
    gaps = np.diff(theta[1:])
    # inverse softplus, stable for wide gaps
    return np.concatenate([[np.log(theta[0]), theta[1]], gaps + np.log(-np.expm1(-gaps))])


def _from_phi(phi: np.ndarray) -> np.ndarray:
    gaps = np.logaddexp(0.0, phi[2:])
    b = phi[1] + np.concatenate([[0.0], np.cumsum(gaps)])
    return np.concatenate([[np.exp(phi[0])], b])


def _grad_hess_phi(phi: np.ndarray, nodes: np.ndarray, counts: np.ndarray):
    theta = _from_phi(phi)
    g, h = _grad_hess_theta(theta, nodes, counts)
    d = len(theta)
    m = d - 1
    t = np.zeros((d, d))
    t[0, 0] = theta[0]
    sig = special.expit(phi[2:])
    for i in range(m):  # b_i = phi_1 + sum_{j<=i} softplus(phi_{j+1})
        t[1 + i, 1] = 1.0
        t[1 + i, 2 : 2 + i] = sig[:i]
    gp = t.T @ g
    hp = t.T @ h @ t
    hp[0, 0] += g[0] * theta[0]
    tail = np.cumsum(g[1:][::-1])[::-1]  # sum_{i>=j} dF/db_i
    hp[np.arange(2, d), np.arange(2, d)] += sig * (1 - sig) * tail[1:]
    return gp, hp


def _newton_mstep(
    theta: np.ndarray, nodes: np.ndarray, counts: np.ndarray, max_iter: int = 25, max_slope: float = np.inf
) -> np.ndarray:
    """Maximise the M-step objective by damped Newton steps in the constrained parameterisation.

    The slope is held at or below ``max_slope``; a rater who never crosses
    categories out of order otherwise drives it to infinity.
    """
    log_cap = np.log(max_slope)
    phi = _to_phi(theta)
    f = _mstep_objective(theta, nodes, counts)
    for _ in range(max_iter):
        g, h = _grad_hess_phi(phi, nodes, counts)
        if np.max(np.abs(g)) < 1e-9 * max(1.0, counts.sum()):
            break
        # shift the Hessian until it is negative definite
        top = np.linalg.eigvalsh(h).max()
        if top >= -1e-10:
            h = h - (top + 1e-6 * (1 + abs(top))) * np.eye(len(phi))
        step = -np.linalg.solve(h, g)
        lim = np.max(np.abs(step))
        if lim > 2.0:
            step *= 2.0 / lim
        t = 1.0
        improved = False
        for _ in range(40):
            cand = phi + t * step
            cand[0] = min(cand[0], log_cap)
            cth = _from_phi(cand)
            fc = _mstep_objective(cth, nodes, counts) if np.all(np.isfinite(cth)) else -np.inf
            if np.isfinite(fc) and fc > f and fc >= f + 1e-4 * (g @ (cand - phi)):
                improved = True
                break
            t *= 0.5
        if not improved:
            break
        gain = fc - f
        phi, f = cand, fc
        if gain < 1e-12 * max(1.0, abs(f)):
            break
    return _from_phi(phi)


def _rater_logp(theta: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """log p_c(x_q) table, shape (Q, K)."""
    return _log_category_probs(theta[0] * (nodes[:, None] - theta[1:]))


def _estep(thetas: Sequence[np.ndarray], y: np.ndarray, nodes: np.ndarray, log_w: np.ndarray):
    """Posterior node weights per photo and the marginal log-likelihood."""
    loglik = np.zeros((y.shape[0], len(nodes)))
    for r, th in enumerate(thetas):
        loglik += _rater_logp(th, nodes)[:, y[:, r]].T
    joint = loglik + log_w
    norm = special.logsumexp(joint, axis=1)
    post = np.exp(joint - norm[:, None])
    return post, float(norm.sum())


def _expected_counts(post: np.ndarray, y_r: np.ndarray, k: int) -> np.ndarray:
    onehot = np.zeros((len(y_r), k))
    onehot[np.arange(len(y_r)), y_r] = 1.0
    return post.T @ onehot  # (Q, K)


def _compact(grades: np.ndarray) -> tuple[np.ndarray, tuple[int, ...]]:
    used = tuple(int(g) for g in np.unique(grades))
    lookup = {g: k for k, g in enumerate(used)}
    return np.vectorize(lookup.__getitem__, otypes=[np.int64])(grades), used


def _initial_theta(y_r: np.ndarray, k: int, rest_mean: np.ndarray) -> np.ndarray:
    rho = np.corrcoef(y_r, rest_mean)[0, 1] if np.std(rest_mean) > 0 and np.std(y_r) > 0 else 0.5
    rho = float(np.clip(np.nan_to_num(rho, nan=0.5), 0.2, 0.95))
    slope = float(np.clip(1.702 * rho / np.sqrt(1 - rho**2), 0.3, 6.0))
    cum = np.cumsum(np.bincount(y_r, minlength=k))[:-1] / len(y_r)
    cum = np.clip(cum, 0.5 / len(y_r), 1 - 0.5 / len(y_r))
    b = stats.norm.ppf(cum) * np.sqrt(1 + (1.702 / slope) ** 2)
    for j in range(1, len(b)):
        b[j] = max(b[j], b[j - 1] + 0.05)
    return np.concatenate([[slope], b])


@dataclass(frozen=True, eq=False)
class GrmFit:
    """Result of EM estimation: fitted models plus the marginal log-likelihood trace."""

    models: list[GrmModel]
    loglik_history: np.ndarray
    converged: bool
    n_iter: int
    covariance: np.ndarray | None = field(default=None, repr=False)


def marginal_loglik(models: Sequence[GrmModel], grades: np.ndarray, n_nodes: int = QUAD_NODES) -> float:
    """Marginal log-likelihood of an (items x raters) grade matrix under fitted models."""
    nodes, w = quadrature(n_nodes)
    y = np.column_stack([category_index(m, grades[:, r]) for r, m in enumerate(models)])
    return _estep([m.parameters for m in models], y, nodes, np.log(w))[1]


def _score_vector(thetas, y, nodes, log_w) -> np.ndarray:
    """Gradient of the marginal log-likelihood (Fisher identity: posterior-weighted complete-data score)."""
    post, _ = _estep(thetas, y, nodes, log_w)
    parts = []
    for r, th in enumerate(thetas):
        counts = _expected_counts(post, y[:, r], len(th))
        parts.append(_grad_hess_theta(th, nodes, counts)[0])
    return np.concatenate(parts)


def _observed_covariance(thetas, y, nodes, log_w, h: float = 1e-5) -> np.ndarray | None:
    sizes = [len(t) for t in thetas]
    flat = np.concatenate(thetas)
    d = len(flat)

    def split(v):
        return np.split(v, np.cumsum(sizes)[:-1])

    hess = np.zeros((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = h * max(1.0, abs(flat[j]))
        gp = _score_vector(split(flat + e), y, nodes, log_w)
        gm = _score_vector(split(flat - e), y, nodes, log_w)
        hess[:, j] = (gp - gm) / (2 * e[j])
    info = -(hess + hess.T) / 2
    if not np.all(np.isfinite(info)):
        return None
    eig = np.linalg.eigvalsh(info)
    if eig.min() <= 1e-10 * max(1.0, eig.max()):
        return None
    return np.linalg.inv(info)


def fit_grm_em(
    grades: np.ndarray,
    rater_ids: Sequence[str],
    scale: str = "pleasant",
    quadrature_nodes: int = QUAD_NODES,
    max_em_iter: int = 500,
    tol: float = 1e-5,
    compute_se: bool = True,
    max_slope: float = MAX_SLOPE,
) -> GrmFit:
    """Marginal maximum likelihood for an (items x raters) grade matrix.

    E-step: Gauss-Hermite quadrature over each photo's latent sensitivity.
    M-step: per-rater Newton updates in (log slope, first threshold, log-softplus gaps).
    Stops once the marginal log-likelihood improves by less than ``tol``.
    Slopes are bounded by ``max_slope``: the likelihood of a rater whose
    grades are perfectly ordered keeps rising as the slope grows.
    """
    grades = np.asarray(grades)
    n_items, n_raters = grades.shape
    if n_items < 20:
        raise ValueError(f"need at least 20 photos to fit the GRM, got {n_items}")
    if len(rater_ids) != n_raters:
        raise ValueError("one rater id per column required")
    if np.any((grades < GRADE_MIN) | (grades > GRADE_MAX)):
        raise ValueError("grades must lie in 1..9")

    cols, used = [], []
    for r in range(n_raters):
        y_r, u = _compact(grades[:, r])
        if len(u) < 2:
            raise DegenerateRaterError(f"rater {rater_ids[r]} used a single grade ({u[0]}) on the {scale} scale")
        cols.append(y_r)
        used.append(u)
    y = np.column_stack(cols)

    nodes, w = quadrature(quadrature_nodes)
    log_w = np.log(w)
    total = grades.sum(axis=1)
    thetas = [
        _initial_theta(y[:, r], len(used[r]), (total - grades[:, r]) / max(1, n_raters - 1))
        for r in range(n_raters)
    ]
    for th in thetas:
        th[0] = min(th[0], max_slope)

    history = []
    converged = False
    it = 0
    for it in range(1, max_em_iter + 1):
        post, ll = _estep(thetas, y, nodes, log_w)
        history.append(ll)
        if len(history) > 1 and history[-1] - history[-2] < tol:
            converged = True
            break
        thetas = [
            _newton_mstep(thetas[r], nodes, _expected_counts(post, y[:, r], len(used[r])), max_slope=max_slope)
            for r in range(n_raters)
        ]
    else:
        _, ll = _estep(thetas, y, nodes, log_w)
        history.append(ll)

    if not converged:
        warnings.warn(f"GRM EM did not converge in {max_em_iter} iterations ({scale})", RuntimeWarning)

    cov = _observed_covariance(thetas, y, nodes, log_w) if compute_se else None
    offsets = np.cumsum([0] + [len(t) for t in thetas])
    models = []
    for r in range(n_raters):
        se = None
        if compute_se:
            se = np.full(len(thetas[r]), np.nan)
            if cov is not None:
                block = np.diag(cov)[offsets[r] : offsets[r + 1]]
                se = np.sqrt(np.where(block > 0, block, np.nan))
        models.append(
            GrmModel(
                rater_id=str(rater_ids[r]),
                scale=scale,
                slope=thetas[r][0],
                thresholds=thetas[r][1:],
                used_categories=used[r],
                std_errors=se,
                log_likelihood=history[-1],
                converged=converged,
                n_iter=it,
            )
        )
    return GrmFit(models, np.array(history), converged, it, cov)


def fit_grm(
    ratings: RatingMatrix,
    scale: str,
    quadrature_nodes: int = QUAD_NODES,
    max_em_iter: int = 500,
    tol: float = 1e-5,
    compute_se: bool = True,
    max_slope: float = MAX_SLOPE,
) -> list[GrmModel]:
    """Fit one GRM per rater on ``scale``; see :func:`fit_grm_em` for the estimator."""
    scale = check_scale(scale)
    fit = fit_grm_em(
        ratings.grades(scale), ratings.raters, scale, quadrature_nodes, max_em_iter, tol, compute_se, max_slope
    )
    return fit.models


# --------------------------------------------------------------------------
# Significance
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class WaldResult:
    labels: tuple[str, ...]
    estimates: tuple[float, ...]
    std_errors: tuple[float, ...]
    p_values: tuple[float | None, ...]
    alpha: float = 0.10

    @property
    def not_significant(self) -> tuple[bool | None, ...]:
        """True where p > alpha; None where the p-value is unavailable."""
        return tuple(None if p is None else p > self.alpha for p in self.p_values)


def wald_significance(model: GrmModel, alpha: float = 0.10) -> WaldResult:
    """Two-sided normal Wald tests of each parameter against zero."""
    labels = ("slope",) + tuple(f"th_{g}" for g in model.threshold_labels)
    est = model.parameters
    se = np.full(len(est), np.nan) if model.std_errors is None else model.std_errors
    pvals = []
    for e, s in zip(est, se):
        if not (np.isfinite(s) and s > 0):
            pvals.append(None)
        else:
            pvals.append(float(2 * stats.norm.sf(abs(e / s))))
    return WaldResult(labels, tuple(map(float, est)), tuple(map(float, se)), tuple(pvals), alpha)


# --------------------------------------------------------------------------
# Latent sensitivity scores
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SensitivityScore:
    item_id: str
    scale: str
    value: float
    posterior_sd: float

    def __post_init__(self):
        if not np.isfinite(self.value) or not self.posterior_sd > 0:
            raise ValueError("score must be finite with positive posterior sd")


def _posterior(models: Sequence[GrmModel], grades: np.ndarray, n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, w = quadrature(n_nodes)
    logpost = np.tile(np.log(w), (grades.shape[0], 1))
    for r, m in enumerate(models):
        logpost += log_crc(m, nodes)[:, category_index(m, grades[:, r])].T
    logpost -= special.logsumexp(logpost, axis=1, keepdims=True)
    return nodes, np.exp(logpost)


def eap_scores(
    models: Sequence[GrmModel], grades: np.ndarray, n_nodes: int = QUAD_NODES
) -> tuple[np.ndarray, np.ndarray]:
    """EAP estimates and posterior SDs for every row of an (items x raters) grade matrix."""
    grades = np.atleast_2d(np.asarray(grades))
    if grades.shape[1] != len(models):
        raise ValueError("one model per grade column required")
    nodes, post = _posterior(models, grades, n_nodes)
    mean = post @ nodes
    var = post @ nodes**2 - mean**2
    return mean, np.sqrt(np.maximum(var, 1e-300))


def eap_score(
    models: Sequence[GrmModel],
    responses: Mapping[str, int],
    item_id: str = "",
    n_nodes: int = QUAD_NODES,
) -> SensitivityScore:
    """Expected a-posteriori sensitivity of one photo from the raters' grades.

    ``responses`` maps rater id to the original 1..9 grade; raters without a
    response are skipped, but every responding rater needs a model.
    """
    if not responses:
        raise ValueError("no responses to score")
    by_id = {m.rater_id: m for m in models}
    missing = [r for r in responses if r not in by_id]
    if missing:
        raise KeyError(f"no fitted model for rater(s) {missing}")
    used = [by_id[r] for r in responses]
    scales = {m.scale for m in used}
    if len(scales) != 1:
        raise ValueError("models mix scales")
    grades = np.array([[responses[r] for r in responses]])
    mean, sd = eap_scores(used, grades, n_nodes)
    return SensitivityScore(item_id, scales.pop(), float(mean[0]), float(sd[0]))


# --------------------------------------------------------------------------
# Scale collapsing
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CategoryMap:
    """Maps original grades onto fewer levels via cut grades: level = 1 + #{cuts < grade}."""

    rater_id: str
    scale: str
    cuts: tuple[int, ...]
    blocks: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        cuts = tuple(int(c) for c in self.cuts)
        if list(cuts) != sorted(set(cuts)):
            raise ValueError("cuts must be strictly increasing")
        if cuts and (cuts[0] < GRADE_MIN or cuts[-1] >= GRADE_MAX):
            raise ValueError("cuts must lie in 1..8")
        object.__setattr__(self, "cuts", cuts)

    @property
    def n_levels(self) -> int:
        return len(self.cuts) + 1

    def to_dict(self) -> dict:
        return {"rater": self.rater_id, "scale": self.scale, "cuts": list(self.cuts), "blocks": [list(b) for b in self.blocks]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "CategoryMap":
        return cls(d["rater"], d["scale"], tuple(d["cuts"]), tuple(tuple(b) for b in d.get("blocks", ())))


def category_masses(model: GrmModel, n_nodes: int = QUAD_NODES) -> np.ndarray:
    """Prior mass of each used category: integral of its CRC against N(0, 1)."""
    nodes, w = quadrature(n_nodes)
    return w @ crc(model, nodes)


def merge_adjacent(masses: Sequence[float], target: int, tie_tol: float = 1e-12) -> list[list[int]]:
    """Greedily merge the adjacent pair with the smallest combined mass until ``target`` blocks remain.

    Pairs whose combined masses tie within ``tie_tol`` resolve to the leftmost.
    Returns blocks as lists of input indices.
    """
    if target < 2:
        raise ValueError("need at least 2 levels")
    blocks = [[k] for k in range(len(masses))]
    mass = [float(m) for m in masses]
    if target > len(blocks):
        raise ValueError(f"cannot form {target} levels from {len(blocks)} categories")
    while len(blocks) > target:
        pair = [mass[k] + mass[k + 1] for k in range(len(mass) - 1)]
        lo = min(pair)
        k = next(j for j, p in enumerate(pair) if p <= lo + tie_tol)
        blocks[k : k + 2] = [blocks[k] + blocks[k + 1]]
        mass[k : k + 2] = [mass[k] + mass[k + 1]]
    return blocks


def collapse_scale(model: GrmModel, target_levels: int = 4, n_nodes: int = QUAD_NODES) -> CategoryMap:
    """Reduce a rater's used categories to ``target_levels`` by merging low-mass neighbours."""
    if target_levels < 2:
        raise ValueError("target_levels must be at least 2")
    blocks = merge_adjacent(category_masses(model, n_nodes), target_levels)
    labels = model.threshold_labels
    u = model.used_categories
    cuts = tuple(labels[b[-1]] for b in blocks[:-1])
    return CategoryMap(model.rater_id, model.scale, cuts, tuple(tuple(u[k] for k in b) for b in blocks))


def apply_map(cmap: CategoryMap, grade) -> np.ndarray | int:
    """Level 1..n_levels for each original grade."""
    g = np.asarray(grade)
    if np.any((g < GRADE_MIN) | (g > GRADE_MAX)):
        raise ValueError(f"grade(s) outside 1..9: {g}")
    level = 1 + np.sum(g[..., None] > np.asarray(cmap.cuts), axis=-1)
    return int(level) if np.ndim(level) == 0 else level
