"""Fixed-effects panel OLS with entity-clustered standard errors.

The estimator sweeps fixed effects out of the outcome and regressors
(one-way demeaning, or alternating demeaning for two-way effects), solves
the remaining least-squares problem by pivoted QR, and computes a
cluster-robust sandwich covariance with the small-sample factor
``G/(G-1) * (N-1)/(N-K)`` and ``G-1`` degrees of freedom.

``K`` counts the columns of the transformed design (regressors, plus the
intercept when no fixed effect absorbs it); absorbed fixed effects are not
counted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd
import scipy.linalg as sla
from scipy import stats

from .panel import panel_frame

FE_DIMENSIONS = ("group", "time")
DEPENDENTS = ("sentiment_total", "article_count", "sentiment_mean")
CLUSTERS = ("entity", "company", "source")

DEMEAN_TOL = 1e-10
MAX_SWEEPS = 10_000
# A regressor whose norm shrinks by more than this factor under the within
# transformation is treated as absorbed by the fixed effects.
ABSORBED_RATIO = 1e-8


class SingularDesignError(ValueError):
    def __init__(self, columns: Sequence[str], reason: str = "collinear"):
        self.columns = list(columns)
        super().__init__(f"singular design: {reason} column(s) {', '.join(self.columns)}")


class ConvergenceError(RuntimeError):
    pass


def ols(y, X, names: Sequence[str] | None = None, rtol: float | None = None) -> np.ndarray:
    """Least-squares coefficients of ``y`` on the columns of ``X``.

    Uses column-pivoted QR. A column whose pivot falls below
    ``rtol * |R[0, 0]|`` is reported as collinear with the others.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    names = list(names) if names is not None else [f"x{i}" for i in range(k)]
    if n < k:
        raise SingularDesignError(names, f"{n} observations for {k}")
    Q, R, piv = sla.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if rtol is None:
        rtol = max(n, k) * np.finfo(float).eps
    rank = int(np.sum(diag > rtol * diag[0])) if diag.size and diag[0] > 0 else 0
    if rank < k:
        raise SingularDesignError([names[i] for i in sorted(piv[rank:])])
    beta = np.empty(k)
    beta[piv] = sla.solve_triangular(R, Q.T @ y)
    return beta


def _group_means(M: np.ndarray, codes: np.ndarray, n_groups: int) -> np.ndarray:
    counts = np.bincount(codes, minlength=n_groups).astype(float)
    sums = np.column_stack([np.bincount(codes, weights=M[:, j], minlength=n_groups)
                            for j in range(M.shape[1])])
    return sums / counts[:, None]


def demean(M, groupings: Sequence[np.ndarray], tol: float = DEMEAN_TOL,
           max_sweeps: int = MAX_SWEEPS) -> tuple[np.ndarray, int]:
    """Project the columns of ``M`` off the dummies of every grouping.

    ``groupings`` holds one integer code array per fixed-effect dimension.
    With one dimension this is plain group demeaning. With several, the
    demeaning is alternated until no entry moves by ``tol`` or more in a
    full sweep. Returns the transformed matrix and the sweeps used.
    """
    M = np.array(M, dtype=float, copy=True)
    squeeze = M.ndim == 1
    if squeeze:
        M = M[:, None]
    sizes = []
    for codes in groupings:
        codes = np.asarray(codes)
        if codes.shape[0] != M.shape[0]:
            raise ValueError("grouping length does not match the data")
        sizes.append(int(codes.max()) + 1 if codes.size else 0)
    if not groupings:
        return (M[:, 0] if squeeze else M), 0
    if len(groupings) == 1:
        M -= _group_means(M, groupings[0], sizes[0])[groupings[0]]
        return (M[:, 0] if squeeze else M), 1

    for sweep in range(1, max_sweeps + 1):
        before = M.copy()
        for codes, size in zip(groupings, sizes):
            M -= _group_means(M, codes, size)[codes]
        change = float(np.max(np.abs(M - before))) if M.size else 0.0
        if change < tol:
            return (M[:, 0] if squeeze else M), sweep
    raise ConvergenceError(f"demeaning did not converge in {max_sweeps} sweeps "
                           f"(last max change {change:.3g}, tol {tol:.1g})")


def within_transform(panel, fixed_effects: Iterable[str], columns: Sequence[str],
                     tol: float = DEMEAN_TOL, max_sweeps: int = MAX_SWEEPS) -> pd.DataFrame:
    """Demean ``columns`` of a panel by the requested fixed effects.

    ``group`` is the (entity, source) pair and ``time`` the period.
    """
    df = panel_frame(panel)
    groupings = [_fe_codes(df, fe) for fe in _check_fe(fixed_effects)]
    M, _ = demean(df[list(columns)].to_numpy(dtype=float), groupings, tol, max_sweeps)
    return pd.DataFrame(M, columns=list(columns), index=df.index)


def _check_fe(fixed_effects: Iterable[str]) -> tuple[str, ...]:
    fes = tuple(fe for fe in FE_DIMENSIONS if fe in set(fixed_effects))
    unknown = set(fixed_effects) - set(FE_DIMENSIONS)
    if unknown:
        raise ValueError(f"unknown fixed effects {sorted(unknown)}")
    return fes


def _fe_codes(df: pd.DataFrame, fe: str) -> np.ndarray:
    if fe == "group":
        key = df["entity"].astype(str) + "\x1f" + df["source"].astype(str)
    else:
        key = df["period"].astype(str)
    return pd.factorize(key, sort=True)[0]


def _cluster_codes(df: pd.DataFrame, cluster_by: str) -> np.ndarray:
    if cluster_by == "entity":
        return _fe_codes(df, "group")
    if cluster_by == "company":
        return pd.factorize(df["entity"].astype(str), sort=True)[0]
    if cluster_by == "source":
        return pd.factorize(df["source"].astype(str), sort=True)[0]
    raise ValueError(f"unknown cluster variable {cluster_by!r}")


def _bread(X: np.ndarray) -> np.ndarray:
    R = np.linalg.qr(X, mode="r")
    Rinv = sla.solve_triangular(R, np.eye(R.shape[0]))
    return Rinv @ Rinv.T


def cluster_covariance(X, residuals, clusters) -> tuple[np.ndarray, int]:
    """Cluster-robust covariance and the number of clusters."""
    X = np.asarray(X, dtype=float)
    u = np.asarray(residuals, dtype=float)
    codes, uniques = pd.factorize(np.asarray(clusters), sort=True)
    G = len(uniques)
    if G < 2:
        raise ValueError("clustered standard errors need at least 2 clusters; "
                         "use robust_se for heteroskedasticity-robust errors instead")
    n, k = X.shape
    scores = X * u[:, None]
    S = np.column_stack([np.bincount(codes, weights=scores[:, j], minlength=G) for j in range(k)])
    bread = _bread(X)
    factor = G / (G - 1) * (n - 1) / (n - k)
    return factor * bread @ (S.T @ S) @ bread, G


def clustered_se(X, residuals, clusters) -> np.ndarray:
    cov, _ = cluster_covariance(X, residuals, clusters)
    return np.sqrt(np.diag(cov))


def robust_se(X, residuals) -> np.ndarray:
    """Heteroskedasticity-robust (HC1) standard errors."""
    X = np.asarray(X, dtype=float)
    u = np.asarray(residuals, dtype=float)
    n, k = X.shape
    bread = _bread(X)
    meat = (X * (u ** 2)[:, None]).T @ X
    return np.sqrt(np.diag(n / (n - k) * bread @ meat @ bread))


def classical_se(X, residuals) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    u = np.asarray(residuals, dtype=float)
    n, k = X.shape
    return np.sqrt(np.diag(_bread(X)) * (u @ u) / (n - k))


def stars(p: float) -> str:
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


@dataclass(frozen=True)
class RegressionSpec:
    dependent: str = "sentiment_total"
    regressors: tuple[str, ...] = ("weighted_ad_ratio",)
    fixed_effects: frozenset[str] = frozenset()
    cluster_by: str = "entity"
    tol: float = DEMEAN_TOL
    max_sweeps: int = MAX_SWEEPS

    def __post_init__(self):
        object.__setattr__(self, "fixed_effects", frozenset(self.fixed_effects))
        object.__setattr__(self, "regressors", tuple(self.regressors))
        if self.dependent not in DEPENDENTS:
            raise ValueError(f"dependent must be one of {DEPENDENTS}")
        if not self.regressors:
            raise ValueError("at least one regressor is required")
        bad = set(self.regressors) - {"weighted_ad_ratio", "popularity"}
        if bad:
            raise ValueError(f"unknown regressors {sorted(bad)}")
        _check_fe(self.fixed_effects)
        if self.cluster_by not in CLUSTERS:
            raise ValueError(f"cluster_by must be one of {CLUSTERS}")

    @classmethod
    def from_flags(cls, dep: str, fe: str, popularity: bool = False, cluster: str = "entity") -> "RegressionSpec":
        """Build a spec from CLI-style flags: dep sentiment|count|mean, fe none|group|time|both."""
        dependent = {"sentiment": "sentiment_total", "count": "article_count",
                     "mean": "sentiment_mean"}.get(dep, dep)
        effects = {"none": (), "group": ("group",), "time": ("time",),
                   "both": ("group", "time")}
        if fe not in effects:
            raise ValueError(f"fe must be one of {sorted(effects)}")
        regs = ("weighted_ad_ratio", "popularity") if popularity else ("weighted_ad_ratio",)
        return cls(dependent, regs, frozenset(effects[fe]), cluster)


@dataclass(frozen=True)
class Coefficient:
    coef: float
    se: float
    t: float
    p: float
    stars: str

    def to_json(self) -> dict:
        return {"coef": self.coef, "se": self.se, "t": self.t, "p": self.p, "stars": self.stars}


@dataclass(frozen=True)
class RegressionResult:
    dependent: str
    fixed_effects: tuple[str, ...]
    cluster_by: str
    coefficients: Mapping[str, Coefficient]
    intercept: Coefficient | None
    r_squared: float
    entity_count: int
    period_count: int
    n_obs: int
    cluster_count: int
    excluded: int = 0
    sweeps: int = 0
    residuals: np.ndarray = field(default=None, repr=False, compare=False)

    def __getitem__(self, name: str) -> Coefficient:
        return self.coefficients[name]

    def to_json(self) -> dict:
        return {
            "dependent": self.dependent,
            "fixed_effects": list(self.fixed_effects),
            "cluster_by": self.cluster_by,
            "coefficients": {k: v.to_json() for k, v in self.coefficients.items()},
            "intercept": None if self.intercept is None else self.intercept.to_json(),
            "r_squared": self.r_squared,
            "entity_count": self.entity_count,
            "period_count": self.period_count,
            "n_obs": self.n_obs,
            "cluster_count": self.cluster_count,
            "excluded": self.excluded,
        }


def design(spec: RegressionSpec, panel) -> tuple[pd.DataFrame, np.ndarray, np.ndarray, list[str], int]:
    """Sorted estimation sample, outcome, raw design matrix, column names, rows dropped."""
    df = panel_frame(panel)
    df = df.sort_values(["entity", "source", "period"], kind="mergesort", ignore_index=True)
    n0 = len(df)
    if spec.dependent == "sentiment_mean":
        df = df[df["article_count"] > 0].reset_index(drop=True)
        y = (df["sentiment_total"] / df["article_count"]).to_numpy(dtype=float)
    else:
        df = df[df[spec.dependent].notna()].reset_index(drop=True)
        y = df[spec.dependent].to_numpy(dtype=float)
    for reg in spec.regressors:
        keep = df[reg].notna().to_numpy()
        df, y = df[keep].reset_index(drop=True), y[keep]
    names = list(spec.regressors)
    X = df[names].to_numpy(dtype=float)
    if not spec.fixed_effects:
        X = np.column_stack([np.ones(len(df)), X])
        names = ["intercept", *names]
    return df, y, X, names, n0 - len(df)


def fit(spec: RegressionSpec, panel) -> RegressionResult:
    """Within-transform per ``spec``, solve OLS, and attach clustered inference."""
    df, y, X, names, excluded = design(spec, panel)
    if len(df) == 0:
        raise ValueError("no observations left to estimate on")
    groupings = [_fe_codes(df, fe) for fe in _check_fe(spec.fixed_effects)]
    M, sweeps = demean(np.column_stack([y, X]), groupings, spec.tol, spec.max_sweeps)
    yt, Xt = M[:, 0], M[:, 1:]

    if groupings:
        raw = np.linalg.norm(X, axis=0)
        kept = np.linalg.norm(Xt, axis=0)
        absorbed = [n for n, a, b in zip(names, raw, kept) if a == 0 or b <= ABSORBED_RATIO * a]
        if absorbed:
            raise SingularDesignError(absorbed, "absorbed by fixed effects:")

    beta = ols(yt, Xt, names)
    resid = yt - Xt @ beta
    cov, G = cluster_covariance(Xt, resid, _cluster_codes(df, spec.cluster_by))
    se = np.sqrt(np.diag(cov))
    coefs = {}
    for name, b, s in zip(names, beta, se):
        t = b / s if s > 0 else math.copysign(math.inf, b) if b else math.nan
        p = float(2 * stats.t.sf(abs(t), G - 1)) if not math.isnan(t) else math.nan
        coefs[name] = Coefficient(float(b), float(s), float(t), p, stars(p) if not math.isnan(p) else "")
    intercept = coefs.pop("intercept", None)

    centered = yt - yt.mean()
    sst = float(centered @ centered)
    r2 = 1.0 - float(resid @ resid) / sst if sst > 0 else math.nan
    return RegressionResult(
        dependent=spec.dependent,
        fixed_effects=tuple(fe for fe in FE_DIMENSIONS if fe in spec.fixed_effects),
        cluster_by=spec.cluster_by,
        coefficients=coefs,
        intercept=intercept,
        r_squared=r2,
        entity_count=int(_fe_codes(df, "group").max() + 1),
        period_count=int(df["period"].nunique()),
        n_obs=len(df),
        cluster_count=G,
        excluded=excluded,
        sweeps=sweeps,
        residuals=resid,
    )
