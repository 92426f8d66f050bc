"""Builders and independent reference implementations used across tests."""

from __future__ import annotations

import datetime as dt
import json

import numpy as np
import pandas as pd

from printads.model import BoundingBox, PageRecord, Segment, SegmentKind

DAY = dt.date(2022, 3, 1)


def ad(x=0.0, y=0.0, w=100.0, h=100.0, text="", **kw) -> Segment:
    return Segment(SegmentKind.AD, BoundingBox(x, y, w, h), text, **kw)


def article(x=0.0, y=0.0, w=100.0, h=100.0, text="", sentiment=None, **kw) -> Segment:
    return Segment(SegmentKind.ARTICLE, BoundingBox(x, y, w, h), text, sentiment, **kw)


def page(number=1, total=20, segments=(), source="Times of India", city="Mumbai", date=DAY,
         width=1000.0, height=1600.0, phys=(33.0, 52.0)) -> PageRecord:
    return PageRecord(source, city, date, number, total, width, height, phys[0], phys[1],
                      tuple(segments))


def page_obj(number=1, total=20, segments=None, source="Times of India", city="Mumbai",
             date="2022-03-01", width=1000, height=1600, **extra) -> dict:
    obj = {"schema": 1, "source": source, "city": city, "date": date, "page_number": number,
           "total_pages": total, "width": width, "height": height,
           "physical_width_cm": 33, "physical_height_cm": 52,
           "segments": segments if segments is not None else []}
    obj.update(extra)
    return obj


def seg_obj(kind="ad", x=10, y=10, w=100, h=100, text="", sentiment=None, topic=None) -> dict:
    out = {"kind": kind, "box": {"x": x, "y": y, "w": w, "h": h}, "text": text}
    if sentiment is not None:
        out["sentiment"] = sentiment
    if topic is not None:
        out["topic"] = topic
    return out


def line(obj: dict) -> str:
    return json.dumps(obj)


# -- regression oracles ------------------------------------------------------------
# These deliberately avoid the package's demeaning code: fixed effects become
# explicit dummy columns and the sandwich is accumulated cluster by cluster.

def dummy_matrix(panel: pd.DataFrame, fixed_effects) -> np.ndarray:
    cols = []
    if "group" in fixed_effects:
        g = panel["entity"].astype(str) + "\x00" + panel["source"].astype(str)
        cols.append(pd.get_dummies(g, dtype=float).to_numpy())
    if "time" in fixed_effects:
        d = pd.get_dummies(panel["period"].astype(str), dtype=float).to_numpy()
        cols.append(d[:, 1:] if cols else d)
    if not cols:
        return np.ones((len(panel), 1))
    return np.column_stack(cols)


def dummy_ols(panel: pd.DataFrame, dependent: str, regressors, fixed_effects):
    """Coefficients on ``regressors`` from OLS with explicit dummies, plus FWL pieces.

    Returns (beta, partialled X, residuals).
    """
    y = panel[dependent].to_numpy(dtype=float)
    X = panel[list(regressors)].to_numpy(dtype=float)
    D = dummy_matrix(panel, fixed_effects)
    full = np.column_stack([X, D])
    coef, *_ = np.linalg.lstsq(full, y, rcond=None)
    beta = coef[: X.shape[1]]
    resid = y - full @ coef
    # Partial the dummies out of X by least squares for the sandwich oracle.
    gamma, *_ = np.linalg.lstsq(D, X, rcond=None)
    Xp = X - D @ gamma
    return beta, Xp, resid


def brute_force_cluster_se(X: np.ndarray, resid: np.ndarray, clusters) -> np.ndarray:
    clusters = np.asarray(clusters)
    n, k = X.shape
    bread = np.linalg.inv(X.T @ X)
    meat = np.zeros((k, k))
    labels = sorted(set(clusters.tolist()))
    for c in labels:
        s = np.zeros(k)
        for i in range(n):
            if clusters[i] == c:
                s += X[i] * resid[i]
        meat += np.outer(s, s)
    G = len(labels)
    factor = G / (G - 1) * (n - 1) / (n - k)
    return np.sqrt(np.diag(factor * bread @ meat @ bread))


def random_panel(rng: np.random.Generator, n_entities=None, n_periods=None, drop=None,
                 n_sources=None) -> pd.DataFrame:
    """Small random unbalanced panel with arbitrary (non-generator) structure."""
    ne = n_entities or int(rng.integers(3, 31))
    nt = n_periods or int(rng.integers(3, 25))
    ns = n_sources or int(rng.integers(1, 3))
    rows = []
    for e in range(ne):
        for s in range(ns):
            for t in range(nt):
                rows.append((f"c{e}", f"s{s}", f"t{t:02d}"))
    df = pd.DataFrame(rows, columns=["entity", "source", "period"])
    keep = rng.random(len(df)) >= (drop if drop is not None else rng.uniform(0, 0.3))
    df = df[keep].reset_index(drop=True)
    n = len(df)
    ge = rng.normal(size=ne * ns)
    gt = rng.normal(size=nt)
    gi = df["entity"].str[1:].astype(int) * ns + df["source"].str[1:].astype(int)
    ti = df["period"].str[1:].astype(int)
    df["weighted_ad_ratio"] = rng.gamma(2.0, 1.0, n) + 0.5 * ge[gi]
    df["popularity"] = rng.uniform(0, 100, n)
    noise = rng.standard_t(5, n)
    df["sentiment_total"] = np.round(0.3 * df["weighted_ad_ratio"] + ge[gi] + gt[ti] + noise).astype(int)
    df["article_count"] = np.abs(df["sentiment_total"]) + rng.poisson(3, n)
    return df[["entity", "source", "period", "weighted_ad_ratio", "sentiment_total",
               "article_count", "popularity"]]
