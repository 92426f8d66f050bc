"""Entity x source x period panels for the coverage regressions.

A row sums, for one entity in one newspaper during one period, the
weighted ad ratio of the entity's ads, the sentiment labels of articles
that mention it, and the number of such articles.

For the government panel the entity is the single label ``government``,
so the (entity, source) pair reduces to the newspaper.
"""

from __future__ import annotations

import datetime as dt
import logging
from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np
import pandas as pd

from .classify import GOVERNMENT

log = logging.getLogger(__name__)

PANEL_COLUMNS = ["entity", "source", "period", "weighted_ad_ratio", "sentiment_total",
                 "article_count", "popularity"]
BUCKETS = ("day", "week", "month")


@dataclass(frozen=True)
class PanelObservation:
    entity: str
    source: str
    period: str
    weighted_ad_ratio: float
    sentiment_total: int
    article_count: int
    popularity: float | None = None


def period_label(date: dt.date, bucket: str) -> str:
    if bucket == "day":
        return date.isoformat()
    if bucket == "week":
        year, week, _ = date.isocalendar()
        return f"{year}-W{week:02d}"
    if bucket == "month":
        return f"{date.year:04d}-{date.month:02d}"
    raise ValueError(f"bucket must be one of {BUCKETS}")


def period_labels(dates: pd.Series, bucket: str) -> pd.Series:
    if bucket == "day":
        return dates.dt.strftime("%Y-%m-%d")
    if bucket == "month":
        return dates.dt.strftime("%Y-%m")
    if bucket == "week":
        iso = dates.dt.isocalendar()
        return iso["year"].astype(str) + "-W" + iso["week"].astype(int).map("{:02d}".format)
    raise ValueError(f"bucket must be one of {BUCKETS}")


def panel_frame(panel) -> pd.DataFrame:
    """Accept a DataFrame or an iterable of PanelObservation."""
    if isinstance(panel, pd.DataFrame):
        df = panel
    else:
        df = pd.DataFrame([asdict(o) for o in panel], columns=PANEL_COLUMNS)
    missing = [c for c in PANEL_COLUMNS if c not in df.columns]
    if missing:
        if missing == ["popularity"]:
            df = df.assign(popularity=np.nan)
        else:
            raise ValueError(f"panel lacks columns {missing}")
    return df


def to_observations(df: pd.DataFrame) -> list[PanelObservation]:
    out = []
    for row in panel_frame(df)[PANEL_COLUMNS].itertuples(index=False):
        pop = None if pd.isna(row.popularity) else float(row.popularity)
        out.append(PanelObservation(str(row.entity), str(row.source), str(row.period),
                                    float(row.weighted_ad_ratio), int(row.sentiment_total),
                                    int(row.article_count), pop))
    return out


def validate_panel(panel) -> list[str]:
    """Return a list of problems; empty when every panel invariant holds."""
    df = panel_frame(panel)
    problems = []
    dup = df.duplicated(["entity", "source", "period"])
    if dup.any():
        problems.append(f"{int(dup.sum())} duplicate (entity, source, period) rows")
    if (df["weighted_ad_ratio"] < 0).any():
        problems.append("negative weighted_ad_ratio")
    if (df["article_count"] < 0).any():
        problems.append("negative article_count")
    if (df["sentiment_total"].abs() > df["article_count"]).any():
        problems.append("|sentiment_total| exceeds article_count")
    pop = df["popularity"].dropna()
    if ((pop < 0) | (pop > 100)).any():
        problems.append("popularity outside [0, 100]")
    return problems


def _entity_rows(matches: pd.DataFrame, kind: str, entity_class: str) -> pd.DataFrame:
    m = matches[matches["kind"] == kind]
    if entity_class == "government":
        return m[m["entity"] == GOVERNMENT]
    if entity_class == "companies":
        return m[m["entity"] != GOVERNMENT]
    raise ValueError("entity_class must be 'government' or 'companies'")


def build_panel(segments: pd.DataFrame, priced: pd.DataFrame, matches: pd.DataFrame,
                bucket: str = "month", entity_class: str = "companies",
                popularity: pd.DataFrame | None = None, pages: pd.DataFrame | None = None,
                balance: bool = True) -> pd.DataFrame:
    """Assemble panel rows from a segment table, priced ads and long-form matches.

    With ``balance`` every (entity, source) pair that is active at all gets a
    row, zeros included, for each period in which its newspaper has pages
    (taken from ``pages`` when given, else from ``segments``).

    ``popularity`` has columns entity, period, popularity and is joined on
    exact (entity, period); entities it names that never appear in the panel
    are logged and ignored.
    """
    if bucket not in BUCKETS:
        raise ValueError(f"bucket must be one of {BUCKETS}")
    ads = _entity_rows(matches, "ad", entity_class).merge(
        priced[["segment_id", "source", "date", "weighted_ad_ratio"]], on="segment_id")
    ads["period"] = period_labels(ads["date"], bucket)
    ad_sum = ads.groupby(["entity", "source", "period"])["weighted_ad_ratio"].sum()

    arts = _entity_rows(matches, "article", entity_class).merge(
        segments[["segment_id", "source", "date", "sentiment"]], on="segment_id")
    arts["period"] = period_labels(arts["date"], bucket)
    arts["sentiment"] = arts["sentiment"].fillna(0).astype("int64")
    g = arts.groupby(["entity", "source", "period"])
    art = pd.DataFrame({"sentiment_total": g["sentiment"].sum(), "article_count": g.size()})

    df = pd.concat([ad_sum, art], axis=1).reset_index()
    df.columns = ["entity", "source", "period", "weighted_ad_ratio", "sentiment_total", "article_count"]

    if balance and len(df):
        window_src = pages if pages is not None else segments
        windows = (window_src.assign(period=period_labels(window_src["date"], bucket))
                   [["source", "period"]].drop_duplicates())
        pairs = df[["entity", "source"]].drop_duplicates()
        full = pairs.merge(windows, on="source")
        df = full.merge(df, on=["entity", "source", "period"], how="outer")

    df["weighted_ad_ratio"] = df["weighted_ad_ratio"].fillna(0.0).astype(float)
    df["sentiment_total"] = df["sentiment_total"].fillna(0).astype("int64")
    df["article_count"] = df["article_count"].fillna(0).astype("int64")
    df["popularity"] = np.nan

    if popularity is not None and len(df):
        df = attach_popularity(df, popularity)

    return df[PANEL_COLUMNS].sort_values(["entity", "source", "period"], ignore_index=True)


def read_panel(path) -> pd.DataFrame:
    df = pd.read_csv(path, dtype={"entity": str, "source": str, "period": str})
    if list(df.columns) != PANEL_COLUMNS:
        raise ValueError(f"panel CSV columns must be exactly {PANEL_COLUMNS}, got {list(df.columns)}")
    return df


def write_panel(df: pd.DataFrame, path) -> None:
    panel_frame(df)[PANEL_COLUMNS].to_csv(path, index=False, lineterminator="\n")


def read_popularity(path) -> pd.DataFrame:
    df = pd.read_csv(path, dtype={"entity": str, "period": str})
    missing = {"entity", "period", "popularity"} - set(df.columns)
    if missing:
        raise ValueError(f"popularity CSV lacks columns {sorted(missing)}")
    return df


def attach_popularity(panel: pd.DataFrame, popularity: pd.DataFrame) -> pd.DataFrame:
    """Replace the panel's popularity column with an (entity, period) series."""
    df = panel_frame(panel).drop(columns="popularity")
    unknown = sorted(set(popularity["entity"]) - set(df["entity"]))
    if unknown:
        log.warning("popularity series for unknown entities ignored: %s", ", ".join(unknown))
    pop = popularity[["entity", "period", "popularity"]].drop_duplicates(["entity", "period"])
    return df.merge(pop, on=["entity", "period"], how="left")[PANEL_COLUMNS]
