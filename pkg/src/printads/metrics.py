"""Descriptive aggregates over priced ads, pages and keyword matches.

Every share is a percentage. Entity classes are ``government`` (ads that
fire the government-ad rule) and ``companies`` (ads that mention at least
one listed company). An ad hitting both counts in both classes unless
``exclude_overlap`` is set.
"""

from __future__ import annotations

import calendar
from dataclasses import dataclass
from typing import Iterable

import numpy as np
import pandas as pd

from .classify import GOVERNMENT, MatchResult
from .pricing import PREMIUM, PageCategory

CLASSES = ("government", "companies")
CATEGORIES = tuple(c.value for c in PageCategory)
AREA_BINS = np.linspace(0.0, 1.0, 11)


def matches_frame(matches: Iterable[MatchResult] | pd.DataFrame) -> pd.DataFrame:
    """Long (segment_id, kind, entity) table, one row per matched entity."""
    if isinstance(matches, pd.DataFrame):
        return matches
    rows = [(m.segment_id, m.kind.value, e) for m in matches for e in sorted(m.matched_entities)]
    return pd.DataFrame(rows, columns=["segment_id", "kind", "entity"])


def ad_classes(priced: pd.DataFrame, matches, exclude_overlap: bool = False) -> pd.DataFrame:
    """Attach boolean ``government`` and ``companies`` columns to priced ads."""
    m = matches_frame(matches)
    gov_ids = set(m.loc[m["entity"] == GOVERNMENT, "segment_id"])
    co_ids = set(m.loc[m["entity"] != GOVERNMENT, "segment_id"])
    if exclude_overlap:
        both = gov_ids & co_ids
        gov_ids -= both
        co_ids -= both
    out = priced.copy()
    out["government"] = out["segment_id"].isin(gov_ids)
    out["companies"] = out["segment_id"].isin(co_ids)
    return out


def _class_rows(classed: pd.DataFrame, entity_class: str) -> pd.DataFrame:
    if entity_class == "all":
        return classed
    if entity_class not in CLASSES:
        raise ValueError(f"unknown entity class {entity_class!r}")
    return classed[classed[entity_class]]


def _shares(values: pd.Series) -> pd.Series:
    total = values.sum()
    return values * 100.0 / total if total > 0 else values * np.nan


def placement_report(priced: pd.DataFrame, matches, exclude_overlap: bool = False) -> pd.DataFrame:
    """Where each entity class places its ads, one row per (class, page category).

    Columns:
      ad_share              % of the class's ads on that category
      mean_page_area_share  mean % of the page an ad covers there (per ad)
      total_area_share      % of the class's summed ad area found there
      spend_share           % of the class's priced spend found there
      unpriceable           ads of the class left out of spend_share
    """
    classed = ad_classes(priced, matches, exclude_overlap)
    frames = []
    for cls in CLASSES:
        ads = classed[classed[cls]]
        priceable = ads[~ads["unpriceable"]]
        g = ads.groupby("category")
        table = pd.DataFrame(index=pd.Index(CATEGORIES, name="category"))
        table["n_ads"] = g.size().reindex(CATEGORIES, fill_value=0).astype("int64")
        table["ad_share"] = _shares(table["n_ads"].astype(float))
        table["mean_page_area_share"] = g["area_fraction"].mean().reindex(CATEGORIES) * 100.0
        table["total_area_share"] = _shares(
            g["area_fraction"].sum().reindex(CATEGORIES, fill_value=0.0))
        table["spend"] = priceable.groupby("category")["cost"].sum().reindex(CATEGORIES, fill_value=0.0)
        table["spend_share"] = _shares(table["spend"])
        table["unpriceable"] = int(ads["unpriceable"].sum())
        table["status"] = "ok" if len(ads) else "no data"
        table.insert(0, "entity_class", cls)
        frames.append(table.reset_index())
    return pd.concat(frames, ignore_index=True)


def premium_share(report: pd.DataFrame, entity_class: str, column: str) -> float:
    """Sum of ``column`` over the front, third and back pages for one class."""
    rows = report[(report["entity_class"] == entity_class)
                  & report["category"].isin([c.value for c in PREMIUM])]
    return float(rows[column].sum())


def spend_summary(priced: pd.DataFrame, matches, exclude_overlap: bool = False) -> pd.DataFrame:
    """Total estimated spend per entity class, with the count of unpriceable ads."""
    classed = ad_classes(priced, matches, exclude_overlap)
    rows = []
    for cls in (*CLASSES, "all"):
        ads = _class_rows(classed, cls)
        rows.append((cls, len(ads), int((~ads["unpriceable"]).sum()), int(ads["unpriceable"].sum()),
                     float(ads.loc[~ads["unpriceable"], "cost"].sum())))
    df = pd.DataFrame(rows, columns=["entity_class", "n_ads", "priced", "unpriceable", "spend"])
    classed_total = df.loc[df["entity_class"].isin(CLASSES), "spend"].sum()
    df["spend_share"] = np.where(df["entity_class"] == "all", np.nan,
                                 df["spend"] * 100.0 / classed_total if classed_total > 0 else np.nan)
    return df


@dataclass(frozen=True)
class SizeCdf:
    """Empirical CDF of ad area fractions."""

    samples: np.ndarray

    def __call__(self, x) -> np.ndarray | float:
        res = np.searchsorted(self.samples, x, side="right") / len(self.samples)
        return float(res) if np.ndim(res) == 0 else res

    def points(self) -> pd.DataFrame:
        """Step locations: each distinct sample value and F at that value."""
        values, counts = np.unique(self.samples, return_counts=True)
        return pd.DataFrame({"area_fraction": values,
                             "cdf": np.cumsum(counts) / len(self.samples)})


def size_cdf(fractions: Iterable[float]) -> SizeCdf:
    arr = np.sort(np.asarray(list(fractions), dtype=float))
    if arr.size == 0:
        raise ValueError("size_cdf needs at least one sample")
    if not (np.all(arr > 0) and np.all(arr <= 1)):
        raise ValueError("area fractions must lie in (0, 1]")
    arr.setflags(write=False)
    return SizeCdf(arr)


def cdf_report(priced: pd.DataFrame, matches, exclude_overlap: bool = False) -> pd.DataFrame:
    classed = ad_classes(priced, matches, exclude_overlap)
    frames = []
    for cls in (*CLASSES, "all"):
        ads = _class_rows(classed, cls)
        if len(ads):
            pts = size_cdf(ads["area_fraction"].clip(upper=1.0)).points()
            pts.insert(0, "entity_class", cls)
            frames.append(pts)
    if not frames:
        return pd.DataFrame(columns=["entity_class", "area_fraction", "cdf"])
    return pd.concat(frames, ignore_index=True)


def odd_even_counts(priced: pd.DataFrame, matches=None, entity_class: str = "all",
                    exclude_overlap: bool = False) -> tuple[int, int]:
    ads = priced if matches is None else _class_rows(ad_classes(priced, matches, exclude_overlap),
                                                     entity_class)
    odd = int((ads["page_number"] % 2 == 1).sum())
    return odd, len(ads) - odd


def parity_report(priced: pd.DataFrame, matches, exclude_overlap: bool = False) -> pd.DataFrame:
    rows = []
    for cls in (*CLASSES, "all"):
        odd, even = odd_even_counts(priced, matches, cls, exclude_overlap)
        rows.append((cls, odd, even, odd / even if even else np.nan))
    return pd.DataFrame(rows, columns=["entity_class", "odd", "even", "odd_even_ratio"])


def monthly_area_ratio(pages: pd.DataFrame, by_source: bool = False) -> pd.DataFrame:
    """Mean share of page area covered by ads, per calendar month.

    Each page contributes its own ad-area fraction, so the aggregate series
    is the page-weighted mean of the per-source series. Months without pages
    do not appear.
    """
    df = pages.assign(month=pages["date"].dt.strftime("%Y-%m"))
    agg = (df.groupby("month")["ad_fraction"].agg(["mean", "size"])
           .rename(columns={"mean": "ad_area_ratio", "size": "pages"}).reset_index())
    agg.insert(1, "source", "ALL")
    if not by_source:
        return agg
    per = (df.groupby(["month", "source"])["ad_fraction"].agg(["mean", "size"])
           .rename(columns={"mean": "ad_area_ratio", "size": "pages"}).reset_index())
    return pd.concat([agg, per], ignore_index=True).sort_values(["month", "source"],
                                                                ignore_index=True)


def weekday_area_profile(pages: pd.DataFrame) -> pd.DataFrame:
    """Mean ad-area ratio per weekday, Monday first; NaN where no pages fall."""
    g = pages.groupby(pages["date"].dt.dayofweek)["ad_fraction"]
    mean = g.mean().reindex(range(7))
    count = g.size().reindex(range(7), fill_value=0)
    return pd.DataFrame({"weekday": list(calendar.day_name),
                         "ad_area_ratio": mean.to_numpy(),
                         "pages": count.to_numpy().astype("int64"),
                         "absent": (count == 0).to_numpy()})


def monthly_spend(priced: pd.DataFrame, matches, exclude_overlap: bool = False) -> pd.DataFrame:
    classed = ad_classes(priced, matches, exclude_overlap)
    classed = classed[~classed["unpriceable"]]
    month = classed["date"].dt.strftime("%Y-%m")
    frames = []
    for cls in CLASSES:
        sel = classed[cls]
        s = classed.loc[sel].groupby([month[sel], classed.loc[sel, "source"]])["cost"].sum()
        frames.append(s.rename("spend").rename_axis(["month", "source"]).reset_index()
                      .assign(entity_class=cls))
    out = pd.concat(frames, ignore_index=True)
    return out[["month", "source", "entity_class", "spend"]].sort_values(
        ["month", "source", "entity_class"], ignore_index=True)


def _company_ads(priced: pd.DataFrame, matches) -> pd.DataFrame:
    m = matches_frame(matches)
    m = m[(m["entity"] != GOVERNMENT) & (m["kind"] == "ad")]
    return m.merge(priced[["segment_id", "source", "area_fraction"]], on="segment_id", how="inner")


def entity_breakdown(priced: pd.DataFrame, matches, sectors: dict[str, str] | None = None,
                     top_n: int | None = 15) -> dict[str, pd.DataFrame]:
    """Per-company ad counts, per-company source mix and per-sector size histograms.

    Companies are ranked by ad count, ties broken by name. Companies without
    ads do not appear. An ad naming two companies counts once for each.
    """
    ads = _company_ads(priced, matches)
    counts = ads.groupby("entity").size().rename("n_ads").reset_index()
    counts = counts.sort_values(["n_ads", "entity"], ascending=[False, True], ignore_index=True)
    counts["share"] = _shares(counts["n_ads"].astype(float))
    top = counts if top_n is None else counts.head(top_n)

    by_source = ads[ads["entity"].isin(top["entity"])].groupby(["entity", "source"]).size()
    by_source = by_source.rename("n_ads").reset_index()
    by_source["share"] = by_source.groupby("entity")["n_ads"].transform(
        lambda s: s * 100.0 / s.sum())

    sectors = sectors or {}
    ads = ads.assign(sector=ads["entity"].map(sectors).fillna("Other"))
    rows = []
    for sector, grp in ads.groupby("sector"):
        hist, _ = np.histogram(grp["area_fraction"].clip(upper=1.0), bins=AREA_BINS)
        for lo, hi, n in zip(AREA_BINS[:-1], AREA_BINS[1:], hist):
            rows.append((sector, round(lo, 1), round(hi, 1), int(n), n * 100.0 / hist.sum()))
    hist_df = pd.DataFrame(rows, columns=["sector", "bin_lo", "bin_hi", "n_ads", "share"])
    return {"companies": top.rename(columns={"entity": "company"}),
            "sources": by_source.rename(columns={"entity": "company"}),
            "sectors": hist_df}


def topic_report(segments: pd.DataFrame) -> pd.DataFrame:
    """Counts of ingested topic labels, split by segment kind."""
    labeled = segments.dropna(subset=["topic"])
    counts = labeled.groupby(["kind", "topic"]).size().rename("n").reset_index()
    counts["share"] = counts.groupby("kind")["n"].transform(lambda s: s * 100.0 / s.sum())
    return counts.sort_values(["kind", "topic"], ignore_index=True)
