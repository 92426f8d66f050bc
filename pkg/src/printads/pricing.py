"""Ad geometry and money: page categories, scaling factors, weighted ad ratio, cost.

The rate card gives per-cm² prices for the front, third, back and base
(every other) page of each (source, city). A page category's scaling factor
is its rate divided by the same row's base rate, so an ad's weighted ad
ratio is ``scaling_factor * ad_area / page_area``.
"""

from __future__ import annotations

import csv
import enum
import io
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from statistics import fmean

import numpy as np
import pandas as pd

from .errors import ConfigError
from .model import PageRecord, Segment, SegmentKind

log = logging.getLogger(__name__)


class PageCategory(str, enum.Enum):
    FRONT = "front"
    THIRD = "third"
    BACK = "back"
    OTHER = "other"


PREMIUM = (PageCategory.FRONT, PageCategory.THIRD, PageCategory.BACK)


def page_category(page_number: int, total_pages: int) -> PageCategory:
    """Front > Third > Back precedence keeps tiny papers well defined."""
    if not 1 <= page_number <= total_pages:
        raise ValueError(f"page {page_number} outside 1..{total_pages}")
    if page_number == 1:
        return PageCategory.FRONT
    if page_number == 3:
        return PageCategory.THIRD
    if page_number == total_pages:
        return PageCategory.BACK
    return PageCategory.OTHER


@dataclass(frozen=True)
class Rates:
    front: float
    third: float
    back: float
    base: float
    page_width_cm: float | None = None
    page_height_cm: float | None = None

    def rate(self, cat: PageCategory) -> float:
        return {PageCategory.FRONT: self.front, PageCategory.THIRD: self.third,
                PageCategory.BACK: self.back, PageCategory.OTHER: self.base}[cat]

    @property
    def page_area_cm2(self) -> float | None:
        if self.page_width_cm and self.page_height_cm:
            return self.page_width_cm * self.page_height_cm
        return None


def _key(text: str) -> str:
    return " ".join(text.casefold().split())


class RateCard:
    """Per-(source, city) ad rates. Lookups ignore case and extra whitespace."""

    def __init__(self, rows: dict[tuple[str, str], Rates]):
        if not rows:
            raise ConfigError("rate card has no rows")
        self.rows: dict[tuple[str, str], Rates] = {}
        for (source, city), r in rows.items():
            if min(r.front, r.third, r.back, r.base) <= 0:
                raise ConfigError(f"non-positive rate for {source}/{city}")
            if r.front < r.base:
                log.warning("%s/%s: front rate %s below base rate %s", source, city, r.front, r.base)
            self.rows[(_key(source), _key(city))] = r
        self._fallbacks: dict[tuple[str, str], Rates] = {}

    @classmethod
    def load(cls, path: str | Path | None = None) -> "RateCard":
        """Read a rate CSV; ``None`` loads the shipped card."""
        if path is None:
            text = resources.files("printads").joinpath("data/rates.csv").read_text(encoding="utf-8")
        else:
            try:
                text = Path(path).read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError(f"cannot read rate card {path}: {exc}") from exc
        rows = {}
        try:
            for rec in csv.DictReader(io.StringIO(text)):
                dims = [rec.get("page_width_cm") or None, rec.get("page_height_cm") or None]
                rows[(rec["source"], rec["city"])] = Rates(
                    float(rec["rate_front"]), float(rec["rate_third"]),
                    float(rec["rate_back"]), float(rec["rate_base"]),
                    *(None if d is None else float(d) for d in dims))
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"malformed rate card: {exc!r}") from exc
        return cls(rows)

    @property
    def min_rate(self) -> float:
        return min(r.base for r in self.rows.values())

    def lookup(self, source: str, city: str) -> Rates:
        key = (_key(source), _key(city))
        if key in self.rows:
            return self.rows[key]
        if key in self._fallbacks:
            return self._fallbacks[key]
        same_source = [r for (s, _), r in sorted(self.rows.items()) if s == key[0]]
        if not same_source:
            raise ConfigError(f"no rates for source {source!r}")
        log.warning("no rates for %s/%s; using the mean of %d %s rows", source, city,
                    len(same_source), source)
        widths = [r.page_width_cm for r in same_source]
        heights = [r.page_height_cm for r in same_source]
        rates = Rates(fmean(r.front for r in same_source), fmean(r.third for r in same_source),
                      fmean(r.back for r in same_source), fmean(r.base for r in same_source),
                      fmean(widths) if None not in widths else None,
                      fmean(heights) if None not in heights else None)
        self._fallbacks[key] = rates
        return rates


def area_fraction(seg: Segment, page: PageRecord) -> float:
    return (seg.box.width * seg.box.height) / (page.width * page.height)


def scaling_factor(card: RateCard, source: str, city: str, cat: PageCategory) -> float:
    if cat is PageCategory.OTHER:
        return 1.0
    rates = card.lookup(source, city)
    return rates.rate(cat) / rates.base


def normalized_rate(card: RateCard, source: str, city: str, cat: PageCategory) -> float:
    return card.lookup(source, city).rate(cat) / card.min_rate


def weighted_ad_ratio(seg: Segment, page: PageRecord, card: RateCard) -> float:
    cat = page_category(page.page_number, page.total_pages)
    return scaling_factor(card, page.source, page.city, cat) * area_fraction(seg, page)


def physical_page_area(page: PageRecord, card: RateCard) -> float | None:
    """Printed page area in cm², from the record or the card's per-row default."""
    if page.physical_width_cm and page.physical_height_cm:
        return page.physical_width_cm * page.physical_height_cm
    return card.lookup(page.source, page.city).page_area_cm2


def cost_estimate(seg: Segment, page: PageRecord, card: RateCard) -> float | None:
    """Ad area in cm² times the placement's rate; None marks an unpriceable ad."""
    phys = physical_page_area(page, card)
    if phys is None:
        return None
    cat = page_category(page.page_number, page.total_pages)
    return area_fraction(seg, page) * phys * card.lookup(page.source, page.city).rate(cat)


PRICE_COLUMNS = ["segment_id", "category", "area_fraction", "scaling_factor",
                 "weighted_ad_ratio", "cost", "unpriceable"]


def price_table(segments: pd.DataFrame, card: RateCard) -> pd.DataFrame:
    """Price every ad in a segment table (see ``ingest.segment_table``).

    Returns the ad rows with category, scaling_factor, weighted_ad_ratio,
    cost and an unpriceable flag appended. Cost is NaN when no physical page
    size is known for the ad.
    """
    ads = segments[segments["kind"] == SegmentKind.AD.value].copy()
    cats = [page_category(n, t).value for n, t in zip(ads["page_number"], ads["total_pages"])]
    ads["category"] = pd.Series(cats, index=ads.index, dtype=object)

    factor = np.ones(len(ads))
    rate = np.empty(len(ads))
    default_area = np.full(len(ads), np.nan)
    combos = ads.groupby(["source", "city", "category"], sort=True).indices
    for (source, city, cat), idx in combos.items():
        cat = PageCategory(cat)
        rates = card.lookup(source, city)
        factor[idx] = scaling_factor(card, source, city, cat)
        rate[idx] = rates.rate(cat)
        if rates.page_area_cm2 is not None:
            default_area[idx] = rates.page_area_cm2

    phys = ads["physical_area_cm2"].to_numpy(dtype=float, na_value=np.nan)
    phys = np.where(np.isnan(phys), default_area, phys)
    ads["scaling_factor"] = factor
    ads["weighted_ad_ratio"] = factor * ads["area_fraction"].to_numpy()
    ads["cost"] = ads["area_fraction"].to_numpy() * phys * rate
    ads["unpriceable"] = np.isnan(ads["cost"].to_numpy())
    return ads.reset_index(drop=True)
