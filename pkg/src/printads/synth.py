"""Seeded synthetic data with known ground truth.

* ``synthetic_panel`` plants a coefficient on the weighted ad ratio in an
  entity x source x period panel with group and time effects, drawing
  integer article counts and sentiment totals whose conditional mean is
  exactly linear.
* ``synthetic_corpus`` writes page records shaped like the real archives:
  small government notices, quarter/half/full-page company ads, articles
  whose coverage of a company rises with its ad intensity.
* ``placement_pages`` and ``labeled_government_ads`` are small constructed
  fixtures with exactly known aggregate answers.
"""

from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
import pandas as pd

from .classify import EntityRuleSet
from .ingest import dumps_page
from .model import BoundingBox, PageRecord, Segment, SegmentKind
from .panel import PANEL_COLUMNS

# -- panels --------------------------------------------------------------------

# Probability mass shared by positive and negative labels in the sentiment draw.
_POLAR = 0.6


def synthetic_panel(rng: np.random.Generator | int, *, beta: float, dependent: str = "sentiment_total",
                    n_entities: int = 30, n_sources: int = 1, n_periods: int = 24,
                    entity_names: list[str] | None = None, group_sd: float = 1.0,
                    time_sd: float = 0.5, x_scale: float = 1.5, drop: float = 0.0,
                    popularity_beta: float | None = None) -> pd.DataFrame:
    """Panel whose outcome has conditional mean ``a + beta*x + group + time``.

    For ``article_count`` the count is Poisson with that mean. For
    ``sentiment_total`` an article count ``n`` is drawn first and each
    article is labelled +1/-1/0 with probabilities chosen so that the
    expected sum equals the mean. The ad ratio is gamma distributed with a
    scale that rises with the group effect, so pooled OLS is biased and
    the fixed effects matter.

    ``drop`` removes that fraction of rows at random (keeping every group
    and period represented) to make the panel unbalanced.
    """
    rng = np.random.default_rng(rng)
    if entity_names is None:
        entity_names = [f"E{i:03d}" for i in range(n_entities)]
    sources = [f"S{j}" for j in range(n_sources)]
    periods = [f"P{t:03d}" for t in range(n_periods)]
    G, T = len(entity_names) * n_sources, n_periods

    gamma = rng.normal(0.0, group_sd, G)
    delta = rng.normal(0.0, time_sd, T)
    scale = x_scale * np.exp(0.4 * gamma)
    x = rng.gamma(2.0, scale[:, None] * (1.0 + 0.2 * np.tanh(delta))[None, :])
    pop = rng.uniform(0.0, 100.0, (G, T)) if popularity_beta is not None else None

    mean = gamma[:, None] + delta[None, :] + beta * x
    if pop is not None:
        mean = mean + popularity_beta * pop

    if dependent == "article_count":
        mean = mean - mean.min() + 2.0
        count = rng.poisson(mean)
        sentiment = np.zeros_like(count)
    elif dependent == "sentiment_total":
        lam = np.maximum(6.0, np.abs(mean) / (0.9 * _POLAR))
        d = mean / lam
        count = rng.poisson(lam)
        p_pos = _POLAR / 2 + d / 2
        p_neg = _POLAR / 2 - d / 2
        draws = np.array([rng.multinomial(n, [pp, pn, 1 - pp - pn])
                          for n, pp, pn in zip(count.ravel(), p_pos.ravel(), p_neg.ravel())])
        sentiment = (draws[:, 0] - draws[:, 1]).reshape(count.shape)
    else:
        raise ValueError("dependent must be sentiment_total or article_count")

    gi, ti = np.meshgrid(np.arange(G), np.arange(T), indexing="ij")
    df = pd.DataFrame({
        "entity": [entity_names[g // n_sources] for g in gi.ravel()],
        "source": [sources[g % n_sources] for g in gi.ravel()],
        "period": [periods[t] for t in ti.ravel()],
        "weighted_ad_ratio": x.ravel(),
        "sentiment_total": sentiment.ravel().astype("int64"),
        "article_count": count.ravel().astype("int64"),
        "popularity": pop.ravel() if pop is not None else np.nan,
    })
    if drop > 0:
        keep = rng.random(len(df)) >= drop
        # Keep one row per group and per period so no fixed effect is empty.
        for idx in (gi.ravel(), ti.ravel()):
            for level in np.unique(idx):
                rows = np.flatnonzero(idx == level)
                if not keep[rows].any():
                    keep[rng.choice(rows)] = True
        df = df[keep].reset_index(drop=True)
    return df[PANEL_COLUMNS]


# -- corpus --------------------------------------------------------------------

SOURCES: dict[str, dict] = {
    "Times of India": {"cities": ["Mumbai", "Delhi", "Kolkata", "Chennai"], "size": (1100, 1760),
                       "physical": True, "pages": (18, 26), "ad_load": 1.3},
    "Hindustan Times": {"cities": ["Mumbai", "Delhi"], "size": (1000, 1600),
                        "physical": True, "pages": (16, 24), "ad_load": 1.0},
    "Telegraph": {"cities": ["Kolkata"], "size": (1000, 1580),
                  "physical": True, "pages": (12, 18), "ad_load": 1.0},
    "Dainik Bhaskar": {"cities": ["Delhi"], "size": (960, 1540),
                       "physical": False, "pages": (12, 16), "ad_load": 0.6},
    "Sakshi": {"cities": ["Andhra", "Hyderabad", "Telangana"], "size": (1000, 1620),
               "physical": True, "pages": (14, 20), "ad_load": 1.0},
}

FILLER = """market weather cricket festival school traffic water power health music film road
metro farmers monsoon price village temple hospital season weekend sale offer discount shop
opens new team match wins report talks plan city local residents event art show ticket house
garden youth fresh morning evening rally park bridge river railway airport flights exam
results college students teachers doctors nurses patients concert museum library books poets
dance theatre cinema stars league final series batsman bowler goal coach players fans stadium
rain heat summer winter cold flood storm clouds harvest crops rice wheat sugar milk fruit
vegetables bakery sweets menu dinner lunch jewellery gold silver furniture sofa mattress paint
tiles cement steel homes flats villas plots loans savings bank rates deposit mega grand big
best top great value quality trusted modern classic premium luxury smart simple easy quick
comfort style design""".split()

TOPICS = ["business", "health", "technology", "crime", "sports", "politics",
          "entertainment", "education"]

# Companies that buy ads in the synthetic corpus and their preferred ad sizes.
ADVERTISERS = {
    "Tata": "mixed", "Reliance": "mixed", "Hindustan Unilever": "mixed",
    "Maruti Suzuki": "large", "Hyundai": "large", "Samsung": "tech", "Apple": "tech",
    "Bharti Airtel": "tech", "LIC": "half", "FIITJEE": "full", "Allen Career Institute": "full",
    "Amazon": "mixed", "Patanjali": "mixed", "Nestlé": "mixed", "Bajaj Auto": "large",
}
SIZE_CHOICES = {
    "mixed": ([0.06, 0.125, 0.25, 0.5, 1.0], [0.30, 0.15, 0.25, 0.2, 0.1]),
    "large": ([0.25, 0.5, 1.0], [0.3, 0.4, 0.3]),
    "tech": ([0.25, 0.5, 1.0], [0.4, 0.3, 0.3]),
    "half": ([0.25, 0.5], [0.2, 0.8]),
    "full": ([0.5, 1.0], [0.1, 0.9]),
}
GOV_TEMPLATES = ["{kw} notice for {a} {b} works", "notice inviting {kw} for {a} {b}",
                 "{kw} of {a} department {b} supply", "{a} {b} {kw} no. {n}"]
GOV_AD_KEYWORDS = ["e-tender", "tender", "corrigendum", "govt.", "government", "state",
                   "e-procurement", "procurement", "central"]
CORRUPTION_TEMPLATES = ["{gov} officials face {kw} over {a} {b}",
                        "{kw} in {a} {b} deal, {gov} agency says"]
CORRUPTION_WORDS = ["probe", "bribe", "scam", "fraud", "investigation", "raid", "scandal",
                    "corruption", "laundering"]
GOV_TERMS = ["state", "central", "government", "govt"]


@dataclass(frozen=True)
class CorpusTruth:
    seed: int
    pages: int
    editions: int
    government_small_share: float
    government_full_share: float

    def to_json(self) -> dict:
        return vars(self)


def government_ad_size(rng: np.random.Generator) -> float:
    """Mixture with 85% of mass below a tenth of the page and 1% full page."""
    u = rng.random()
    if u < 0.85:
        return float(rng.uniform(0.01, 0.095))
    if u < 0.99:
        return float(rng.uniform(0.105, 0.5))
    return 1.0


def _words(rng: np.random.Generator, k: int) -> list[str]:
    return [FILLER[i] for i in rng.integers(0, len(FILLER), k)]


def _place(rng: np.random.Generator, fraction: float, width: float, height: float) -> BoundingBox:
    if fraction >= 1.0:
        return BoundingBox(0.0, 0.0, width, height)
    area = fraction * width * height
    aspect = rng.uniform(0.6, 1.6)
    w = min(width, math.sqrt(area * aspect))
    h = min(height, area / w)
    w = min(width, area / h)
    x = rng.uniform(0.0, max(width - w, 0.0))
    y = rng.uniform(0.0, max(height - h, 0.0))
    return BoundingBox(x, y, w, h)


def _first_keyword(rules: EntityRuleSet, company: str) -> str:
    return rules.company_rules[company][0]


def iter_synthetic_pages(seed: int, n_pages: int = 10_000, start: dt.date = dt.date(2021, 1, 4),
                         rules: EntityRuleSet | None = None) -> Iterator[PageRecord]:
    """Yield pages edition by edition until ``n_pages`` have been produced."""
    rng = np.random.default_rng(seed)
    rules = rules or EntityRuleSet.load()
    keywords = {c: list(rules.company_rules[c]) for c in ADVERTISERS}
    outlets = [(s, c) for s, spec in SOURCES.items() for c in spec["cities"]]
    companies = list(ADVERTISERS)
    # Latent ad intensity per (company, outlet, month); drives both ads and coverage.
    n_months = 36
    intensity = rng.gamma(1.2, 1.0, (len(companies), len(outlets), n_months))

    produced = 0
    k = 0
    while produced < n_pages:
        o = k % len(outlets)
        source, city = outlets[o]
        spec = SOURCES[source]
        date = start + dt.timedelta(days=7 * (k // len(outlets)) + (o % 7))
        month = ((date.year - start.year) * 12 + date.month - start.month) % n_months
        lo, hi = spec["pages"]
        total = int(min(rng.integers(lo, hi + 1), n_pages - produced))
        width, height = spec["size"]
        phys = (33.0, 52.0) if spec["physical"] else (None, None)
        weights = intensity[:, o, month]

        for number in range(1, total + 1):
            premium = number in (1, 3, total)
            segs: list[Segment] = []
            full_page = False

            n_company = rng.poisson(spec["ad_load"] * (0.9 if premium else 0.5))
            for _ in range(n_company):
                company = companies[rng.choice(len(companies), p=weights / weights.sum())]
                sizes, probs = SIZE_CHOICES[ADVERTISERS[company]]
                frac = float(rng.choice(sizes, p=probs))
                if frac >= 1.0 and segs:
                    frac = 0.5
                kw = keywords[company][int(rng.integers(0, len(keywords[company])))]
                text = f"{kw} {' '.join(_words(rng, 4))}"
                segs.append(Segment(SegmentKind.AD, _place(rng, frac, width, height), text,
                                    topic=str(rng.choice(["business", "technology", "education"]))))
                if frac >= 1.0:
                    full_page = True
                    break

            if not full_page:
                n_gov = rng.poisson(spec["ad_load"] * (0.35 if premium else 1.6))
                for _ in range(n_gov):
                    frac = government_ad_size(rng)
                    if frac >= 1.0 and segs:
                        frac = 0.45
                    a, b = _words(rng, 2)
                    text = str(rng.choice(GOV_TEMPLATES)).format(
                        kw=rng.choice(GOV_AD_KEYWORDS), a=a, b=b, n=int(rng.integers(1, 999)))
                    segs.append(Segment(SegmentKind.AD, _place(rng, frac, width, height), text,
                                        topic="politics"))
                    if frac >= 1.0:
                        full_page = True
                        break

            if not full_page:
                for _ in range(rng.poisson(0.6)):
                    frac = float(rng.uniform(0.02, 0.2))
                    segs.append(Segment(SegmentKind.AD, _place(rng, frac, width, height),
                                        " ".join(_words(rng, 5)), topic="business"))
                for _ in range(rng.poisson(5)):
                    segs.append(_article(rng, rules, companies, weights, keywords, width, height))
            if not segs:
                segs.append(_article(rng, rules, companies, weights, keywords, width, height))

            yield PageRecord(source, city, date, number, total, float(width), float(height),
                             phys[0], phys[1], tuple(segs))
        produced += total
        k += 1


def _article(rng, rules, companies, weights, keywords, width, height) -> Segment:
    frac = float(rng.uniform(0.04, 0.3))
    u = rng.random()
    sentiment_shift = 0.0
    if u < 0.35:
        i = int(rng.choice(len(companies), p=weights / weights.sum()))
        kw = keywords[companies[i]][int(rng.integers(0, len(keywords[companies[i]])))]
        text = f"{' '.join(_words(rng, 3))} {kw} {' '.join(_words(rng, 6))}"
        sentiment_shift = 0.25 * math.tanh(weights[i] - 1.0)
        topic = "business"
    elif u < 0.5:
        a, b = _words(rng, 2)
        text = str(rng.choice(CORRUPTION_TEMPLATES)).format(
            gov=rng.choice(GOV_TERMS), kw=rng.choice(CORRUPTION_WORDS), a=a, b=b)
        sentiment_shift = -0.3
        topic = "crime"
    else:
        text = " ".join(_words(rng, 10))
        topic = str(rng.choice(TOPICS))
    if rng.random() < 0.03:
        sentiment = None
    else:
        p_pos = min(max(0.3 + sentiment_shift, 0.0), 0.6)
        sentiment = int(rng.choice([1, -1, 0], p=[p_pos, 0.6 - p_pos, 0.4]))
    return Segment(SegmentKind.ARTICLE, _place(rng, frac, width, height), text, sentiment, topic)


def write_synthetic_corpus(path, seed: int, n_pages: int = 10_000) -> CorpusTruth:
    """Write a JSONL corpus; returns the generator's ground truth."""
    editions = set()
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for page in iter_synthetic_pages(seed, n_pages):
            fh.write(dumps_page(page) + "\n")
            editions.add(page.edition_key)
            n += 1
    return CorpusTruth(seed, n, len(editions), government_small_share=0.85,
                       government_full_share=0.01)


# -- constructed fixtures ---------------------------------------------------------

def placement_pages(gov_other_share: float = 0.884, company_premium_spend_share: float = 0.316,
                    n_gov: int = 1000, n_company_premium: int = 100,
                    source: str = "Telegraph", city: str = "Kolkata",
                    rates: tuple[float, float, float, float] = (2641, 2565, 2430, 2230),
                    pages_per_edition: int = 16) -> list[PageRecord]:
    """Pages engineered so the placement shares come out at the given values.

    Government ads are small notices; ``gov_other_share`` of them sit on
    non-premium pages. Company ads are all quarter pages: ``n_company_premium``
    on each premium page type, and enough on other pages that the premium
    share of spend matches ``company_premium_spend_share``. ``rates`` must be
    the (front, third, back, base) rates of the row the pages will be
    priced with.
    """
    front, third, back, base = rates
    premium_cost = n_company_premium * (front + third + back)
    n_company_other = round(premium_cost * (1 - company_premium_spend_share)
                            / (company_premium_spend_share * base))
    n_gov_other = round(n_gov * gov_other_share)
    W, H = 1000.0, 1600.0
    total = pages_per_edition
    slots = {"front": [1], "third": [3], "back": [total],
             "other": [p for p in range(2, total) if p != 3]}

    placements: list[tuple[str, Segment]] = []
    gov_box = BoundingBox(0.0, 0.0, 200.0, 400.0)
    co_box = BoundingBox(500.0, 800.0, 500.0, 800.0)
    for i in range(n_gov):
        cat = "other" if i < n_gov_other else ("front", "third", "back")[i % 3]
        placements.append((cat, Segment(SegmentKind.AD, gov_box, "notice inviting e-tender for road works")))
    for cat in ("front", "third", "back"):
        for _ in range(n_company_premium):
            placements.append((cat, Segment(SegmentKind.AD, co_box, "Tata grand value sale")))
    for _ in range(n_company_other):
        placements.append(("other", Segment(SegmentKind.AD, co_box, "Tata grand value sale")))

    # Round-robin ads over a sequence of editions, a few per page.
    per_page: dict[tuple[int, int], list[Segment]] = {}
    counters = {cat: 0 for cat in slots}
    for cat, seg in placements:
        j = counters[cat]
        counters[cat] += 1
        edition, pos = divmod(j, len(slots[cat]) * 4)
        page = slots[cat][pos % len(slots[cat])]
        per_page.setdefault((edition, page), []).append(seg)

    n_editions = max(e for e, _ in per_page) + 1
    start = dt.date(2022, 1, 1)
    pages = []
    for e in range(n_editions):
        date = start + dt.timedelta(days=e)
        for number in range(1, total + 1):
            segs = per_page.get((e, number), [])
            pages.append(PageRecord(source, city, date, number, total, W, H, 33.0, 52.0, tuple(segs)))
    return pages


def labeled_government_ads() -> list[tuple[str, bool]]:
    """100 hand-labelled ad texts on which the government-ad rule is right 94 times.

    The six disagreements are deliberate: three government notices that
    use none of the keywords, and three commercial ads whose text contains
    a keyword as a substring of another word.
    """
    true_pos = [
        f"notice inviting e-tender for {w} works" for w in
        ["road", "bridge", "drainage", "school building", "water supply", "street lighting",
         "hospital wing", "railway culvert", "canal lining", "park fencing"]
    ] + [
        f"corrigendum to tender no. {n} dated {d} march" for n, d in
        [(42, 3), (57, 9), (61, 11), (88, 14), (90, 21)]
    ] + [
        f"government of {s} invites applications for {p}" for s, p in
        [("maharashtra", "teachers"), ("kerala", "nurses"), ("punjab", "constables"),
         ("bihar", "clerks"), ("odisha", "engineers")]
    ] + [
        f"state {d} department: e-procurement of {i}" for d, i in
        [("health", "medicines"), ("education", "laptops"), ("transport", "buses"),
         ("forest", "vehicles"), ("power", "transformers")]
    ] + [
        f"central {o} recruitment notification {y}" for o, y in
        [("armed police", 2023), ("railways", 2024), ("coal fields", 2022),
         ("water commission", 2023), ("warehousing corporation", 2024)]
    ] + [
        f"govt. of india ministry of {m} public notice" for m in
        ["road transport", "finance", "agriculture", "health", "education"]
    ] + [
        f"tenders invited for {w} by the district collector" for w in
        ["sand mining lease", "parking contract", "canteen services", "security services",
         "housekeeping", "vehicle hire", "printing work"]
    ] + [
        "e-corrigendum: extension of bid date for pipeline work",
        "procurement of furniture for municipal schools",
        "gov portal registration for farmer subsidy scheme",
        "notice of e-tender cancellation for ward 12",
        "state election commission voter awareness drive",
    ]
    false_neg = [
        "municipal corporation invites bids for road resurfacing",
        "ministry of defence recruitment rally at district stadium",
        "public works department bid notice for flyover repair",
    ]
    false_pos = [
        "luxury real estate launch: 3 bhk flats from 1.2 crore",
        "interstate bus service, book your tickets online",
        "bank statement loans approved in 24 hours",
    ]
    true_neg = [
        "mega sale this weekend, flat 50% off", "new bakery opens in park street",
        "learn guitar in 30 days, free demo class", "diwali jewellery collection now in store",
        "summer camp for kids, enrol today", "best mattress deals of the season",
        "fresh fruit delivered to your door", "book your dream wedding venue now",
        "modular kitchens with 10 year warranty", "weekend brunch buffet at the grand hotel",
        "used cars with certified warranty", "yoga classes for seniors every morning",
        "air conditioners at lowest prices", "premium villas near the lake",
        "coaching for engineering entrance exams", "sofa sets clearance sale",
        "winter woollens exhibition at city hall", "wedding photography packages",
        "organic vegetables home delivery", "dance academy admissions open",
        "dental clinic: painless root canal", "pet grooming salon opening offer",
        "tile and marble showroom grand opening", "paint your home this festive season",
        "cookery workshop for beginners", "smart watches at unbeatable prices",
        "foreign language classes, new batches", "travel packages to hill stations",
        "crockery and cutlery festive offers", "bridal makeup studio discounts",
        "computer repair and data recovery", "home loans at attractive rates",
        "kids bicycles end of season sale", "gym membership half price this month",
        "handloom sarees exhibition and sale", "property for rent in city centre",
        "ayurvedic massage centre now open", "music concert tickets on sale",
        "spectacles buy one get one free", "water purifiers with free installation",
        "shoe sale up to 60% off", "furniture rental for students",
        "driving school admissions open", "cake shop anniversary special",
        "solar water heaters with subsidy advice", "car wash and detailing offers",
        "chess tournament registrations open",
    ]
    items = ([(t, True) for t in true_pos] + [(t, True) for t in false_neg]
             + [(t, False) for t in false_pos] + [(t, False) for t in true_neg])
    return items


def truth_json(truth: CorpusTruth) -> str:
    return json.dumps(truth.to_json(), indent=1, sort_keys=True)
