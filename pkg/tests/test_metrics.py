import datetime as dt

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from helpers import ad, article, page
from printads.classify import EntityRuleSet, classify_pages
from printads.ingest import segment_table
from printads.model import with_segments
from printads.metrics import (AREA_BINS, CATEGORIES, CLASSES, ad_classes, cdf_report,
                              entity_breakdown, matches_frame, monthly_area_ratio, monthly_spend,
                              odd_even_counts, parity_report, placement_report, premium_share,
                              size_cdf, spend_summary, topic_report, weekday_area_profile)
from printads.pricing import RateCard, price_table

RULES = EntityRuleSet.load()
CARD = RateCard.load()
GOV = "notice inviting e-tender"


def analyse(pages):
    seg = segment_table(pages)
    return price_table(seg, CARD), matches_frame(classify_pages(pages, RULES))


def test_government_other_share_counting():
    # Eight ads on Other pages (two on page 2), one on Front, one on Back.
    p2 = with_segments(page(2, 10), [ad(0, 0, 100, 100, GOV), ad(0, 200, 100, 100, GOV)])
    pages = [p2] + [page(n, 10, [ad(0, 0, 100, 100, GOV)]) for n in (4, 5, 6, 7, 8, 9)]
    pages += [page(1, 10, [ad(0, 0, 100, 100, GOV)]), page(10, 10, [ad(0, 0, 100, 100, GOV)])]
    priced, matches = analyse(pages)
    rep = placement_report(priced, matches).set_index(["entity_class", "category"])
    assert rep.loc[("government", "other"), "ad_share"] == 80.0
    assert rep.loc[("government", "front"), "n_ads"] == 1
    assert (rep.loc["companies", "status"] == "no data").all()


def test_single_full_page_company_ad():
    priced, matches = analyse([page(1, 10, [ad(0, 0, 1000, 1600, "tata motors")])])
    rep = placement_report(priced, matches).set_index(["entity_class", "category"])
    assert rep.loc[("companies", "front"), "mean_page_area_share"] == 100.0
    assert rep.loc[("companies", "front"), "spend_share"] == 100.0


def test_overlap_counting():
    priced, matches = analyse([page(2, 10, [ad(text="tata e-tender")])])
    both = ad_classes(priced, matches)
    assert both["government"].all() and both["companies"].all()
    neither = ad_classes(priced, matches, exclude_overlap=True)
    assert not neither["government"].any() and not neither["companies"].any()


def test_size_cdf_examples():
    F = size_cdf([0.25, 0.5, 1.0])
    assert F(0.5) == pytest.approx(2 / 3)
    assert F(1.0) == 1.0
    assert F(0.1) == 0.0
    rng = np.random.default_rng(0)
    mix = np.concatenate([rng.uniform(0.01, 0.095, 850), rng.uniform(0.105, 1.0, 150)])
    assert size_cdf(mix)(0.10) == pytest.approx(0.85, abs=1e-12)
    with pytest.raises(ValueError):
        size_cdf([])
    with pytest.raises(ValueError):
        size_cdf([0.0, 0.5])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(1e-6, 1.0), min_size=1, max_size=50),
       st.lists(st.floats(-0.5, 1.5), min_size=2, max_size=20))
def test_size_cdf_monotone_and_right_continuous(samples, xs):
    F = size_cdf(samples)
    xs = sorted(xs)
    vals = [F(x) for x in xs]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    assert F(1.0) == 1.0
    for s in samples:
        assert F(s) == pytest.approx(sum(v <= s for v in samples) / len(samples))


def test_odd_even_examples():
    df = pd.DataFrame({"page_number": [1, 3, 5, 2]})
    assert odd_even_counts(df) == (3, 1)
    assert odd_even_counts(df.iloc[:0]) == (0, 0)


def test_parity_report_by_class():
    pages = [page(1, 4, [ad(text=GOV), ad(y=200, text="tata")]), page(2, 4, [ad(text="tata")])]
    priced, matches = analyse(pages)
    rep = parity_report(priced, matches).set_index("entity_class")
    assert tuple(rep.loc["companies", ["odd", "even"]]) == (1, 1)
    assert tuple(rep.loc["all", ["odd", "even"]]) == (2, 1)


def _pages_frame(rows):
    return pd.DataFrame(rows, columns=["date", "source", "ad_fraction"]).assign(
        date=lambda d: pd.to_datetime(d["date"]))


def test_monthly_area_ratio_examples():
    one = _pages_frame([("2020-01-05", "A", 0.35)] * 4)
    assert monthly_area_ratio(one)["ad_area_ratio"].tolist() == [0.35]
    two = _pages_frame([("2020-01-05", "A", 0.4), ("2020-02-05", "A", 0.1)])
    assert monthly_area_ratio(two)["ad_area_ratio"].tolist() == [0.4, 0.1]
    covid = _pages_frame([("2020-03-10", "A", 0.35), ("2020-04-10", "A", 0.10)])
    series = monthly_area_ratio(covid).set_index("month")["ad_area_ratio"]
    assert series["2020-03"] == 0.35 and series["2020-04"] == 0.10


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 3), st.sampled_from("ABC"), st.floats(0, 1)),
                min_size=1, max_size=40))
def test_aggregate_is_page_weighted_mean_of_sources(rows):
    df = _pages_frame([(f"2020-0{m}-01", s, f) for m, s, f in rows])
    out = monthly_area_ratio(df, by_source=True)
    for month, grp in out.groupby("month"):
        agg = grp[grp["source"] == "ALL"].iloc[0]
        per = grp[grp["source"] != "ALL"]
        assert agg["pages"] == per["pages"].sum()
        weighted = (per["ad_area_ratio"] * per["pages"]).sum() / per["pages"].sum()
        assert agg["ad_area_ratio"] == pytest.approx(weighted, abs=1e-12)


def test_weekday_profile():
    monday = dt.date(2022, 1, 3)
    uniform = _pages_frame([(str(monday + dt.timedelta(d)), "A", 0.2) for d in range(14)])
    prof = weekday_area_profile(uniform)
    assert prof["ad_area_ratio"].tolist() == [0.2] * 7
    heavy = _pages_frame([(str(monday + dt.timedelta(d)), "A", 0.5 if d % 7 >= 5 else 0.2)
                          for d in range(14)])
    prof = weekday_area_profile(heavy).set_index("weekday")["ad_area_ratio"]
    assert set(prof.nlargest(2).index) == {"Saturday", "Sunday"}
    gap = weekday_area_profile(uniform[uniform["date"].dt.dayofweek != 2])
    assert gap.loc[2, "absent"] and np.isnan(gap.loc[2, "ad_area_ratio"])
    assert gap.loc[2, "weekday"] == "Wednesday"


def test_entity_breakdown_shares():
    segs = ([ad(y=i * 10, h=5, text="tata") for i in range(5)]
            + [ad(y=100 + i * 10, h=5, text="reliance") for i in range(3)]
            + [ad(y=200 + i * 10, h=5, text="samsung") for i in range(2)])
    priced, matches = analyse([page(2, 10, segs)])
    out = entity_breakdown(priced, matches, RULES.sectors)
    comp = out["companies"]
    assert comp["company"].tolist() == ["Tata", "Reliance", "Samsung"]
    assert comp["share"].tolist() == [50.0, 30.0, 20.0]
    assert "Apple" not in set(comp["company"])


def test_education_sector_massed_at_full_page():
    pages = [page(n, 10, [ad(0, 0, 1000, 1600, "fiitjee admissions")]) for n in range(2, 8)]
    priced, matches = analyse(pages)
    hist = entity_breakdown(priced, matches, RULES.sectors)["sectors"]
    edu = hist[hist["sector"] == RULES.sectors["FIITJEE"]]
    assert edu.iloc[-1]["share"] == 100.0 and edu.iloc[-1]["bin_hi"] == 1.0


def test_topic_report():
    pages = [page(2, 10, [ad(topic="business"), article(y=200, topic="sports"),
                          article(y=400, topic="sports"), article(y=600)])]
    rep = topic_report(segment_table(pages))
    assert rep.to_dict("records") == [
        {"kind": "ad", "topic": "business", "n": 1, "share": 100.0},
        {"kind": "article", "topic": "sports", "n": 2, "share": 100.0}]


def random_corpus(rng: np.random.Generator):
    texts = [GOV, "tata", "reliance e-tender", "weather", "samsung and apple"]
    pages = []
    for k in range(int(rng.integers(2, 8))):
        total = int(rng.integers(3, 12))
        for n in range(1, total + 1):
            segs = [ad(float(rng.uniform(0, 500)), float(rng.uniform(0, 800)),
                       float(rng.uniform(10, 500)), float(rng.uniform(10, 800)),
                       texts[int(rng.integers(len(texts)))]) for _ in range(int(rng.integers(0, 4)))]
            pages.append(page(n, total, segs, date=dt.date(2021, 1, 1) + dt.timedelta(k),
                              source=["Telegraph", "Sakshi"][k % 2],
                              city=["Kolkata", "Hyderabad"][k % 2]))
    return pages


@pytest.mark.parametrize("seed", range(25))
def test_share_vectors_sum_to_100_and_ignore_order(seed):
    rng = np.random.default_rng(seed)
    pages = random_corpus(rng)
    priced, matches = analyse(pages)
    rep = placement_report(priced, matches)
    for cls in CLASSES:
        rows = rep[rep["entity_class"] == cls]
        if rows["status"].iloc[0] == "no data":
            continue
        for col in ("ad_share", "total_area_share", "spend_share"):
            assert abs(rows[col].sum() - 100.0) < 1e-9
    perm = rng.permutation(len(priced))
    rep2 = placement_report(priced.iloc[perm].reset_index(drop=True),
                            matches.iloc[rng.permutation(len(matches))])
    pd.testing.assert_frame_equal(rep, rep2, check_exact=False, rtol=1e-12)
    spend = spend_summary(priced, matches)
    classed = spend[spend["entity_class"].isin(CLASSES)]
    if classed["spend"].sum() > 0:
        assert abs(classed["spend_share"].sum() - 100.0) < 1e-9
    br = entity_breakdown(priced, matches, RULES.sectors, top_n=None)
    if len(br["companies"]):
        assert abs(br["companies"]["share"].sum() - 100.0) < 1e-9
        for _, grp in br["sources"].groupby("company"):
            assert abs(grp["share"].sum() - 100.0) < 1e-9
        for _, grp in br["sectors"].groupby("sector"):
            assert abs(grp["share"].sum() - 100.0) < 1e-9


def test_premium_share_and_monthly_spend():
    pages = [page(1, 10, [ad(0, 0, 500, 800, "tata")]), page(2, 10, [ad(0, 0, 500, 800, "tata")])]
    priced, matches = analyse(pages)
    rep = placement_report(priced, matches)
    expected = 9665 / (9665 + 5640) * 100
    assert premium_share(rep, "companies", "spend_share") == pytest.approx(expected)
    ms = monthly_spend(priced, matches)
    assert ms["spend"].sum() == pytest.approx(priced["cost"].sum())


def test_cdf_report_has_unit_endpoint():
    priced, matches = analyse(random_corpus(np.random.default_rng(5)))
    rep = cdf_report(priced, matches)
    for _, grp in rep.groupby("entity_class"):
        assert grp["cdf"].is_monotonic_increasing
        assert grp["cdf"].iloc[-1] == 1.0


def test_area_bins():
    assert len(AREA_BINS) == 11 and AREA_BINS[-1] == 1.0
    assert CATEGORIES == ("front", "third", "back", "other")
