import json

import numpy as np
import pytest

from helpers import line, page_obj, seg_obj
from printads.errors import InputError, SchemaVersionError
from printads.ingest import (CorpusStore, corpus_stats, expand_inputs, ingest_files, page_table,
                             parse_files, parse_records, segment_table)


def edition_lines(date="2022-03-01", n=20, source="Times of India", city="Mumbai", segs=None):
    return [line(page_obj(i, n, segs(i) if segs else [], source=source, city=city, date=date))
            for i in range(1, n + 1)]


def test_twenty_pages_form_one_edition():
    editions, violations = parse_records(edition_lines())
    assert len(editions) == 1 and violations == []
    assert len(editions[0].pages) == 20


def test_sentiment_out_of_domain_drops_only_the_segment():
    segs = [seg_obj("article", sentiment=2), seg_obj("article", sentiment=1)]
    editions, violations = parse_records([line(page_obj(1, 1, segs))])
    assert [v.rule for v in violations] == ["sentiment out of domain"]
    assert len(editions[0].pages[0].segments) == 1


@pytest.mark.parametrize("bad, rule", [
    ("{not json", "malformed json"),
    (json.dumps({"schema": 1, "source": "X"}), "missing field"),
    (json.dumps(page_obj(1, 1, date="2022-13-01")), "malformed field"),
    (json.dumps(page_obj(5, 3)), "page_number out of range"),
    (json.dumps(page_obj(1, 1, width=0)), "degenerate page"),
    (json.dumps(page_obj(1, 1, [seg_obj(w=0)])), "degenerate box"),
    (json.dumps(page_obj(1, 1, [seg_obj(x=980, w=100)])), "box outside page"),
    (json.dumps(page_obj(1, 1, [seg_obj(kind="photo")])), "unknown segment kind"),
])
def test_malformed_lines_become_violations(bad, rule):
    editions, violations = parse_records([bad, line(page_obj(1, 1, date="2022-04-01"))])
    assert rule in [v.rule for v in violations]
    assert len(editions) >= 1


def test_small_overshoot_is_clamped(caplog):
    editions, violations = parse_records([line(page_obj(1, 1, [seg_obj(x=910, w=100)]))])
    assert violations == []
    box = editions[0].pages[0].segments[0].box
    assert box.right == 1000 and box.width == 90
    assert "clamped" in caplog.text


def test_schema_mismatch_is_config_error():
    with pytest.raises(SchemaVersionError):
        parse_records([line(page_obj(schema=2))])


def test_duplicate_page_keeps_first():
    a = page_obj(1, 1, [seg_obj(text="first")])
    b = page_obj(1, 1, [seg_obj(text="second")])
    editions, violations = parse_records([line(a), line(b)])
    assert violations == []
    assert editions[0].pages[0].segments[0].text == "first"


def test_editions_keyed_by_source_city_date():
    lines = (edition_lines("2022-03-01", 2) + edition_lines("2022-03-02", 2)
             + edition_lines("2022-03-01", 2, city="Delhi"))
    editions, _ = parse_records(lines)
    assert [e.label for e in editions] == ["Times of India|Delhi|2022-03-01",
                                           "Times of India|Mumbai|2022-03-01",
                                           "Times of India|Mumbai|2022-03-02"]


def _write(tmp_path, name, lines):
    p = tmp_path / name
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return p


def two_edition_corpus(tmp_path):
    def segs_a(i):
        return [seg_obj("ad"), seg_obj("article", y=300, sentiment=1)] if i == 1 else [seg_obj("ad")]

    def segs_b(i):
        return [seg_obj("ad"), seg_obj("article"), seg_obj("article", y=300), seg_obj("article", y=600)] \
            if i == 1 else [seg_obj("article")]
    lines = edition_lines("2022-03-01", 2, segs=segs_a)[:1] + edition_lines("2022-03-02", 2, segs=segs_b)
    lines.insert(1, line(page_obj(2, 2, [], date="2022-03-01")))
    return _write(tmp_path, "corpus.jsonl", lines)


def test_corpus_stats_counts(tmp_path):
    path = two_edition_corpus(tmp_path)
    store = CorpusStore(tmp_path / "store")
    ingest_files(str(path), store)
    stats = corpus_stats(store)
    assert stats.to_dict("records") == [
        {"source": "Times of India", "editions": 2, "pages": 4, "articles": 5, "ads": 2}]
    # Recomputation from stored records agrees with the index.
    assert corpus_stats(store, recompute=True).equals(stats)


def test_reingest_with_dedup_is_noop(tmp_path):
    path = two_edition_corpus(tmp_path)
    store = CorpusStore(tmp_path / "store")
    ingest_files(str(path), store, dedup=True)
    before = {p: p.read_bytes() for p in store.files()}
    _, written, skipped = ingest_files(str(path), store, dedup=True)
    assert (written, skipped) == (0, 2)
    assert {p: p.read_bytes() for p in CorpusStore(tmp_path / "store").files()} == before


def test_ingestion_is_deterministic(tmp_path):
    path = two_edition_corpus(tmp_path)
    contents = []
    for name in ("a", "b"):
        store = CorpusStore(tmp_path / name)
        violations, _, _ = ingest_files(str(path), store)
        contents.append(([p.relative_to(tmp_path / name).as_posix() for p in store.files()],
                         [p.read_bytes() for p in store.files()], violations))
    assert contents[0] == contents[1]


def test_store_round_trip(tmp_path):
    path = two_edition_corpus(tmp_path)
    editions, _ = parse_files([str(path)])
    store = CorpusStore(tmp_path / "store")
    store.add(editions)
    assert list(CorpusStore(tmp_path / "store").editions()) == editions
    assert ("Times of India", "Mumbai", "2022-03-02") in store


def test_parallel_parse_matches_serial(tmp_path):
    paths = [str(_write(tmp_path, f"f{d}.jsonl", edition_lines(f"2022-03-0{d}", 3)))
             for d in range(1, 4)]
    assert parse_files(paths, jobs=2) == parse_files(paths, jobs=1)


def test_missing_input_is_input_error(tmp_path):
    with pytest.raises(InputError):
        expand_inputs(str(tmp_path / "nothing*.jsonl"))


def test_hindustan_times_sized_corpus_mean_pages():
    # Distribute 71,130 pages over 3,547 editions: 3,368 of 20 pages and 179 of 21.
    n_editions, n_pages = 3547, 71130
    extra = n_pages - 20 * n_editions
    pages_per = [21] * extra + [20] * (n_editions - extra)
    lines = []
    start = np.datetime64("2010-01-01")
    for k, total in enumerate(pages_per):
        date = str(start + k)
        lines.extend(f'{{"schema":1,"source":"Hindustan Times","city":"Delhi","date":"{date}",'
                     f'"page_number":{i},"total_pages":{total},"width":1000,"height":1600}}'
                     for i in range(1, total + 1))
    editions, violations = parse_records(lines)
    assert violations == []
    assert len(editions) == 3547
    assert sum(len(e.pages) for e in editions) == 71130
    assert round(71130 / len(editions), 2) == 20.05


def test_ads_to_articles_ratio_fixture(tmp_path):
    # Table-sized ratio at reduced scale: 465 ads and 800 articles.
    lines = []
    for i in range(1, 101):
        ads = 5 if i <= 65 else 4
        segs = [seg_obj("ad", y=10 * j, h=5) for j in range(ads)]
        segs += [seg_obj("article", y=100 + 10 * j, h=5) for j in range(8)]
        lines.append(line(page_obj(i, 100, segs)))
    store = CorpusStore(tmp_path / "store")
    store.add(parse_records(lines)[0])
    row = corpus_stats(store).iloc[0]
    assert (row["ads"], row["articles"]) == (465, 800)
    assert row["ads"] / row["articles"] == pytest.approx(465_435 / 800_171, abs=5e-4)


def test_flat_tables(tmp_path):
    editions, _ = parse_files([str(two_edition_corpus(tmp_path))])
    pages = [p for e in editions for p in e.pages]
    pt = page_table(pages)
    seg = segment_table(pages)
    assert len(pt) == 4 and len(seg) == 7
    first = pt.iloc[0]
    assert first["ad_fraction"] == pytest.approx(100 * 100 / (1000 * 1600))
    assert seg["physical_area_cm2"].iloc[0] == pytest.approx(33 * 52)
    assert str(seg["sentiment"].dtype) == "Int64"
