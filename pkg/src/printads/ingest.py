"""Parsing, validation and persistence of line-delimited page records.

One JSON object per line describes one page::

    {"schema": 1, "source": "Telegraph", "city": "Kolkata", "date": "2023-04-01",
     "page_number": 1, "total_pages": 16, "width": 1000, "height": 1600,
     "physical_width_cm": 33, "physical_height_cm": 52,
     "segments": [{"kind": "ad", "box": {"x": 0, "y": 0, "w": 500, "h": 400},
                   "text": "...", "sentiment": null, "topic": null}]}

A store is a directory holding one such file per edition plus ``index.json``.
"""

from __future__ import annotations

import datetime as dt
import glob
import json
import logging
import os
import re
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Iterator

import pandas as pd

from .errors import InputError, SchemaVersionError
from .model import (BoundingBox, Edition, PageRecord, Segment, SegmentKind,
                    Violation, box_violations, clamp_box, make_edition,
                    page_label, validate_edition)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
INDEX_NAME = "index.json"

_NUMBER = (int, float)


def _is_number(v: Any) -> bool:
    return isinstance(v, _NUMBER) and not isinstance(v, bool)


def _parse_segment(raw: Any, page: PageRecord, where: str) -> tuple[Segment | None, list[Violation]]:
    rec = page.label
    if not isinstance(raw, dict):
        return None, [Violation(rec, "malformed segment", where)]
    kind = raw.get("kind")
    try:
        kind = SegmentKind(kind)
    except ValueError:
        return None, [Violation(rec, "unknown segment kind", f"{where} {kind!r}")]

    box = raw.get("box")
    if not isinstance(box, dict) or not all(_is_number(box.get(k)) for k in ("x", "y", "w", "h")):
        return None, [Violation(rec, "malformed box", where)]
    bbox = BoundingBox(float(box["x"]), float(box["y"]), float(box["w"]), float(box["h"]))
    bad = [v for v in box_violations(bbox, page.width, page.height, rec) if v.rule == "degenerate box"]
    if bad:
        return None, [Violation(rec, "degenerate box", f"{where} {bad[0].detail}")]
    clamped = clamp_box(bbox, page.width, page.height)
    if clamped is None:
        return None, [Violation(rec, "box outside page", where)]
    if clamped is not bbox:
        log.warning("%s %s: box clamped to page edge", rec, where)
        bbox = clamped

    text = raw.get("text") or ""
    if not isinstance(text, str):
        return None, [Violation(rec, "malformed text", where)]
    sentiment = raw.get("sentiment")
    if sentiment is not None and (isinstance(sentiment, bool) or sentiment not in (-1, 0, 1)):
        return None, [Violation(rec, "sentiment out of domain", f"{where} {sentiment!r}")]
    topic = raw.get("topic")
    if topic is not None and not isinstance(topic, str):
        return None, [Violation(rec, "malformed topic", where)]
    return Segment(kind, bbox, text, None if sentiment is None else int(sentiment), topic), []


def parse_page(obj: Any, where: str = "<record>") -> tuple[PageRecord | None, list[Violation]]:
    """Turn one decoded JSON object into a page.

    Page-level problems drop the page; segment-level problems drop only the
    offending segment. Both are reported as violations.
    """
    if not isinstance(obj, dict):
        return None, [Violation(where, "malformed record", "not a JSON object")]
    if "schema" not in obj:
        return None, [Violation(where, "missing field", "schema")]
    if obj["schema"] != SCHEMA_VERSION:
        raise SchemaVersionError(f"{where}: schema {obj['schema']!r}, expected {SCHEMA_VERSION}")

    for name, ok in (("source", lambda v: isinstance(v, str) and v.strip()),
                     ("city", lambda v: isinstance(v, str) and v.strip()),
                     ("date", lambda v: isinstance(v, str)),
                     ("page_number", lambda v: isinstance(v, int) and not isinstance(v, bool)),
                     ("total_pages", lambda v: isinstance(v, int) and not isinstance(v, bool)),
                     ("width", _is_number), ("height", _is_number)):
        if not ok(obj.get(name)):
            return None, [Violation(where, "missing field" if name not in obj else "malformed field", name)]
    try:
        date = dt.date.fromisoformat(obj["date"])
    except ValueError:
        return None, [Violation(where, "malformed field", f"date {obj['date']!r}")]

    rec = page_label(obj["source"], obj["city"], date, obj["page_number"])
    if not 1 <= obj["page_number"] <= obj["total_pages"]:
        return None, [Violation(rec, "page_number out of range", f"{obj['page_number']}/{obj['total_pages']}")]
    if not (obj["width"] > 0 and obj["height"] > 0):
        return None, [Violation(rec, "degenerate page", f"{obj['width']}x{obj['height']}")]

    phys = []
    for name in ("physical_width_cm", "physical_height_cm"):
        v = obj.get(name)
        if v is not None and not (_is_number(v) and v > 0):
            return None, [Violation(rec, "non-positive physical dimension", name)]
        phys.append(None if v is None else float(v))

    page = PageRecord(obj["source"], obj["city"], date, obj["page_number"], obj["total_pages"],
                      float(obj["width"]), float(obj["height"]), phys[0], phys[1])
    raw_segments = obj.get("segments", [])
    if not isinstance(raw_segments, list):
        return None, [Violation(rec, "malformed field", "segments")]

    segments, violations = [], []
    for i, raw in enumerate(raw_segments):
        seg, bad = _parse_segment(raw, page, f"segment {i}")
        violations.extend(bad)
        if seg is not None:
            segments.append(seg)
    return PageRecord(page.source, page.city, page.date, page.page_number, page.total_pages,
                      page.width, page.height, page.physical_width_cm, page.physical_height_cm,
                      tuple(segments)), violations


def parse_lines(lines: Iterable[str], name: str = "<stream>") -> tuple[list[PageRecord], list[Violation]]:
    pages, violations = [], []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        where = f"{name}:{lineno}"
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            violations.append(Violation(where, "malformed json", str(exc)))
            continue
        page, bad = parse_page(obj, where)
        violations.extend(bad)
        if page is not None:
            pages.append(page)
    return pages, violations


def group_pages(pages: Iterable[PageRecord]) -> tuple[list[Edition], list[Violation]]:
    """Group pages into editions, keeping the first copy of a duplicated page."""
    grouped: dict[tuple, dict[int, PageRecord]] = defaultdict(dict)
    for page in pages:
        slot = grouped[page.edition_key]
        if page.page_number in slot:
            log.warning("%s: duplicate page, keeping first", page.label)
            continue
        slot[page.page_number] = page
    editions, violations = [], []
    for key in sorted(grouped):
        edition = make_edition(grouped[key].values())
        editions.append(edition)
        violations.extend(validate_edition(edition))
    return editions, violations


def parse_records(lines: Iterable[str], name: str = "<stream>") -> tuple[list[Edition], list[Violation]]:
    """Parse a stream of JSON lines into editions keyed by (source, city, date).

    Malformed lines never abort parsing; they come back as violations.
    Raises SchemaVersionError on a schema-version mismatch.
    """
    pages, violations = parse_lines(lines, name)
    editions, structural = group_pages(pages)
    return editions, violations + structural


def _parse_path(path: str) -> tuple[list[PageRecord], list[Violation]]:
    with open(path, encoding="utf-8") as fh:
        return parse_lines(fh, path)


def expand_inputs(patterns: str | Iterable[str]) -> list[str]:
    if isinstance(patterns, str):
        patterns = [patterns]
    paths: set[str] = set()
    for pattern in patterns:
        hits = glob.glob(str(pattern), recursive=True)
        if not hits:
            raise InputError(f"no input files match {pattern!r}")
        paths.update(hits)
    return sorted(paths)


def parse_files(paths: Iterable[str], jobs: int = 1) -> tuple[list[Edition], list[Violation]]:
    paths = list(paths)
    if jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_parse_path, paths))
    else:
        results = [_parse_path(p) for p in paths]
    pages, violations = [], []
    for p, v in results:
        pages.extend(p)
        violations.extend(v)
    editions, structural = group_pages(pages)
    return editions, violations + structural


# -- persistence ---------------------------------------------------------------

def page_to_json(page: PageRecord) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "source": page.source,
        "city": page.city,
        "date": page.date.isoformat(),
        "page_number": page.page_number,
        "total_pages": page.total_pages,
        "width": page.width,
        "height": page.height,
        "physical_width_cm": page.physical_width_cm,
        "physical_height_cm": page.physical_height_cm,
        "segments": [
            {"kind": s.kind.value,
             "box": {"x": s.box.x, "y": s.box.y, "w": s.box.width, "h": s.box.height},
             "text": s.text, "sentiment": s.sentiment, "topic": s.topic}
            for s in page.segments
        ],
    }


def dumps_page(page: PageRecord) -> str:
    return json.dumps(page_to_json(page), ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def _slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", text.casefold()).strip("-") or "x"


def _edition_counts(e: Edition) -> dict[str, int]:
    ads = sum(s.kind is SegmentKind.AD for p in e.pages for s in p.segments)
    segs = sum(len(p.segments) for p in e.pages)
    return {"pages": len(e.pages), "ads": ads, "articles": segs - ads}


@dataclass(frozen=True)
class IndexEntry:
    source: str
    city: str
    date: str
    path: str
    pages: int
    ads: int
    articles: int

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.source, self.city, self.date)


class CorpusStore:
    """Directory of per-edition JSONL files with a JSON index."""

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        self._index: dict[tuple[str, str, str], IndexEntry] = {}
        index_path = self.root / INDEX_NAME
        if index_path.exists():
            raw = json.loads(index_path.read_text(encoding="utf-8"))
            for item in raw["editions"]:
                entry = IndexEntry(**item)
                self._index[entry.key] = entry

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, key: tuple[str, str, dt.date | str]) -> bool:
        source, city, date = key
        date = date.isoformat() if isinstance(date, dt.date) else date
        return (source, city, date) in self._index

    @property
    def entries(self) -> list[IndexEntry]:
        return [self._index[k] for k in sorted(self._index)]

    def add(self, editions: Iterable[Edition], dedup: bool = False) -> tuple[int, int]:
        """Write editions to the store.

        With ``dedup`` an edition already present is left untouched; without
        it the stored copy is replaced. Returns (written, skipped).
        """
        written = skipped = 0
        for e in editions:
            key = (e.source, e.city, e.date.isoformat())
            if dedup and key in self._index:
                skipped += 1
                continue
            rel = Path("editions") / _slug(e.source) / _slug(e.city) / f"{key[2]}.jsonl"
            path = self.root / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                for page in e.pages:
                    fh.write(dumps_page(page) + "\n")
            self._index[key] = IndexEntry(e.source, e.city, key[2], rel.as_posix(), **_edition_counts(e))
            written += 1
        self._write_index()
        return written, skipped

    def _write_index(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        payload = {"schema": SCHEMA_VERSION,
                   "editions": [vars(e) for e in self.entries]}
        tmp = self.root / (INDEX_NAME + ".tmp")
        tmp.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        os.replace(tmp, self.root / INDEX_NAME)

    def editions(self) -> Iterator[Edition]:
        for entry in self.entries:
            with open(self.root / entry.path, encoding="utf-8") as fh:
                pages, bad = parse_lines(fh, entry.path)
            if bad:
                raise InputError(f"store file {entry.path} is corrupt: {bad[0]}")
            yield make_edition(pages)

    def pages(self) -> Iterator[PageRecord]:
        for e in self.editions():
            yield from e.pages

    def files(self) -> list[Path]:
        return [self.root / INDEX_NAME] + [self.root / e.path for e in self.entries]


def ingest_files(patterns: str | Iterable[str], store: CorpusStore, dedup: bool = False,
                 jobs: int = 1) -> tuple[list[Violation], int, int]:
    editions, violations = parse_files(expand_inputs(patterns), jobs=jobs)
    written, skipped = store.add(editions, dedup=dedup)
    return violations, written, skipped


STATS_COLUMNS = ["source", "editions", "pages", "articles", "ads"]


def corpus_stats(store: CorpusStore, recompute: bool = False) -> pd.DataFrame:
    """Per-source counts of editions, pages, articles and ads.

    By default the counts come from the index; ``recompute`` rescans the
    stored records instead.
    """
    rows: dict[str, list[int]] = defaultdict(lambda: [0, 0, 0, 0])
    if recompute:
        for e in store.editions():
            c = _edition_counts(e)
            row = rows[e.source]
            row[0] += 1
            row[1] += c["pages"]
            row[2] += c["articles"]
            row[3] += c["ads"]
    else:
        for entry in store.entries:
            row = rows[entry.source]
            row[0] += 1
            row[1] += entry.pages
            row[2] += entry.articles
            row[3] += entry.ads
    data = [[source, *rows[source]] for source in sorted(rows)]
    return pd.DataFrame(data, columns=STATS_COLUMNS).astype(
        {c: "int64" for c in STATS_COLUMNS[1:]})


# -- flat tables for the analytics passes ----------------------------------------

PAGE_COLUMNS = ["page_id", "source", "city", "date", "page_number", "total_pages",
                "ad_fraction", "n_ads", "n_articles"]
SEGMENT_COLUMNS = ["segment_id", "page_id", "kind", "source", "city", "date", "page_number",
                   "total_pages", "area_fraction", "physical_area_cm2", "text", "sentiment", "topic"]


def page_table(pages: Iterable[PageRecord]) -> pd.DataFrame:
    """One row per page with the summed area fraction of its ads."""
    rows = []
    for p in pages:
        page_area = p.width * p.height
        ads = [s for s in p.segments if s.kind is SegmentKind.AD]
        rows.append((p.label, p.source, p.city, p.date, p.page_number, p.total_pages,
                     sum(s.box.area for s in ads) / page_area, len(ads), len(p.segments) - len(ads)))
    df = pd.DataFrame(rows, columns=PAGE_COLUMNS)
    df["date"] = pd.to_datetime(df["date"])
    return df


def segment_table(pages: Iterable[PageRecord]) -> pd.DataFrame:
    rows = []
    for p in pages:
        page_area = p.width * p.height
        phys = (p.physical_width_cm * p.physical_height_cm
                if p.physical_width_cm and p.physical_height_cm else None)
        for i, s in enumerate(p.segments):
            rows.append((p.segment_id(i), p.label, s.kind.value, p.source, p.city, p.date,
                         p.page_number, p.total_pages, s.box.area / page_area, phys,
                         s.text, s.sentiment, s.topic))
    df = pd.DataFrame(rows, columns=SEGMENT_COLUMNS)
    df["date"] = pd.to_datetime(df["date"])
    df["sentiment"] = df["sentiment"].astype("Int64")
    df["physical_area_cm2"] = df["physical_area_cm2"].astype("float64")
    return df
