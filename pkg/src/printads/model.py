"""In-memory data model for extracted newspaper pages.

Coordinates are page-relative with a top-left origin: ``x`` grows to the
right and ``y`` grows downward. Units are whatever the upstream extractor
emitted (usually pixels); every analytic downstream works on ratios.
"""

from __future__ import annotations

import datetime as dt
import enum
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable

log = logging.getLogger(__name__)

# Boxes may overshoot the page by this fraction of the page dimension and
# still be clamped instead of rejected.
CLAMP_TOLERANCE = 0.02


class SegmentKind(str, enum.Enum):
    AD = "ad"
    ARTICLE = "article"


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    width: float
    height: float

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def right(self) -> float:
        return self.x + self.width

    @property
    def bottom(self) -> float:
        return self.y + self.height


@dataclass(frozen=True)
class Segment:
    kind: SegmentKind
    box: BoundingBox
    text: str = ""
    sentiment: int | None = None
    topic: str | None = None


@dataclass(frozen=True)
class PageRecord:
    source: str
    city: str
    date: dt.date
    page_number: int
    total_pages: int
    width: float
    height: float
    physical_width_cm: float | None = None
    physical_height_cm: float | None = None
    segments: tuple[Segment, ...] = ()

    @property
    def edition_key(self) -> tuple[str, str, dt.date]:
        return (self.source, self.city, self.date)

    @property
    def key(self) -> tuple[str, str, dt.date, int]:
        return (self.source, self.city, self.date, self.page_number)

    @property
    def label(self) -> str:
        return page_label(self.source, self.city, self.date, self.page_number)

    def segment_id(self, index: int) -> str:
        return f"{self.label}/s{index}"


@dataclass(frozen=True)
class Edition:
    source: str
    city: str
    date: dt.date
    pages: tuple[PageRecord, ...] = ()

    @property
    def key(self) -> tuple[str, str, dt.date]:
        return (self.source, self.city, self.date)

    @property
    def label(self) -> str:
        return f"{self.source}|{self.city}|{self.date.isoformat()}"


@dataclass(frozen=True, order=True)
class Violation:
    """A broken invariant, reported as data rather than raised."""

    record: str
    rule: str
    detail: str = field(default="", compare=False)

    def __str__(self) -> str:
        suffix = f" ({self.detail})" if self.detail else ""
        return f"{self.record}: {self.rule}{suffix}"


def page_label(source: str, city: str, date: dt.date, page_number: int) -> str:
    return f"{source}|{city}|{date.isoformat()}|p{page_number}"


def make_edition(pages: Iterable[PageRecord]) -> Edition:
    pages = sorted(pages, key=lambda p: p.page_number)
    if not pages:
        raise ValueError("an edition needs at least one page")
    first = pages[0]
    return Edition(first.source, first.city, first.date, tuple(pages))


def box_violations(box: BoundingBox, width: float, height: float, record: str) -> list[Violation]:
    out = []
    if not (box.width > 0 and box.height > 0):
        out.append(Violation(record, "degenerate box", f"w={box.width} h={box.height}"))
        return out
    if box.x < 0 or box.y < 0 or box.right > width or box.bottom > height:
        out.append(Violation(record, "box outside page",
                             f"box=({box.x},{box.y},{box.width},{box.height}) page=({width},{height})"))
    return out


def clamp_box(box: BoundingBox, width: float, height: float,
              tolerance: float = CLAMP_TOLERANCE) -> BoundingBox | None:
    """Clamp a box that overshoots the page edge by at most ``tolerance``.

    Returns the (possibly unchanged) box, or None when the overshoot is too
    large to be explained by detector slack.
    """
    slack_x, slack_y = tolerance * width, tolerance * height
    if (box.x < -slack_x or box.y < -slack_y
            or box.right > width + slack_x or box.bottom > height + slack_y):
        return None
    x0, y0 = max(box.x, 0.0), max(box.y, 0.0)
    x1, y1 = min(box.right, width), min(box.bottom, height)
    if (x0, y0, x1, y1) == (box.x, box.y, box.right, box.bottom):
        return box
    return BoundingBox(x0, y0, x1 - x0, y1 - y0)


def segment_violations(seg: Segment, page: PageRecord, where: str = "") -> list[Violation]:
    # Keyed by page so that segment order never changes the violation set.
    rec = page.label
    out = [Violation(rec, v.rule, f"{where} {v.detail}".strip())
           for v in box_violations(seg.box, page.width, page.height, rec)]
    if seg.sentiment is not None and (isinstance(seg.sentiment, bool) or seg.sentiment not in (-1, 0, 1)):
        out.append(Violation(rec, "sentiment out of domain", f"{where} {seg.sentiment!r}".strip()))
    if not isinstance(seg.kind, SegmentKind):
        out.append(Violation(rec, "unknown segment kind", f"{where} {seg.kind!r}".strip()))
    return out


def page_violations(page: PageRecord) -> list[Violation]:
    out = []
    rec = page.label
    if not (page.width > 0 and page.height > 0):
        out.append(Violation(rec, "degenerate page", f"{page.width}x{page.height}"))
    if page.total_pages < 1 or not 1 <= page.page_number <= page.total_pages:
        out.append(Violation(rec, "page_number out of range", f"{page.page_number}/{page.total_pages}"))
    for dim in (page.physical_width_cm, page.physical_height_cm):
        if dim is not None and not dim > 0:
            out.append(Violation(rec, "non-positive physical dimension", repr(dim)))
    if page.width > 0 and page.height > 0:
        for i, seg in enumerate(page.segments):
            out.extend(segment_violations(seg, page, f"segment {i}"))
    return out


def validate_edition(e: Edition) -> list[Violation]:
    """Check every structural invariant of an edition.

    The result is sorted, so it does not depend on segment or page order.
    """
    out: list[Violation] = []
    rec = e.label
    for page in e.pages:
        if page.edition_key != e.key:
            out.append(Violation(page.label, "page belongs to another edition", rec))
        out.extend(page_violations(page))

    counts = Counter(p.page_number for p in e.pages)
    for number, n in sorted(counts.items()):
        if n > 1:
            out.append(Violation(rec, "duplicate page_number", str(number)))

    totals = {p.total_pages for p in e.pages}
    if len(totals) > 1:
        out.append(Violation(rec, "inconsistent total_pages", ",".join(map(str, sorted(totals)))))
    elif totals:
        (total,) = totals
        missing = sorted(set(range(1, total + 1)) - set(counts))
        if missing:
            out.append(Violation(rec, "missing page_number", ",".join(map(str, missing))))
    return sorted(out)


def with_segments(page: PageRecord, segments: Iterable[Segment]) -> PageRecord:
    return replace(page, segments=tuple(segments))
