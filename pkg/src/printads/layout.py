"""Column-aware reading order for the segments of one page."""

from __future__ import annotations

from typing import Hashable, Iterable, Sequence

from .model import BoundingBox

# Two boxes share a column when their horizontal overlap covers at least
# this fraction of the narrower box.
COLUMN_OVERLAP = 0.5


def share_column(a: BoundingBox, b: BoundingBox, threshold: float = COLUMN_OVERLAP) -> bool:
    overlap = min(a.right, b.right) - max(a.x, b.x)
    return overlap > 0 and overlap >= threshold * min(a.width, b.width)


def columns(boxes: Sequence[BoundingBox], threshold: float = COLUMN_OVERLAP) -> list[list[int]]:
    """Group box indices into columns (connected components of ``share_column``)."""
    parent = list(range(len(boxes)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            if share_column(boxes[i], boxes[j], threshold):
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(len(boxes)):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def reading_order(segments: Iterable[tuple[Hashable, BoundingBox]],
                  threshold: float = COLUMN_OVERLAP) -> list[Hashable]:
    """Order segment ids column by column, left to right, each top to bottom.

    Columns are ranked by their leftmost edge, then top edge. Ties inside a
    column fall back to x and finally the id itself, so the output never
    depends on input order.
    """
    items = sorted(segments, key=lambda item: (item[1].y, item[1].x, repr(item[0])))
    boxes = [box for _, box in items]

    def col_key(col: list[int]) -> tuple:
        return (min(boxes[i].x for i in col), min(boxes[i].y for i in col),
                min(repr(items[i][0]) for i in col))

    order = []
    for col in sorted(columns(boxes, threshold), key=col_key):
        col.sort(key=lambda i: (boxes[i].y, boxes[i].x, repr(items[i][0])))
        order.extend(items[i][0] for i in col)
    return order
