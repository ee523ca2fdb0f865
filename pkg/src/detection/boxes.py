# -*- coding: utf-8 -*-
"""
Boxes - ground-truth boxes, detections, IoU and class-wise NMS

Coordinates are pixels, (x1, y1) inclusive top-left and (x2, y2) exclusive
bottom-right, so a box's area is (x2 - x1) * (y2 - y1).
"""
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple, Union

from src.core.errors import SchemaError
from src.core.types import BoxRecordDict, DetectionRecord


NUM_CLASSES = 3
MIN_BOX_AREA = 16.0


@dataclass(frozen=True)
class GroundTruthBox:
    """正解ボックス"""
    x1: float
    y1: float
    x2: float
    y2: float
    class_id: int

    def __post_init__(self):
        message = self.validate()
        if message:
            raise SchemaError(message)

    def validate(self) -> Optional[str]:
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            return f"box corners out of order: ({self.x1}, {self.y1}, {self.x2}, {self.y2})"
        if not 0 <= self.class_id < NUM_CLASSES:
            return f"class id {self.class_id} outside [0, {NUM_CLASSES})"
        if self.area < MIN_BOX_AREA:
            return f"box area {self.area} below {MIN_BOX_AREA} px^2"
        return None

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    @property
    def corners(self) -> Tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)

    def within(self, width: int, height: int) -> bool:
        return self.x1 >= 0 and self.y1 >= 0 and self.x2 <= width and self.y2 <= height

    def to_record(self) -> BoxRecordDict:
        return {"x1": self.x1, "y1": self.y1, "x2": self.x2, "y2": self.y2, "class": self.class_id}

    @classmethod
    def from_record(cls, record: dict) -> 'GroundTruthBox':
        try:
            return cls(float(record["x1"]), float(record["y1"]), float(record["x2"]), float(record["y2"]),
                       int(record["class"]))
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"malformed box record {record!r}: {e}") from e


@dataclass(frozen=True)
class Detection:
    x1: float
    y1: float
    x2: float
    y2: float
    class_id: int
    confidence: float

    @property
    def corners(self) -> Tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)

    def to_record(self) -> DetectionRecord:
        return {"x1": self.x1, "y1": self.y1, "x2": self.x2, "y2": self.y2,
                "class": self.class_id, "confidence": self.confidence}

    @classmethod
    def from_record(cls, record: dict) -> 'Detection':
        try:
            return cls(float(record["x1"]), float(record["y1"]), float(record["x2"]), float(record["y2"]),
                       int(record["class"]), float(record["confidence"]))
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"malformed detection record {record!r}: {e}") from e


class Detections:
    """Detections of one image, sorted by descending confidence (stable)"""

    def __init__(self, items: Sequence[Detection] = ()):
        self._items: Tuple[Detection, ...] = tuple(sorted(items, key=lambda d: -d.confidence))

    def __iter__(self) -> Iterator[Detection]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __getitem__(self, index: int) -> Detection:
        return self._items[index]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Detections) and self._items == other._items

    def __repr__(self) -> str:
        return f"Detections({list(self._items)!r})"

    @property
    def items(self) -> Tuple[Detection, ...]:
        return self._items

    def to_records(self) -> List[DetectionRecord]:
        return [d.to_record() for d in self._items]

    @classmethod
    def from_records(cls, records: Sequence[dict]) -> 'Detections':
        return cls([Detection.from_record(r) for r in records])


BoxLike = Union[GroundTruthBox, Detection, Tuple[float, float, float, float]]


def _corners(box: BoxLike) -> Tuple[float, float, float, float]:
    if isinstance(box, tuple):
        return box
    return box.corners


def iou(a: BoxLike, b: BoxLike) -> float:
    """Intersection over union; 0 for disjoint or zero-area boxes"""
    ax1, ay1, ax2, ay2 = _corners(a)
    bx1, by1, bx2, by2 = _corners(b)
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    if union <= 0:
        return 0.0
    return min(1.0, inter / union)


def nms(detections: Sequence[Detection], iou_thresh: float = 0.5) -> Detections:
    """Class-wise greedy suppression: drop a box whose IoU with a kept same-class box exceeds iou_thresh"""
    kept: List[Detection] = []
    for candidate in Detections(detections):
        if all(other.class_id != candidate.class_id or iou(other, candidate) <= iou_thresh for other in kept):
            kept.append(candidate)
    return Detections(kept)
