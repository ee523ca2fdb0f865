# -*- coding: utf-8 -*-
"""
Metrics - mAP@50 with greedy matching and all-point interpolated AP
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.core.artifacts import write_json
from src.core.errors import ShapeError, UndefinedMetricError
from src.core.types import ArtifactMeta, EvalReportRecord
from src.detection.boxes import Detections, GroundTruthBox, iou


@dataclass(frozen=True)
class EvalReport:
    per_class_ap: Dict[int, float]
    map50: float

    def to_record(self) -> EvalReportRecord:
        return {
            "per_class_ap": {str(k): v for k, v in sorted(self.per_class_ap.items())},
            "map50": self.map50,
        }

    def save(self, path: Union[str, Path], meta: Optional[ArtifactMeta] = None) -> Path:
        return write_json(path, dict(self.to_record()), meta)


def average_precision(tp: Sequence[bool], truth_count: int) -> float:
    """Area under the precision envelope, detections already sorted by confidence"""
    if truth_count <= 0:
        raise UndefinedMetricError("average precision needs at least one truth instance")
    if len(tp) == 0:
        return 0.0
    hits = np.cumsum(np.asarray(tp, dtype=np.float64))
    recall = hits / truth_count
    precision = hits / np.arange(1, len(tp) + 1)
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.nonzero(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


def _class_matches(preds: Sequence[Detections], truths: Sequence[Sequence[GroundTruthBox]],
                   class_id: int, iou_thresh: float) -> List[bool]:
    ranked: List[Tuple[float, int, int]] = []
    for image_index, detections in enumerate(preds):
        for det_index, det in enumerate(detections):
            if det.class_id == class_id:
                ranked.append((-det.confidence, image_index, det_index))
    ranked.sort()

    matched = [[False] * len(t) for t in truths]
    tp: List[bool] = []
    for _, image_index, det_index in ranked:
        det = preds[image_index][det_index]
        best, best_iou = -1, 0.0
        for truth_index, box in enumerate(truths[image_index]):
            if box.class_id != class_id or matched[image_index][truth_index]:
                continue
            overlap = iou(det, box)
            if overlap > best_iou:
                best, best_iou = truth_index, overlap
        if best >= 0 and best_iou >= iou_thresh:
            matched[image_index][best] = True
            tp.append(True)
        else:
            tp.append(False)
    return tp


def evaluate_map(preds: Sequence[Detections], truths: Sequence[Sequence[GroundTruthBox]],
                 iou_thresh: float = 0.5) -> EvalReport:
    """Per-class AP and their mean over classes with at least one truth instance

    Detections of a class are ranked by confidence across images (ties: image
    order, then order within the image) and each one is matched to the unmatched
    truth box of its class with the highest IoU, counted only when IoU >= iou_thresh.
    """
    if len(preds) != len(truths):
        raise ShapeError(f"{len(preds)} prediction lists but {len(truths)} truth lists")
    counts: Dict[int, int] = {}
    for boxes in truths:
        for box in boxes:
            counts[box.class_id] = counts.get(box.class_id, 0) + 1
    if not counts:
        raise UndefinedMetricError("no ground truth at all, mAP is undefined")

    per_class = {
        class_id: average_precision(_class_matches(preds, truths, class_id, iou_thresh), count)
        for class_id, count in sorted(counts.items())
    }
    return EvalReport(per_class, float(np.mean(list(per_class.values()))))
