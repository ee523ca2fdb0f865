# -*- coding: utf-8 -*-
"""
Postprocess - decode per-cell head outputs into Detections

confidence = sigmoid(objectness) * max softmax(class logits); the top candidates
above conf_floor are decoded relative to their cell centers, clamped to the
image and passed through class-wise NMS.
"""
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.special import expit, softmax

from src.core.errors import ConfigError
from src.core.tensor import Tensor
from src.detection.boxes import Detection, Detections, nms
from src.detection.detector import (
    BOX_SLICE, CELL_SIZE, CLASS_SLICE, OBJECTNESS, OFFSET_UNIT, DetectorHead, StudentModel,
)
from src.detection.scenes import Scene
from src.encoder.dual_encoder import EncoderWeights, encode_image_layer1


@dataclass(frozen=True)
class DetectConfig:
    conf_floor: float = 0.05
    nms_iou: float = 0.5
    max_candidates: int = 100

    def __post_init__(self):
        message = self.validate()
        if message:
            raise ConfigError(message)

    def validate(self) -> Optional[str]:
        if not 0.0 <= self.conf_floor <= 1.0:
            return f"conf_floor must lie in [0, 1], got {self.conf_floor}"
        if not 0.0 <= self.nms_iou <= 1.0:
            return f"nms_iou must lie in [0, 1], got {self.nms_iou}"
        if self.max_candidates < 1:
            return f"max_candidates must be >= 1, got {self.max_candidates}"
        return None


def cell_center(i: int, j: int) -> Tuple[float, float]:
    """(x, y) pixel center of grid cell (row i, column j)"""
    return CELL_SIZE * j + 1.0, CELL_SIZE * i + 1.0


def decode(out: np.ndarray, image_size: Tuple[int, int], cfg: DetectConfig = DetectConfig()) -> Detections:
    """[8,h,w] raw outputs -> Detections

    Each cell contributes at most one candidate, labeled with its argmax class;
    a runner-up class at the same cell is never emitted. At most
    cfg.max_candidates cells (by confidence) reach NMS.
    """
    height, width = image_size
    grid_w = out.shape[2]
    probs = softmax(out[CLASS_SLICE], axis=0)
    conf = (expit(out[OBJECTNESS]) * probs.max(axis=0)).reshape(-1)
    classes = probs.argmax(axis=0).reshape(-1)
    offsets = np.maximum(out[BOX_SLICE], 0.0).reshape(4, -1) * OFFSET_UNIT

    order = np.argsort(-conf, kind="stable")
    candidates: List[Detection] = []
    for index in order:
        if conf[index] < cfg.conf_floor or len(candidates) >= cfg.max_candidates:
            break
        i, j = divmod(int(index), grid_w)
        cx, cy = cell_center(i, j)
        left, top, right, bottom = offsets[:, index]
        candidates.append(Detection(
            x1=float(np.clip(cx - left, 0.0, width)),
            y1=float(np.clip(cy - top, 0.0, height)),
            x2=float(np.clip(cx + right, 0.0, width)),
            y2=float(np.clip(cy + bottom, 0.0, height)),
            class_id=int(classes[index]),
            confidence=float(conf[index]),
        ))
    return nms(candidates, cfg.nms_iou)


def teacher_detect(scene_or_features: Union[Scene, Tensor], head: DetectorHead, w: EncoderWeights,
                   conf_floor: Optional[float] = None, cfg: Optional[DetectConfig] = None) -> Detections:
    """Teacher inference on a scene, a bare image, or precomputed layer-1 features

    A tensor whose channel count equals the encoder's layer-1 width is taken as
    features; anything else is encoded as an image first. Pass either a bare
    conf_floor (default 0.05) or a full cfg, not both.
    """
    if cfg is not None and conf_floor is not None:
        raise ConfigError("teacher_detect takes conf_floor or cfg, not both")
    if cfg is None:
        cfg = DetectConfig() if conf_floor is None else DetectConfig(conf_floor=conf_floor)
    if isinstance(scene_or_features, Scene):
        features = encode_image_layer1(scene_or_features.image, w).data
    elif scene_or_features.rank == 3 and scene_or_features.shape[0] == w.layer1_channels:
        features = scene_or_features.data
    else:
        features = encode_image_layer1(scene_or_features, w).data
    out = head.forward(features).out
    image_size = (features.shape[1] * CELL_SIZE, features.shape[2] * CELL_SIZE)
    return decode(out, image_size, cfg)


def student_detect(image: Tensor, student: StudentModel, cfg: DetectConfig = DetectConfig()) -> Detections:
    _, height, width = image.shape
    return decode(student.forward(image.data).out, (height, width), cfg)
