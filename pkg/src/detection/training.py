# -*- coding: utf-8 -*-
"""
Training - detection loss, momentum SGD and the four training stages

    pretrain_teacher / pretrain_student   labeled source data
    finetune_teacher                      cached source features re-styled by PIN
    adapt_student                         target images + teacher pseudo-labels

Every stage visits its samples in a seeded permutation per epoch and applies one
momentum-SGD step per sample. An optional step decay multiplies the learning
rate by gamma every `step` epochs.
"""
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, Generic, List, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np
from scipy.special import expit, log_softmax, softmax

from src.core.errors import ConfigError, EmptyInputError
from src.core.logger import get_logger, log_elapsed
from src.core.seeded_rng import SeededRng
from src.core.tensor import Tensor
from src.detection.boxes import Detection, Detections, GroundTruthBox
from src.detection.detector import (
    BOX_SLICE, CELL_SIZE, CLASS_SLICE, OBJECTNESS, OFFSET_UNIT, DetectorHead, Params, StudentModel, TeacherHead,
)
from src.detection.postprocess import DetectConfig, cell_center, teacher_detect
from src.detection.source_cache import SourceCache
from src.encoder.dual_encoder import EncoderWeights, encode_image_layer1
from src.steering.pin import pin
from src.steering.steer import StyleSet

logger = get_logger(__name__)

M = TypeVar("M", TeacherHead, StudentModel)
S = TypeVar("S")
BoxLike = Union[GroundTruthBox, Detection]


@dataclass
class CellTargets:
    """Center-cell assignment of boxes on an h x w grid"""
    positive: np.ndarray
    classes: np.ndarray
    offsets: np.ndarray

    @property
    def count(self) -> int:
        return int(self.positive.sum())


def assign_targets(boxes: Sequence[BoxLike], grid: Tuple[int, int]) -> CellTargets:
    """Each box goes to the cell holding its center; a later box wins a shared cell"""
    grid_h, grid_w = grid
    positive = np.zeros(grid, dtype=bool)
    classes = np.zeros(grid, dtype=np.int64)
    offsets = np.zeros((4, grid_h, grid_w))
    for box in boxes:
        i = min(int(((box.y1 + box.y2) / 2.0) // CELL_SIZE), grid_h - 1)
        j = min(int(((box.x1 + box.x2) / 2.0) // CELL_SIZE), grid_w - 1)
        cx, cy = cell_center(i, j)
        positive[i, j] = True
        classes[i, j] = box.class_id
        offsets[:, i, j] = np.maximum([cx - box.x1, cy - box.y1, box.x2 - cx, box.y2 - cy], 0.0) / OFFSET_UNIT
    return CellTargets(positive, classes, offsets)


def detection_loss(out: np.ndarray, targets: CellTargets) -> Tuple[float, np.ndarray]:
    """Loss and d(loss)/d(out) for one image

    balanced objectness BCE (positive mean + negative mean), class cross-entropy
    and L1 offsets averaged over positive cells. No positives: negative term only.
    """
    grad = np.zeros_like(out)
    pos = targets.positive
    neg = ~pos
    n_pos, n_neg = int(pos.sum()), int(neg.sum())
    obj = out[OBJECTNESS]
    prob = expit(obj)
    loss = 0.0

    if n_neg:
        loss += float(np.logaddexp(0.0, obj[neg]).mean())
        grad[OBJECTNESS][neg] = prob[neg] / n_neg
    if n_pos:
        loss += float(np.logaddexp(0.0, -obj[pos]).mean())
        grad[OBJECTNESS][pos] = (prob[pos] - 1.0) / n_pos

        logits = out[CLASS_SLICE][:, pos]
        labels = targets.classes[pos]
        columns = np.arange(n_pos)
        loss += float(-log_softmax(logits, axis=0)[labels, columns].mean())
        d_logits = softmax(logits, axis=0)
        d_logits[labels, columns] -= 1.0
        grad[CLASS_SLICE][:, pos] = d_logits / n_pos

        diff = out[BOX_SLICE][:, pos] - targets.offsets[:, pos]
        loss += float(np.abs(diff).sum(axis=0).mean())
        grad[BOX_SLICE][:, pos] = np.sign(diff) / n_pos
    return loss, grad


class MomentumSGD:
    """v <- m*v - lr*g; p <- p + v"""

    def __init__(self, lr: float, momentum: float = 0.9):
        if lr < 0:
            raise ConfigError(f"learning rate must be >= 0, got {lr}")
        if not 0.0 <= momentum < 1.0:
            raise ConfigError(f"momentum must lie in [0, 1), got {momentum}")
        self.lr = lr
        self.momentum = momentum
        self._velocity: Dict[str, np.ndarray] = {}

    def step(self, params: Params, grads: Params) -> Params:
        if self.lr == 0.0:
            return params
        updated = {}
        for name, value in params.items():
            velocity = self.momentum * self._velocity.get(name, 0.0) - self.lr * grads[name]
            self._velocity[name] = velocity
            updated[name] = value + velocity
        return updated


@dataclass(frozen=True)
class LrDecay:
    """lr * gamma ** (epoch // step); step 0 keeps the rate constant"""
    step: int = 0
    gamma: float = 0.1

    def __post_init__(self):
        if not isinstance(self.step, int) or self.step < 0:
            raise ConfigError(f"lr decay step must be a non-negative integer, got {self.step!r}")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError(f"lr decay gamma must lie in (0, 1], got {self.gamma}")

    def rate(self, lr: float, epoch: int) -> float:
        if self.step == 0:
            return lr
        return lr * self.gamma ** (epoch // self.step)


@dataclass
class TrainingResult(Generic[M]):
    model: M
    epoch_losses: List[float] = field(default_factory=list)


def _check_schedule(epochs: int, lr: float) -> None:
    if epochs < 0:
        raise ConfigError(f"epochs must be >= 0, got {epochs}")
    if lr < 0:
        raise ConfigError(f"learning rate must be >= 0, got {lr}")


def _fit(model: M, samples: Sequence[S], step: Callable[[M, S], Tuple[float, Params]],
         epochs: int, lr: float, momentum: float, rng: SeededRng, stage: str,
         decay: LrDecay = LrDecay()) -> TrainingResult[M]:
    _check_schedule(epochs, lr)
    optimizer = MomentumSGD(lr, momentum)
    losses: List[float] = []
    for epoch in range(epochs):
        start = time.perf_counter()
        optimizer.lr = decay.rate(lr, epoch)
        total = 0.0
        for index in rng.permutation(len(samples)):
            loss, grads = step(model, samples[index])
            model = model.with_parameters(optimizer.step(model.parameters(), grads))
            total += loss
        losses.append(total / len(samples))
        log_elapsed(f"{stage} epoch {epoch + 1}/{epochs}", start,
                    f"loss {losses[-1]:.6f} lr {optimizer.lr:.5f}")
    return TrainingResult(model, losses)


def _head_step(head: TeacherHead, sample: Tuple[np.ndarray, CellTargets]) -> Tuple[float, Params]:
    features, targets = sample
    hp = head.forward(features)
    loss, d_out = detection_loss(hp.out, targets)
    grads, _ = head.backward(hp, d_out)
    return loss, grads


def _student_step(student: StudentModel, sample: Tuple[np.ndarray, CellTargets]) -> Tuple[float, Params]:
    image, targets = sample
    sp = student.forward(image)
    loss, d_out = detection_loss(sp.out, targets)
    return loss, student.backward(sp, d_out)


def _grid_of(features: np.ndarray) -> Tuple[int, int]:
    return int(features.shape[1]), int(features.shape[2])


def pretrain_teacher(head: TeacherHead, features: Sequence[Tensor], truths: Sequence[Sequence[GroundTruthBox]],
                     epochs: int, lr: float, rng: SeededRng, momentum: float = 0.9,
                     decay: LrDecay = LrDecay()) -> TrainingResult[TeacherHead]:
    """Head training on labeled source features (frozen encoder)"""
    if len(features) != len(truths):
        raise ValueError(f"{len(features)} feature maps but {len(truths)} truth lists")
    if not features:
        raise EmptyInputError("pretraining needs at least one labeled scene")
    samples = [(f.data, assign_targets(t, _grid_of(f.data))) for f, t in zip(features, truths)]
    return _fit(head, samples, _head_step, epochs, lr, momentum, rng, "pretrain teacher", decay)


def pretrain_student(student: StudentModel, images: Sequence[Tensor], truths: Sequence[Sequence[BoxLike]],
                     epochs: int, lr: float, rng: SeededRng, momentum: float = 0.9,
                     stage: str = "pretrain student", decay: LrDecay = LrDecay()) -> TrainingResult[StudentModel]:
    """Supervised student training on (image, boxes) pairs"""
    if len(images) != len(truths):
        raise ValueError(f"{len(images)} images but {len(truths)} box lists")
    if not images:
        raise EmptyInputError("student training needs at least one image")
    samples = []
    for image, boxes in zip(images, truths):
        grid = (image.shape[1] // CELL_SIZE, image.shape[2] // CELL_SIZE)
        samples.append((image.data, assign_targets(boxes, grid)))
    return _fit(student, samples, _student_step, epochs, lr, momentum, rng, stage, decay)


def finetune_teacher_trace(cache: SourceCache, styles: StyleSet, head: TeacherHead, epochs: int, lr: float,
                           rng: SeededRng, momentum: float = 0.9,
                           decay: LrDecay = LrDecay()) -> TrainingResult[TeacherHead]:
    """finetune_teacher plus the per-epoch mean loss"""
    if len(styles) == 0:
        raise EmptyInputError("fine-tuning needs a non-empty style set")
    eps = styles.config_echo.eps
    samples = [(entry.features, assign_targets(entry.scene.truth, _grid_of(entry.features.data)))
               for entry in cache.entries]

    def step(model: TeacherHead, sample: Tuple[Tensor, CellTargets]) -> Tuple[float, Params]:
        features, targets = sample
        steered = pin(features, styles.sample(rng), eps)
        return _head_step(model, (steered.data, targets))

    return _fit(head, samples, step, epochs, lr, momentum, rng, "finetune teacher", decay)


def finetune_teacher(cache: SourceCache, styles: StyleSet, head: TeacherHead, epochs: int, lr: float,
                     rng: SeededRng, momentum: float = 0.9, decay: LrDecay = LrDecay()) -> TeacherHead:
    """Head-only fine-tuning on PIN-steered cached features against the original truth"""
    return finetune_teacher_trace(cache, styles, head, epochs, lr, rng, momentum, decay).model


def pseudo_label(d: Detections, tau: float) -> Detections:
    """Detections with confidence >= tau, order kept"""
    if not 0.0 <= tau <= 1.0:
        raise ConfigError(f"tau must lie in [0, 1], got {tau}")
    return Detections([det for det in d if det.confidence >= tau])


def label_target_images(images: Sequence[Tensor], teacher_head: TeacherHead, w: EncoderWeights, tau: float,
                        detect: DetectConfig = DetectConfig(),
                        styles: Optional[StyleSet] = None) -> List[Detections]:
    """Teacher pseudo-labels, one Detections per target image

    With a style set, each image's layer-1 features are first re-styled to the
    set's centroid, so the teacher reads target content in the style it was
    fine-tuned on.
    """
    if styles is None:
        return [pseudo_label(teacher_detect(image, teacher_head, w, cfg=detect), tau) for image in images]
    centroid = styles.centroid()
    eps = styles.config_echo.eps
    return [
        pseudo_label(teacher_detect(pin(encode_image_layer1(image, w), centroid, eps), teacher_head, w, cfg=detect),
                     tau)
        for image in images
    ]


@dataclass
class AdaptationResult(TrainingResult[StudentModel]):
    labels: List[Detections] = field(default_factory=list)
    skipped: bool = False

    @property
    def labeled_fraction(self) -> float:
        if not self.labels:
            return 0.0
        return sum(1 for d in self.labels if len(d)) / len(self.labels)


def adapt_student_trace(student: StudentModel, target_images: Sequence[Tensor], teacher_head: TeacherHead,
                        w: EncoderWeights, tau: float, epochs: int, lr: float,
                        rng: Optional[SeededRng] = None, momentum: float = 0.9,
                        detect: DetectConfig = DetectConfig(), styles: Optional[StyleSet] = None,
                        min_labeled_fraction: float = 0.0, decay: LrDecay = LrDecay()) -> AdaptationResult:
    """adapt_student plus the pseudo-labels it trained on

    When fewer than min_labeled_fraction of the images carry a pseudo-label the
    student comes back unchanged with skipped set.
    """
    if not target_images:
        raise EmptyInputError("adaptation needs at least one target image")
    if not 0.0 <= min_labeled_fraction <= 1.0:
        raise ConfigError(f"min_labeled_fraction must lie in [0, 1], got {min_labeled_fraction}")
    labels = label_target_images(target_images, teacher_head, w, tau, detect, styles)
    result = AdaptationResult(student, [], labels)
    empty = sum(1 for d in labels if len(d) == 0)
    logger.info(f"Adapt: {sum(len(d) for d in labels)} pseudo-labels over {len(labels)} images "
                f"({empty} empty) at tau={tau}")
    if result.labeled_fraction < min_labeled_fraction:
        logger.warning(f"Adapt: only {result.labeled_fraction:.0%} of target images have a pseudo-label "
                       f"(minimum {min_labeled_fraction:.0%}), keeping the source student")
        result.skipped = True
        return result
    trained = pretrain_student(student, target_images, [list(d) for d in labels], epochs, lr,
                               rng or SeededRng(0), momentum, stage="adapt student", decay=decay)
    result.model = trained.model
    result.epoch_losses = trained.epoch_losses
    return result


def adapt_student(student: StudentModel, target_images: Sequence[Tensor], teacher_head: TeacherHead,
                  w: EncoderWeights, tau: float, epochs: int, lr: float,
                  rng: Optional[SeededRng] = None, momentum: float = 0.9,
                  detect: DetectConfig = DetectConfig(), styles: Optional[StyleSet] = None) -> StudentModel:
    """Student training on teacher pseudo-labels; target images arrive without truth"""
    return adapt_student_trace(student, target_images, teacher_head, w, tau, epochs, lr, rng, momentum,
                               detect, styles).model
