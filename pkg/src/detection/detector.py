# -*- coding: utf-8 -*-
"""
Detector - anchor-free per-cell detection head and the student network

Per cell of a layer-1 grid (one cell per 2x2 pixels) the head reads the
(2r+1)x(2r+1) zero-padded neighbourhood of every channel and emits 8 values:

    0      objectness logit
    1..3   class logits
    4..7   left / top / right / bottom distance from the cell center, in 16 px units

The head's inputs are scaled by 1/sqrt(fan_in). TeacherHead runs on the frozen
encoder's layer-1 features; StudentModel owns its own stem (3 -> c, 3x3, stride 2)
followed by an identical head, all trainable.
"""
import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, NamedTuple, Optional, Tuple, Type, TypeVar, Union

import numpy as np

from src.core.artifacts import read_json, write_json
from src.core.conv import conv2d_input_grad, conv2d_weight_grad, im2col
from src.core.errors import SchemaError, ShapeError
from src.core.seeded_rng import SeededRng
from src.core.tensor import Distribution, rng_fill
from src.core.types import ArtifactMeta
from src.detection.boxes import NUM_CLASSES


OUTPUTS = 1 + NUM_CLASSES + 4
OBJECTNESS = 0
CLASS_SLICE = slice(1, 1 + NUM_CLASSES)
BOX_SLICE = slice(1 + NUM_CLASSES, OUTPUTS)
OFFSET_UNIT = 16.0
CELL_SIZE = 2

STEM_KERNEL = 3
STEM_STRIDE = 2
STEM_PAD = 1

Params = Dict[str, np.ndarray]


def _readonly(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=np.float64, copy=True)
    out.flags.writeable = False
    return out


class HeadPass(NamedTuple):
    cols: np.ndarray
    out: np.ndarray
    in_shape: Tuple[int, int, int]


H = TypeVar("H", bound="DetectorHead")


@dataclass(frozen=True, eq=False)
class DetectorHead:
    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        weight = _readonly(self.weight)
        bias = _readonly(self.bias)
        if weight.ndim != 4 or weight.shape[0] != OUTPUTS or weight.shape[2] != weight.shape[3] \
                or weight.shape[2] % 2 == 0:
            raise ShapeError(f"head weight must be [{OUTPUTS},c,k,k] with odd k, got {weight.shape}")
        if bias.shape != (OUTPUTS,):
            raise ShapeError(f"head bias must be [{OUTPUTS}], got {bias.shape}")
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "bias", bias)

    @classmethod
    def init(cls: Type[H], seed: int, in_channels: int, radius: int = 4, init_scale: float = 0.01) -> H:
        kernel = 2 * radius + 1
        weight = rng_fill((OUTPUTS, in_channels, kernel, kernel), seed, Distribution.normal(init_scale))
        return cls(weight.data, np.zeros(OUTPUTS))

    @property
    def in_channels(self) -> int:
        return int(self.weight.shape[1])

    @property
    def kernel(self) -> int:
        return int(self.weight.shape[2])

    @property
    def radius(self) -> int:
        return (self.kernel - 1) // 2

    @property
    def scale(self) -> float:
        return 1.0 / float(np.sqrt(self.in_channels * self.kernel * self.kernel))

    def forward(self, f: np.ndarray) -> HeadPass:
        """[c,h,w] features -> [8,h,w] raw outputs"""
        if f.ndim != 3 or f.shape[0] != self.in_channels:
            raise ShapeError(f"head expects [{self.in_channels},h,w] features, got {f.shape}")
        cols, ho, wo = im2col(f, self.kernel, 1, self.radius)
        out = (cols @ self.weight.reshape(OUTPUTS, -1).T) * self.scale + self.bias
        return HeadPass(cols, out.T.reshape(OUTPUTS, ho, wo), tuple(f.shape))

    def backward(self, hp: HeadPass, grad_out: np.ndarray,
                 need_input: bool = False) -> Tuple[Params, Optional[np.ndarray]]:
        d_weight, d_bias = conv2d_weight_grad(grad_out, hp.cols, self.weight.shape)
        grads = {"weight": d_weight * self.scale, "bias": d_bias}
        d_input = None
        if need_input:
            d_input = conv2d_input_grad(grad_out * self.scale, self.weight, hp.in_shape, 1, self.radius)
        return grads, d_input

    def parameters(self) -> Params:
        return {"weight": self.weight, "bias": self.bias}

    def with_parameters(self: H, params: Params) -> H:
        return type(self)(params["weight"], params["bias"])

    def fingerprint(self) -> str:
        return _fingerprint(self.parameters())


class TeacherHead(DetectorHead):
    """Head over the frozen encoder's layer-1 features"""


class StudentPass(NamedTuple):
    stem_cols: np.ndarray
    stem_pre: np.ndarray
    head_pass: HeadPass

    @property
    def out(self) -> np.ndarray:
        return self.head_pass.out


@dataclass(frozen=True, eq=False)
class StudentModel:
    """Independent stem + head, every parameter trainable"""
    stem_w: np.ndarray
    stem_b: np.ndarray
    head: DetectorHead

    def __post_init__(self):
        stem_w = _readonly(self.stem_w)
        stem_b = _readonly(self.stem_b)
        if stem_w.shape[1:] != (3, STEM_KERNEL, STEM_KERNEL) or stem_b.shape != (stem_w.shape[0],):
            raise ShapeError(f"student stem must be [c,3,3,3] + [c], got {stem_w.shape} + {stem_b.shape}")
        if stem_w.shape[0] != self.head.in_channels:
            raise ShapeError(f"stem width {stem_w.shape[0]} does not feed a {self.head.in_channels}-channel head")
        object.__setattr__(self, "stem_w", stem_w)
        object.__setattr__(self, "stem_b", stem_b)

    @classmethod
    def init(cls, seed: int, channels: int = 8, radius: int = 4, init_scale: float = 0.01) -> 'StudentModel':
        rng = SeededRng(seed)
        fan_in = 3 * STEM_KERNEL * STEM_KERNEL
        stem_w = rng_fill((channels, 3, STEM_KERNEL, STEM_KERNEL), rng.spawn_seed(),
                          Distribution.normal(1.0 / np.sqrt(fan_in)))
        stem_b = rng_fill((channels,), rng.spawn_seed(), Distribution.normal(1.0 / np.sqrt(fan_in)))
        head = DetectorHead.init(rng.spawn_seed(), channels, radius, init_scale)
        return cls(stem_w.data, stem_b.data, head)

    def features(self, image: np.ndarray) -> np.ndarray:
        """Stem + ReLU, [3,H,W] -> [c,H/2,W/2]"""
        return np.maximum(self._stem(image)[1], 0.0)

    def _stem(self, image: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        if image.ndim != 3 or image.shape[0] != 3:
            raise ShapeError(f"student expects a [3,H,W] image, got {image.shape}")
        cols, ho, wo = im2col(image, STEM_KERNEL, STEM_STRIDE, STEM_PAD)
        channels = self.stem_w.shape[0]
        pre = (cols @ self.stem_w.reshape(channels, -1).T + self.stem_b).T.reshape(channels, ho, wo)
        return cols, pre

    def forward(self, image: np.ndarray) -> StudentPass:
        cols, pre = self._stem(image)
        return StudentPass(cols, pre, self.head.forward(np.maximum(pre, 0.0)))

    def backward(self, sp: StudentPass, grad_out: np.ndarray) -> Params:
        head_grads, d_features = self.head.backward(sp.head_pass, grad_out, need_input=True)
        d_pre = d_features * (sp.stem_pre > 0.0)
        d_stem_w, d_stem_b = conv2d_weight_grad(d_pre, sp.stem_cols, self.stem_w.shape)
        return {
            "stem_w": d_stem_w,
            "stem_b": d_stem_b,
            "head.weight": head_grads["weight"],
            "head.bias": head_grads["bias"],
        }

    def parameters(self) -> Params:
        return {
            "stem_w": self.stem_w,
            "stem_b": self.stem_b,
            "head.weight": self.head.weight,
            "head.bias": self.head.bias,
        }

    def with_parameters(self, params: Params) -> 'StudentModel':
        head = self.head.with_parameters({"weight": params["head.weight"], "bias": params["head.bias"]})
        return StudentModel(params["stem_w"], params["stem_b"], head)

    def fingerprint(self) -> str:
        return _fingerprint(self.parameters())


Model = Union[TeacherHead, StudentModel]


def _fingerprint(params: Params) -> str:
    digest = hashlib.sha256()
    for name in sorted(params):
        digest.update(name.encode("utf-8"))
        digest.update(params[name].tobytes())
    return digest.hexdigest()


# Persistence: JSON, one {"shape", "values"} entry per parameter

def save_model(path: Union[str, Path], model: Model, meta: Optional[ArtifactMeta] = None) -> Path:
    kind = "teacher_head" if isinstance(model, DetectorHead) else "student"
    parameters: Dict[str, Any] = {
        name: {"shape": list(array.shape), "values": [float(v) for v in array.reshape(-1)]}
        for name, array in model.parameters().items()
    }
    return write_json(path, {"kind": kind, "parameters": parameters}, meta)


def _read_parameters(path: Union[str, Path], kind: str) -> Params:
    data = read_json(path)
    if data.get("kind") != kind:
        raise SchemaError(f"{path}: expected a {kind} model file, found {data.get('kind')!r}")
    try:
        return {
            name: np.asarray(entry["values"], dtype=np.float64).reshape(entry["shape"])
            for name, entry in data["parameters"].items()
        }
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise SchemaError(f"{path}: malformed parameters: {e}") from e


def load_teacher_head(path: Union[str, Path]) -> TeacherHead:
    params = _read_parameters(path, "teacher_head")
    try:
        return TeacherHead(params["weight"], params["bias"])
    except KeyError as e:
        raise SchemaError(f"{path}: missing parameter {e}") from e


def load_student(path: Union[str, Path]) -> StudentModel:
    params = _read_parameters(path, "student")
    try:
        head = DetectorHead(params["head.weight"], params["head.bias"])
        return StudentModel(params["stem_w"], params["stem_b"], head)
    except KeyError as e:
        raise SchemaError(f"{path}: missing parameter {e}") from e
