# -*- coding: utf-8 -*-
"""
Dual Encoder - frozen toy image/text encoder pair sharing a 32-d embedding space

Image path, split at layer 1 so steered features can be injected:
    layer 1 : conv 3 -> c (3x3, stride 2, same padding) + ReLU          [c, H/2, W/2]
    tail    : conv c -> 16 (3x3, stride 2, same padding) + ReLU
              -> global average pool -> proj (16 -> 32) -> l2 normalize
Text path: whitespace tokens hashed with FNV-1a 64 into 64 buckets, bag-of-buckets
count vector -> text_proj (64 -> 32) -> l2 normalize.

Weights are derived from a seed and never trained or mutated.
"""
import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from src.core.conv import conv2d, conv2d_input_grad, im2col
from src.core.errors import DegenerateInputError, FileFormatError, ShapeError
from src.core.seeded_rng import SeededRng
from src.core.tensor import Distribution, Tensor, l2_normalize, rng_fill


EMBED_DIM = 32
TAIL_CHANNELS = 16
VOCAB_DIM = 64
KERNEL = 3
STRIDE = 2
PAD = 1

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3

WEIGHTS_MAGIC = b"P2AW"
WEIGHTS_VERSION = 1
_WEIGHTS_FORMAT = struct.Struct("<4sHHQ")


def _readonly(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=np.float64, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class EncoderWeights:
    """Frozen encoder parameters, re-derivable from (seed, layer1_channels)"""
    seed: int
    layer1_channels: int
    stem_w: np.ndarray
    stem_b: np.ndarray
    tail_w: np.ndarray
    tail_b: np.ndarray
    proj: np.ndarray
    text_proj: np.ndarray

    @classmethod
    def derive(cls, seed: int, layer1_channels: int = 8) -> 'EncoderWeights':
        """Every tensor ~ normal(0, 1/sqrt(fan_in)) from its own child seed, fixed order"""
        if layer1_channels <= 0:
            raise ShapeError(f"layer1_channels must be positive, got {layer1_channels}")
        c = layer1_channels
        rng = SeededRng(seed)
        specs = [
            ((c, 3, KERNEL, KERNEL), 3 * KERNEL * KERNEL),
            ((c,), 3 * KERNEL * KERNEL),
            ((TAIL_CHANNELS, c, KERNEL, KERNEL), c * KERNEL * KERNEL),
            ((TAIL_CHANNELS,), c * KERNEL * KERNEL),
            ((EMBED_DIM, TAIL_CHANNELS), TAIL_CHANNELS),
            ((EMBED_DIM, VOCAB_DIM), VOCAB_DIM),
        ]
        arrays = [
            rng_fill(shape, rng.spawn_seed(), Distribution.normal(1.0 / np.sqrt(fan_in))).data
            for shape, fan_in in specs
        ]
        return cls(seed, c, *(_readonly(a) for a in arrays))

    def without_bias(self) -> 'EncoderWeights':
        """Same weights with both conv biases zeroed (homogeneity checks)"""
        return EncoderWeights(
            self.seed, self.layer1_channels,
            self.stem_w, _readonly(np.zeros_like(self.stem_b)),
            self.tail_w, _readonly(np.zeros_like(self.tail_b)),
            self.proj, self.text_proj,
        )

    def fingerprint(self) -> str:
        """SHA-256 over every parameter byte (frozen-contract checks)"""
        digest = hashlib.sha256()
        for array in (self.stem_w, self.stem_b, self.tail_w, self.tail_b, self.proj, self.text_proj):
            digest.update(array.tobytes())
        return digest.hexdigest()

    def save(self, path: Union[str, Path]) -> None:
        """Weights file: magic + version + layer1 width + seed; weights are re-derived on load"""
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(_WEIGHTS_FORMAT.pack(WEIGHTS_MAGIC, WEIGHTS_VERSION, self.layer1_channels, self.seed))

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'EncoderWeights':
        blob = Path(path).read_bytes()
        if len(blob) != _WEIGHTS_FORMAT.size:
            raise FileFormatError(f"{path}: weights file must be {_WEIGHTS_FORMAT.size} bytes")
        magic, version, channels, seed = _WEIGHTS_FORMAT.unpack(blob)
        if magic != WEIGHTS_MAGIC or version != WEIGHTS_VERSION:
            raise FileFormatError(f"{path}: not a P2AW v{WEIGHTS_VERSION} file")
        return cls.derive(seed, channels)


@dataclass(frozen=True, eq=False)
class Embedding:
    """Unit-norm vector in the shared embedding space"""
    vec: Tensor

    @classmethod
    def from_vector(cls, v: np.ndarray) -> 'Embedding':
        return cls(l2_normalize(Tensor(v)))

    @property
    def values(self) -> np.ndarray:
        return self.vec.data

    def cosine(self, other: 'Embedding') -> float:
        return float(self.values @ other.values)


@dataclass(frozen=True)
class PromptString:
    """Lowercase, single-space separated, trimmed, non-empty prompt text"""
    text: str

    def __post_init__(self):
        normalized = " ".join(self.text.lower().split())
        if not normalized:
            raise DegenerateInputError("prompt is empty")
        object.__setattr__(self, "text", normalized)

    @property
    def tokens(self) -> Tuple[str, ...]:
        return tuple(self.text.split(" "))


@dataclass
class EmbeddingTrace:
    """Intermediate values of embed_from_layer1 kept for the backward pass"""
    in_shape: Tuple[int, int, int]
    pre: np.ndarray
    pooled: np.ndarray
    u: np.ndarray
    embedding: Embedding


def _check_image(img: Tensor) -> None:
    if img.rank != 3 or img.shape[0] != 3:
        raise ShapeError(f"image must be [3,H,W], got {img.shape}")
    _, h, w = img.shape
    if h % 2 or w % 2 or h < 8 or w < 8:
        raise ShapeError(f"image height/width must be even and >= 8, got {h}x{w}")


def _check_layer1(f: Tensor, w: EncoderWeights) -> None:
    if f.rank != 3 or f.shape[0] != w.layer1_channels:
        raise ShapeError(f"layer-1 feature map must be [{w.layer1_channels},h,w], got {f.shape}")


def layer1_array(img: np.ndarray, w: EncoderWeights) -> np.ndarray:
    return np.maximum(conv2d(img, w.stem_w, w.stem_b, STRIDE, PAD), 0.0)


def encode_image_layer1(img: Tensor, w: EncoderWeights) -> Tensor:
    """Stem convolution + ReLU: [3,H,W] -> [c,H/2,W/2]"""
    _check_image(img)
    return Tensor(layer1_array(img.data, w))


def tail_preactivation(f: np.ndarray, w: EncoderWeights) -> np.ndarray:
    """Tail conv output before ReLU, [16, ceil(h/2), ceil(w/2)]"""
    return conv2d(f, w.tail_w, w.tail_b, STRIDE, PAD)


def trace_embedding(f: np.ndarray, w: EncoderWeights) -> EmbeddingTrace:
    pre = tail_preactivation(f, w)
    pooled = np.maximum(pre, 0.0).mean(axis=(1, 2))
    u = w.proj @ pooled
    if not np.any(u):
        raise DegenerateInputError("pre-normalization embedding is the zero vector")
    return EmbeddingTrace(tuple(f.shape), pre, pooled, u, Embedding.from_vector(u))


def embedding_vjp(trace: EmbeddingTrace, w: EncoderWeights, grad_u: np.ndarray) -> np.ndarray:
    """dL/df for a loss whose gradient w.r.t. the pre-normalization vector u is grad_u"""
    grad_pooled = w.proj.T @ grad_u
    sites = trace.pre.shape[1] * trace.pre.shape[2]
    grad_pre = (trace.pre > 0.0) * (grad_pooled[:, None, None] / sites)
    return conv2d_input_grad(grad_pre, w.tail_w, trace.in_shape, STRIDE, PAD)


def embed_from_layer1(f: Tensor, w: EncoderWeights) -> Embedding:
    """Tail conv + ReLU -> average pool -> proj -> l2 normalize"""
    _check_layer1(f, w)
    return trace_embedding(f.data, w).embedding


def encode_image(img: Tensor, w: EncoderWeights) -> Embedding:
    """Full image encoder in one pass (reference path for the layer-1 split)"""
    _check_image(img)
    cols, ho, wo = im2col(img.data, KERNEL, STRIDE, PAD)
    hidden = np.maximum(cols @ w.stem_w.reshape(w.layer1_channels, -1).T + w.stem_b, 0.0)
    hidden = hidden.T.reshape(w.layer1_channels, ho, wo)
    cols, _, _ = im2col(hidden, KERNEL, STRIDE, PAD)
    tail = np.maximum(cols @ w.tail_w.reshape(TAIL_CHANNELS, -1).T + w.tail_b, 0.0)
    u = w.proj @ tail.mean(axis=0)
    if not np.any(u):
        raise DegenerateInputError("image embedding is the zero vector")
    return Embedding.from_vector(u)


def fnv1a_64(token: str) -> int:
    value = FNV_OFFSET
    for byte in token.encode("utf-8"):
        value ^= byte
        value = (value * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return value


def bag_of_buckets(prompt: PromptString) -> np.ndarray:
    counts = np.zeros(VOCAB_DIM)
    for token in prompt.tokens:
        counts[fnv1a_64(token) % VOCAB_DIM] += 1.0
    return counts


def encode_text(p: Union[PromptString, str], w: EncoderWeights) -> Embedding:
    """Token-order invariant prompt embedding"""
    prompt = p if isinstance(p, PromptString) else PromptString(p)
    return Embedding.from_vector(w.text_proj @ bag_of_buckets(prompt))
