# -*- coding: utf-8 -*-
"""
PIN - prompt-driven instance normalization, cosine loss and its analytic style gradient

    pin(f, s)_k = s.sigma_k * (f_k - mean(f_k)) / (std(f_k) + eps) + s.mu_k
    L(a, b)     = 1 - a.b / (|a| |b|)

style_grad differentiates L(embed_from_layer1(pin(f, s)), trg) with respect to
s.mu and s.sigma through the tail conv, ReLU (subgradient 0 at 0), average
pooling, projection and normalization.
"""
from dataclasses import dataclass
from typing import NamedTuple, Tuple, Union

import numpy as np

from src.core.errors import DegenerateInputError, NonFiniteError, ShapeError
from src.core.tensor import ChannelStats, Tensor, channel_stats
from src.encoder.dual_encoder import Embedding, EncoderWeights, embedding_vjp, trace_embedding


DEFAULT_EPS = 1e-5


@dataclass(frozen=True, eq=False)
class StyleStats:
    """Optimizable per-channel target mean / std"""
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.array(self.mu, dtype=np.float64, copy=True)
        sigma = np.array(self.sigma, dtype=np.float64, copy=True)
        if mu.ndim != 1 or mu.shape != sigma.shape:
            raise ShapeError(f"style mu/sigma must be equal-length vectors, got {mu.shape} and {sigma.shape}")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
            raise NonFiniteError("style statistics must be finite")
        mu.flags.writeable = False
        sigma.flags.writeable = False
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def from_channel_stats(cls, stats: ChannelStats) -> 'StyleStats':
        return cls(stats.mu, stats.sigma)

    @property
    def channels(self) -> int:
        return int(self.mu.shape[0])

    def equals(self, other: 'StyleStats') -> bool:
        return self.mu.tobytes() == other.mu.tobytes() and self.sigma.tobytes() == other.sigma.tobytes()


class LossAndGrad(NamedTuple):
    loss: float
    grad_mu: np.ndarray
    grad_sigma: np.ndarray


def standardize(f: Tensor, eps: float = DEFAULT_EPS) -> np.ndarray:
    """(f - mean) / (std + eps) per channel"""
    stats = channel_stats(f)
    return (f.data - stats.mu[:, None, None]) / (stats.sigma[:, None, None] + eps)


def _apply_style(z: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    return sigma[:, None, None] * z + mu[:, None, None]


def pin(f: Tensor, s: StyleStats, eps: float = DEFAULT_EPS) -> Tensor:
    if f.rank != 3:
        raise ShapeError(f"pin expects a [c,h,w] feature map, got {f.shape}")
    if s.channels != f.shape[0]:
        raise ShapeError(f"style has {s.channels} channels, feature map has {f.shape[0]}")
    return Tensor(_apply_style(standardize(f, eps), s.mu, s.sigma))


def _as_vector(x: Union[Embedding, Tensor, np.ndarray]) -> np.ndarray:
    if isinstance(x, Embedding):
        return x.values
    if isinstance(x, Tensor):
        return x.data
    return np.asarray(x, dtype=np.float64)


def cosine_loss(a: Union[Embedding, Tensor, np.ndarray], b: Union[Embedding, Tensor, np.ndarray]) -> float:
    """1 - cosine similarity; accepts unnormalized inputs"""
    va, vb = _as_vector(a), _as_vector(b)
    na, nb = float(np.linalg.norm(va)), float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise DegenerateInputError("cosine loss of a zero-norm vector")
    cos = float(va @ vb) / (na * nb)
    return 1.0 - min(1.0, max(-1.0, cos))


def loss_and_grad(z: np.ndarray, mu: np.ndarray, sigma: np.ndarray, trg: Embedding,
                  w: EncoderWeights) -> LossAndGrad:
    """Loss and style gradient for a pre-standardized feature map z"""
    trace = trace_embedding(_apply_style(z, mu, sigma), w)
    norm = float(np.linalg.norm(trace.u))
    e = trace.u / norm
    t = trg.values
    cos = float(e @ t)
    grad_u = -(t - cos * e) / norm
    grad_f = embedding_vjp(trace, w, grad_u)
    return LossAndGrad(1.0 - cos, grad_f.sum(axis=(1, 2)), (grad_f * z).sum(axis=(1, 2)))


def steered_loss(z: np.ndarray, mu: np.ndarray, sigma: np.ndarray, trg: Embedding, w: EncoderWeights) -> float:
    trace = trace_embedding(_apply_style(z, mu, sigma), w)
    return cosine_loss(trace.u, trg)


def style_grad(f: Tensor, s: StyleStats, trg: Embedding, w: EncoderWeights,
               eps: float = DEFAULT_EPS) -> Tuple[np.ndarray, np.ndarray]:
    """(dL/dmu, dL/dsigma) of cosine_loss(embed_from_layer1(pin(f, s)), trg)"""
    if f.rank != 3 or s.channels != f.shape[0]:
        raise ShapeError(f"style with {s.channels} channels does not match feature map {f.shape}")
    if f.shape[0] != w.layer1_channels:
        raise ShapeError(f"encoder expects {w.layer1_channels} layer-1 channels, got {f.shape[0]}")
    result = loss_and_grad(standardize(f, eps), s.mu, s.sigma, trg, w)
    return result.grad_mu, result.grad_sigma
