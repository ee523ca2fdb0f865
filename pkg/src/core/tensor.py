# -*- coding: utf-8 -*-
"""
Tensor Core - immutable dense float64 tensors, channel statistics, seeded fills

Feature maps are stored channel-major [c, h, w]; embeddings are rank-1 [d].
Standard deviations use the population (1/N) convention of instance normalization.
"""
from dataclasses import dataclass
from typing import Literal, Sequence, Tuple, Union

import numpy as np

from src.core.errors import DegenerateInputError, NonFiniteError, ShapeError
from src.core.seeded_rng import SeededRng


Number = Union[int, float]


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=np.float64, copy=True, order="C")
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class Tensor:
    """Immutable float64 tensor; every public constructor checks finiteness"""
    data: np.ndarray

    def __post_init__(self):
        array = _frozen(self.data)
        if not np.all(np.isfinite(array)):
            raise NonFiniteError("tensor entries must be finite")
        object.__setattr__(self, "data", array)

    @classmethod
    def of(cls, values, shape: Sequence[int] = ()) -> 'Tensor':
        """Build from nested values or a flat row-major list plus shape"""
        array = np.asarray(values, dtype=np.float64)
        if shape:
            if int(np.prod(shape)) != array.size:
                raise ShapeError(f"{array.size} values cannot fill shape {tuple(shape)}")
            array = array.reshape(tuple(shape))
        return cls(array)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def rank(self) -> int:
        return self.data.ndim

    @property
    def flat(self) -> np.ndarray:
        """Row-major flat view"""
        return self.data.reshape(-1)

    def numpy(self) -> np.ndarray:
        """Writable copy"""
        return np.array(self.data, copy=True)

    def _binary(self, other: Union['Tensor', Number], op) -> 'Tensor':
        rhs = other.data if isinstance(other, Tensor) else float(other)
        if isinstance(other, Tensor) and other.shape != self.shape:
            raise ShapeError(f"shape mismatch {self.shape} vs {other.shape}")
        return Tensor(op(self.data, rhs))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __radd__ = __add__
    __rmul__ = __mul__

    def __neg__(self) -> 'Tensor':
        return Tensor(-self.data)

    def allclose(self, other: 'Tensor', atol: float = 0.0, rtol: float = 0.0) -> bool:
        return self.shape == other.shape and bool(np.allclose(self.data, other.data, atol=atol, rtol=rtol))

    def equals(self, other: 'Tensor') -> bool:
        """Bit-identical comparison"""
        return self.shape == other.shape and self.data.tobytes() == other.data.tobytes()


@dataclass(frozen=True, eq=False)
class ChannelStats:
    """Per-channel mean and population standard deviation"""
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = _frozen(self.mu)
        sigma = _frozen(self.sigma)
        if mu.ndim != 1 or mu.shape != sigma.shape:
            raise ShapeError(f"mu/sigma must be equal-length vectors, got {mu.shape} and {sigma.shape}")
        if np.any(sigma < 0):
            raise ValueError("sigma entries must be >= 0")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def channels(self) -> int:
        return int(self.mu.shape[0])


def channel_stats(f: Tensor) -> ChannelStats:
    """Per-channel mean / population std of a [c, h, w] feature map"""
    if f.rank != 3:
        raise ShapeError(f"channel_stats expects rank 3 [c,h,w], got shape {f.shape}")
    c, h, w = f.shape
    if h * w < 1:
        raise ShapeError(f"channel_stats needs at least one spatial site, got {f.shape}")
    flat = f.data.reshape(c, h * w)
    mu = flat.mean(axis=1)
    sigma = flat.std(axis=1)
    # constant channels: exact mean, exact zero spread
    constant = np.ptp(flat, axis=1) == 0.0
    mu = np.where(constant, flat[:, 0], mu)
    sigma = np.where(constant, 0.0, sigma)
    return ChannelStats(mu=mu, sigma=sigma)


def l2_normalize(v: Tensor) -> Tensor:
    """Unit Euclidean norm, direction preserved"""
    norm = float(np.linalg.norm(v.data))
    if norm == 0.0:
        raise DegenerateInputError("cannot normalize a zero vector")
    return Tensor(v.data / norm)


@dataclass(frozen=True)
class Distribution:
    """uniform[-scale, scale] or normal(0, scale)"""
    kind: Literal["uniform", "normal"]
    scale: float

    @classmethod
    def uniform(cls, a: float) -> 'Distribution':
        return cls("uniform", float(a))

    @classmethod
    def normal(cls, s: float) -> 'Distribution':
        return cls("normal", float(s))


def rng_fill(shape: Sequence[int], seed: int, distribution: Distribution) -> Tensor:
    """Deterministic tensor: same (shape, seed, distribution) gives bit-identical output"""
    dims = tuple(int(d) for d in shape)
    if not dims or any(d <= 0 for d in dims):
        raise ShapeError(f"rng_fill needs positive dimensions, got {dims}")
    count = int(np.prod(dims))
    rng = SeededRng(seed)
    if distribution.kind == "uniform":
        values = rng.fill_uniform(count, -distribution.scale, distribution.scale)
    elif distribution.kind == "normal":
        values = rng.fill_normal(count, 0.0, distribution.scale)
    else:
        raise ValueError(f"unknown distribution: {distribution.kind}")
    return Tensor(values.reshape(dims))
