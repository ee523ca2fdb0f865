# -*- coding: utf-8 -*-
"""
Seeded RNG - portable deterministic random streams

Algorithm (fixed, part of the file-format contract so fixtures are portable):
  * state seeding: SplitMix64 applied to the 64-bit seed, four outputs -> 256-bit state
  * generator:     xoshiro256++
  * uniform float: top 53 bits of a 64-bit output times 2**-53, range [0, 1)
  * normal:        Box-Muller, cosine branch, u1 taken as 1 - uniform (never zero)

Scalar draws run the generator on Python integers. Bulk draws (tensor fills, pixel
noise) take one 64-bit child seed from the scalar stream and run LANES independent
xoshiro256++ lanes over numpy uint64 arrays, lane states seeded by consecutive
SplitMix64 outputs of the child seed. Output order is step-major, lane-minor.
"""
import math
from typing import List, Tuple

import numpy as np

from src.core.errors import SeedError


MASK64 = (1 << 64) - 1
LANES = 128

_GOLDEN = 0x9E3779B97F4A7C15
_U11 = np.uint64(11)
_U17 = np.uint64(17)


def splitmix64(state: int) -> Tuple[int, int]:
    """One SplitMix64 step: returns (next_state, output)"""
    state = (state + _GOLDEN) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


def _rotl_lanes(x: np.ndarray, k: int) -> np.ndarray:
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


def _seed_words(seed: int, count: int) -> List[int]:
    words = []
    state = seed & MASK64
    for _ in range(count):
        state, value = splitmix64(state)
        words.append(value)
    return words


def lane_block(seed: int, count: int) -> np.ndarray:
    """count raw 64-bit outputs of the lane-parallel generator for this seed"""
    if count <= 0:
        return np.empty(0, dtype=np.uint64)
    lanes = min(LANES, count)
    steps = -(-count // lanes)
    init = np.array(_seed_words(seed, 4 * lanes), dtype=np.uint64).reshape(lanes, 4)
    s0, s1, s2, s3 = (init[:, i].copy() for i in range(4))

    out = np.empty((steps, lanes), dtype=np.uint64)
    for step in range(steps):
        out[step] = _rotl_lanes(s0 + s3, 23) + s0
        t = s1 << _U17
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl_lanes(s3, 45)
    return out.reshape(-1)[:count]


def _unit_floats(raw: np.ndarray) -> np.ndarray:
    return (raw >> _U11).astype(np.float64) * (2.0 ** -53)


def _box_muller(u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


class SeededRng:
    """SplitMix64-seeded xoshiro256++ stream"""

    def __init__(self, seed: int):
        if seed < 0 or seed > MASK64:
            raise SeedError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self._state = _seed_words(seed, 4)

    @classmethod
    def for_task(cls, base_seed: int, task_index: int) -> 'SeededRng':
        """Independent stream for a concurrent task (seed = base_seed xor task_index)"""
        return cls((base_seed ^ task_index) & MASK64)

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._state
        result = (_rotl((s0 + s3) & MASK64, 23) + s0) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._state = [s0, s1, s2, s3]
        return result

    def spawn_seed(self) -> int:
        """Child seed for a derived stream"""
        return self.next_u64()

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        unit = (self.next_u64() >> 11) * (2.0 ** -53)
        return low + (high - low) * unit

    def normal(self, mean: float = 0.0, std: float = 1.0) -> float:
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        return mean + std * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def integers(self, low: int, high: int) -> int:
        """Integer in [low, high) by multiply-shift reduction"""
        span = high - low
        if span <= 0:
            raise ValueError(f"empty integer range [{low}, {high})")
        return low + ((self.next_u64() * span) >> 64)

    def choice_index(self, n: int) -> int:
        return self.integers(0, n)

    def permutation(self, n: int) -> List[int]:
        """Fisher-Yates shuffle of range(n)"""
        order = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.integers(0, i + 1)
            order[i], order[j] = order[j], order[i]
        return order

    def fill_uniform(self, count: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        unit = _unit_floats(lane_block(self.spawn_seed(), count))
        return low + (high - low) * unit

    def fill_normal(self, count: int, mean: float = 0.0, std: float = 1.0) -> np.ndarray:
        unit = _unit_floats(lane_block(self.spawn_seed(), 2 * count))
        return mean + std * _box_muller(1.0 - unit[:count], unit[count:])

