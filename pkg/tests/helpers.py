# -*- coding: utf-8 -*-
"""Small builders shared by the test modules"""
from typing import List, Sequence

import numpy as np

from src.core.tensor import Distribution, Tensor, channel_stats, rng_fill
from src.detection.scenes import DomainConfig, Scene, gen_scenes
from src.steering.pin import StyleStats
from src.steering.steer import StyleEntry, StyleSet, SteeringConfig


def feature_map(seed: int, shape=(8, 6, 6), scale: float = 1.0) -> Tensor:
    """uniform[-scale, scale] layer-1 sized feature map"""
    return rng_fill(shape, seed, Distribution.uniform(scale))


def random_image(seed: int, size: int = 16) -> Tensor:
    values = rng_fill((3, size, size), seed, Distribution.uniform(0.5)).data + 0.5
    return Tensor(np.clip(values, 0.0, 1.0))


def clear_scenes(seed: int, count: int) -> List[Scene]:
    return gen_scenes(DomainConfig.clear(), seed, count)


def identity_styles(features: Sequence[Tensor]) -> StyleSet:
    """Style set holding each feature map's own statistics"""
    entries = [StyleEntry(StyleStats.from_channel_stats(channel_stats(f)), 0.0, 0.0, 0) for f in features]
    return StyleSet(entries, SteeringConfig(steps=0))
