# -*- coding: utf-8 -*-
"""
Source Cache - the five labeled source scenes kept at deployment time

The cache stores the scenes with their truth and their precomputed layer-1
feature maps. It is the only source imagery the adaptation stages may read.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Set, Union

from src.core.errors import ConfigError
from src.core.logger import get_logger
from src.core.seeded_rng import SeededRng
from src.core.tensor import Tensor
from src.core.types import ArtifactMeta
from src.detection.dataset import SceneDataset, write_dataset
from src.detection.scenes import Scene
from src.encoder.dual_encoder import EncoderWeights, encode_image_layer1

logger = get_logger(__name__)


CACHE_SIZE = 5


@dataclass(frozen=True, eq=False)
class CachedScene:
    scene: Scene
    features: Tensor
    image_id: str = ""


class SourceCache:
    """固定サイズ(5枚)のソースキャッシュ"""

    def __init__(self, scenes: Sequence[Scene], w: EncoderWeights, image_ids: Optional[Sequence[str]] = None):
        if len(scenes) != CACHE_SIZE:
            raise ConfigError(f"source cache holds exactly {CACHE_SIZE} scenes, got {len(scenes)}")
        ids = list(image_ids) if image_ids is not None else [""] * CACHE_SIZE
        if len(ids) != CACHE_SIZE:
            raise ConfigError(f"expected {CACHE_SIZE} image ids, got {len(ids)}")
        self._entries = tuple(
            CachedScene(scene, encode_image_layer1(scene.image, w), image_id)
            for scene, image_id in zip(scenes, ids)
        )

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def entries(self) -> Sequence[CachedScene]:
        return self._entries

    @property
    def scenes(self) -> List[Scene]:
        return [entry.scene for entry in self._entries]

    @property
    def features(self) -> List[Tensor]:
        return [entry.features for entry in self._entries]

    @property
    def image_ids(self) -> Set[str]:
        return {entry.image_id for entry in self._entries if entry.image_id}

    @classmethod
    def select(cls, dataset: SceneDataset, w: EncoderWeights, rng: SeededRng) -> 'SourceCache':
        """Seeded pick of five scenes from a labeled source split, kept in dataset order"""
        if len(dataset) < CACHE_SIZE:
            raise ConfigError(f"{dataset.path} holds {len(dataset)} scenes, the cache needs {CACHE_SIZE}")
        indices = sorted(rng.permutation(len(dataset))[:CACHE_SIZE])
        logger.info(f"SourceCache: selected scenes {indices} from {dataset.path}")
        return cls([dataset.load_scene(i) for i in indices], w, [dataset.image_id(i) for i in indices])

    def save(self, path: Union[str, Path], meta: Optional[ArtifactMeta] = None) -> Path:
        return write_dataset(path, self.scenes, meta)

    @classmethod
    def load(cls, path: Union[str, Path], w: EncoderWeights) -> 'SourceCache':
        dataset = SceneDataset(path, role="cache")
        return cls(list(dataset.scenes()), w, [dataset.image_id(i) for i in range(len(dataset))])
