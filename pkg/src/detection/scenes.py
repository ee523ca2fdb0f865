# -*- coding: utf-8 -*-
"""
Scenes - synthetic aerial scenes and parametric photometric domain shifts

A scene is a uniform gray background with 1-3 solid axis-aligned rectangles whose
color is fixed by class. A domain applies, per channel,

    px <- clip((1 - gray_blend) * (gain * px + bias) + gray_blend * HAZE_LEVEL)
    px <- clip(px + noise_std * n),  n ~ normal(0, 1)

Truth boxes are never touched by the shift.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from src.core.errors import ConfigError, PlacementError
from src.core.logger import get_logger
from src.core.seeded_rng import SeededRng
from src.core.tensor import Tensor
from src.core.types import DomainConfigRecord
from src.detection.boxes import NUM_CLASSES, GroundTruthBox, iou

logger = get_logger(__name__)


IMAGE_SIZE = 64
HAZE_LEVEL = 0.5
MIN_SIDE = 8
MAX_SIDE = 16
MAX_TRUTH_IOU = 0.3
MAX_PLACEMENT_ATTEMPTS = 1000
BACKGROUND_RANGE = (0.3, 0.6)

# クラスごとの基本色 (R, G, B)
CLASS_COLORS = np.array([
    [0.85, 0.20, 0.20],
    [0.20, 0.75, 0.25],
    [0.25, 0.30, 0.85],
])


def _vector3(value, name: str) -> Tuple[float, float, float]:
    if isinstance(value, (int, float)):
        return (float(value),) * 3
    try:
        items = tuple(float(v) for v in value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{name} must be a number or a 3-vector: {e}") from e
    if len(items) != 3:
        raise ConfigError(f"{name} must have 3 entries, got {len(items)}")
    return items  # type: ignore[return-value]


@dataclass(frozen=True)
class DomainConfig:
    """撮影条件のパラメトリックな近似"""
    name: str
    channel_gain: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    channel_bias: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    gray_blend: float = 0.0
    noise_std: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "channel_gain", _vector3(self.channel_gain, "channel_gain"))
        object.__setattr__(self, "channel_bias", _vector3(self.channel_bias, "channel_bias"))
        message = self.validate()
        if message:
            raise ConfigError(message)

    def validate(self) -> Optional[str]:
        if not self.name:
            return "domain name is empty"
        if not 0.0 <= self.gray_blend <= 1.0:
            return f"{self.name}: gray_blend must lie in [0, 1], got {self.gray_blend}"
        if self.noise_std < 0.0:
            return f"{self.name}: noise_std must be >= 0, got {self.noise_std}"
        if not all(np.isfinite(self.channel_gain + self.channel_bias)):
            return f"{self.name}: gain and bias must be finite"
        return None

    @classmethod
    def clear(cls) -> 'DomainConfig':
        return cls("clear")

    @classmethod
    def from_record(cls, record: dict) -> 'DomainConfig':
        unknown = set(record) - {"name", "channel_gain", "channel_bias", "gray_blend", "noise_std"}
        if unknown:
            raise ConfigError(f"unknown domain config keys: {sorted(unknown)}")
        if "name" not in record:
            raise ConfigError("domain config needs a name")
        return cls(
            name=str(record["name"]),
            channel_gain=record.get("channel_gain", 1.0),
            channel_bias=record.get("channel_bias", 0.0),
            gray_blend=float(record.get("gray_blend", 0.0)),
            noise_std=float(record.get("noise_std", 0.0)),
        )

    def to_record(self) -> DomainConfigRecord:
        return {
            "name": self.name,
            "channel_gain": list(self.channel_gain),
            "channel_bias": list(self.channel_bias),
            "gray_blend": self.gray_blend,
            "noise_std": self.noise_std,
        }

    def shift(self, image: np.ndarray, rng: SeededRng) -> np.ndarray:
        """Photometric shift of a [3,H,W] array; noise is drawn only when noise_std > 0"""
        gain = np.asarray(self.channel_gain)[:, None, None]
        bias = np.asarray(self.channel_bias)[:, None, None]
        out = np.clip((1.0 - self.gray_blend) * (gain * image + bias) + self.gray_blend * HAZE_LEVEL, 0.0, 1.0)
        if self.noise_std > 0.0:
            noise = rng.fill_normal(out.size).reshape(out.shape)
            out = np.clip(out + self.noise_std * noise, 0.0, 1.0)
        return out


def load_domain(path: Union[str, Path]) -> DomainConfig:
    """YAML / JSON domain config file"""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot read domain config {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"domain config {path} must hold a mapping")
    return DomainConfig.from_record(data)


def load_domains(directory: Union[str, Path]) -> Dict[str, DomainConfig]:
    """Every *.yaml / *.json domain config in a directory, keyed by name"""
    root = Path(directory)
    if not root.is_dir():
        raise ConfigError(f"domain directory not found: {root}")
    domains: Dict[str, DomainConfig] = {}
    for file_path in sorted(list(root.glob("*.yaml")) + list(root.glob("*.json"))):
        domain = load_domain(file_path)
        if domain.name in domains:
            raise ConfigError(f"duplicate domain name {domain.name!r} in {file_path}")
        domains[domain.name] = domain
    logger.debug(f"Domains: loaded {sorted(domains)} from {root}")
    return domains


@dataclass(frozen=True, eq=False)
class Scene:
    image: Tensor
    truth: List[GroundTruthBox] = field(default_factory=list)

    @property
    def size(self) -> Tuple[int, int]:
        _, h, w = self.image.shape
        return h, w


def _sample_layout(rng: SeededRng, size: int) -> List[GroundTruthBox]:
    count = rng.integers(1, 4)
    boxes: List[GroundTruthBox] = []
    attempts = 0
    while len(boxes) < count:
        if attempts >= MAX_PLACEMENT_ATTEMPTS:
            raise PlacementError(f"could not place {count} boxes within {MAX_PLACEMENT_ATTEMPTS} attempts")
        attempts += 1
        width = rng.integers(MIN_SIDE, MAX_SIDE + 1)
        height = rng.integers(MIN_SIDE, MAX_SIDE + 1)
        x1 = rng.integers(0, size - width + 1)
        y1 = rng.integers(0, size - height + 1)
        class_id = rng.integers(0, NUM_CLASSES)
        box = GroundTruthBox(float(x1), float(y1), float(x1 + width), float(y1 + height), class_id)
        if all(iou(box, other) < MAX_TRUTH_IOU for other in boxes):
            boxes.append(box)
    return boxes


def paint(background: float, boxes: Sequence[GroundTruthBox], size: int = IMAGE_SIZE) -> np.ndarray:
    """Clean rendering; later boxes paint over earlier ones"""
    image = np.full((3, size, size), background)
    for box in boxes:
        image[:, int(box.y1):int(box.y2), int(box.x1):int(box.x2)] = CLASS_COLORS[box.class_id][:, None, None]
    return image


def gen_scene(domain: DomainConfig, rng: SeededRng) -> Scene:
    """Background level, layout, then the domain shift, all from one stream"""
    background = rng.uniform(*BACKGROUND_RANGE)
    boxes = _sample_layout(rng, IMAGE_SIZE)
    image = domain.shift(paint(background, boxes), rng)
    return Scene(Tensor(image), boxes)


def gen_scenes(domain: DomainConfig, seed: int, count: int) -> List[Scene]:
    rng = SeededRng(seed)
    return [gen_scene(domain, rng) for _ in range(count)]
