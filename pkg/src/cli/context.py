# -*- coding: utf-8 -*-
"""
Run Context - settings, output layout and derived seeds for one CLI invocation

<out>/
    run.log
    data/        <domain>_{train,test,adapt}.jsonl, cache.jsonl, images/
    captions/    kept.jsonl, rejected.jsonl, prompts.json
    models/      encoder.p2aw, teacher_head.json, student.json, teacher_<d>.json, student_<d>.json, oracle_<d>.json
    styles/      <d>.json
    pseudo/      <d>.jsonl
    reports/     <name>.json
    summary.json, summary.txt
"""
from functools import cached_property
from pathlib import Path
from typing import Dict, Optional, Union

from src.core.errors import ConfigError, DataError, SeedError
from src.core.seeded_rng import MASK64, SeededRng
from src.core.settings import RunSettings
from src.core.types import ArtifactMeta
from src.detection.postprocess import DetectConfig
from src.detection.scenes import DomainConfig, load_domains
from src.detection.source_cache import CACHE_SIZE
from src.detection.training import LrDecay
from src.encoder.dual_encoder import EncoderWeights, fnv1a_64
from src.steering.steer import SteeringConfig


PROJECT_ROOT = Path(__file__).parent.parent.parent
DEFAULT_CONFIG = PROJECT_ROOT / "data" / "run_default.yaml"


class RunContext:
    """1回のCLI実行の設定と出力先"""

    def __init__(self, settings: RunSettings, out: Union[str, Path]):
        self.settings = settings
        self.out = Path(out)
        if settings.require_int("data.cache_size") != CACHE_SIZE:
            raise ConfigError(f"data.cache_size must be {CACHE_SIZE}, got {settings.get('data.cache_size')}")
        for key in ("seed", "encoder.seed"):
            if not 0 <= settings.require_int(key) <= MASK64:
                raise SeedError(f"{key} must be an unsigned 64-bit integer, got {settings.get(key)}")

    @property
    def seed(self) -> int:
        return self.settings.require_int("seed")

    @cached_property
    def meta(self) -> ArtifactMeta:
        return self.settings.artifact_meta()

    def resolve(self, key_path: str) -> Path:
        """Config path, relative ones taken from the project root"""
        path = Path(str(self.settings.require(key_path)))
        return path if path.is_absolute() else PROJECT_ROOT / path

    def derive_seed(self, label: str) -> int:
        """Stable per-stage seed, independent of stage order"""
        return (self.seed ^ fnv1a_64(label)) & MASK64

    def rng(self, label: str) -> SeededRng:
        return SeededRng(self.derive_seed(label))

    # Layout

    def data_path(self, domain: str, split: str) -> Path:
        return self.out / "data" / f"{domain}_{split}.jsonl"

    @property
    def cache_path(self) -> Path:
        return self.out / "data" / "cache.jsonl"

    @property
    def prompts_path(self) -> Path:
        return self.out / "captions" / "prompts.json"

    def model_path(self, name: str) -> Path:
        return self.out / "models" / f"{name}.json"

    def styles_path(self, domain: str) -> Path:
        return self.out / "styles" / f"{domain}.json"

    def pseudo_path(self, domain: str) -> Path:
        return self.out / "pseudo" / f"{domain}.jsonl"

    def report_path(self, name: str) -> Path:
        return self.out / "reports" / f"{name}.json"

    def require_file(self, path: Path, producer: str) -> Path:
        if not path.exists():
            raise DataError(f"missing input {path}; run `{producer}` first")
        return path

    # Derived configuration

    @cached_property
    def encoder(self) -> EncoderWeights:
        weights = EncoderWeights.derive(self.settings.require_int("encoder.seed"),
                                        self.settings.require_int("encoder.layer1_channels"))
        weights.save(self.out / "models" / "encoder.p2aw")
        return weights

    @cached_property
    def domains(self) -> Dict[str, DomainConfig]:
        return load_domains(self.resolve("paths.domains_dir"))

    def domain(self, name: str) -> DomainConfig:
        if name not in self.domains:
            raise ConfigError(f"unknown domain {name!r}; configured: {sorted(self.domains)}")
        return self.domains[name]

    @property
    def source_domain(self) -> str:
        return str(self.settings.require("data.source_domain"))

    @property
    def target_domains(self) -> list:
        return [str(d) for d in self.settings.require("data.target_domains")]

    def steering_config(self) -> SteeringConfig:
        section = self.settings.require("steering")
        try:
            return SteeringConfig(**section)
        except TypeError as e:
            raise ConfigError(f"bad steering section: {e}") from e

    def detect_config(self, conf_floor: Optional[float] = None) -> DetectConfig:
        return DetectConfig(
            conf_floor=(float(conf_floor) if conf_floor is not None
                        else self.settings.require_float("detector.conf_floor")),
            nms_iou=self.settings.require_float("detector.nms_iou"),
            max_candidates=self.settings.require_int("detector.max_candidates"),
        )

    def lr_decay(self) -> LrDecay:
        return LrDecay(self.settings.require_int("training.lr_decay_step"),
                       self.settings.require_float("training.lr_decay_gamma"))
