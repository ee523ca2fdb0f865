# -*- coding: utf-8 -*-
"""
Steering - prompt-based feature alignment over a set of source feature maps

For every source feature map independently: start from its own channel
statistics, run N momentum-SGD steps on (mu, sigma) against the target prompt
embedding, clamp every sigma entry a step moves to sigma_min, keep the final pair.
momentum = 0 is plain gradient descent.
"""
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from src.core.artifacts import read_json, write_json
from src.core.errors import ConfigError, DegenerateInputError, EmptyInputError, SchemaError, ShapeError
from src.core.logger import get_logger, log_elapsed
from src.core.seeded_rng import SeededRng
from src.core.tensor import Tensor, channel_stats
from src.core.types import ArtifactMeta, StyleEntryRecord
from src.encoder.dual_encoder import Embedding, EncoderWeights
from src.steering.pin import DEFAULT_EPS, StyleStats, loss_and_grad, standardize, steered_loss

logger = get_logger(__name__)


@dataclass(frozen=True)
class SteeringConfig:
    """Optimizer settings for steer"""
    steps: int = 100
    lr: float = 0.05
    momentum: float = 0.0
    sigma_min: float = 1e-4
    eps: float = DEFAULT_EPS
    workers: int = 1

    def __post_init__(self):
        message = self.validate()
        if message:
            raise ConfigError(message)

    def validate(self) -> Optional[str]:
        """設定を検証し、エラーがあればメッセージを返す"""
        if not isinstance(self.steps, int) or self.steps < 0:
            return f"steps must be a non-negative integer, got {self.steps!r}"
        if self.lr < 0:
            return f"lr must be >= 0, got {self.lr}"
        if not 0.0 <= self.momentum < 1.0:
            return f"momentum must lie in [0, 1), got {self.momentum}"
        if self.sigma_min <= 0:
            return f"sigma_min must be positive, got {self.sigma_min}"
        if self.eps <= 0:
            return f"eps must be positive, got {self.eps}"
        if self.workers < 1:
            return f"workers must be >= 1, got {self.workers}"
        return None

    def to_record(self) -> Dict[str, Any]:
        record = asdict(self)
        record.pop("workers")
        return record


@dataclass(frozen=True)
class StyleEntry:
    """Steered statistics for one source feature map plus its loss trace"""
    style: StyleStats
    loss_init: float
    loss_final: float
    steps_run: int

    @property
    def cosine_init(self) -> float:
        return 1.0 - self.loss_init

    @property
    def cosine_final(self) -> float:
        return 1.0 - self.loss_final


@dataclass(frozen=True)
class StyleSet:
    entries: List[StyleEntry]
    config_echo: SteeringConfig
    info: Dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def styles(self) -> List[StyleStats]:
        return [entry.style for entry in self.entries]

    def sample(self, rng: SeededRng) -> StyleStats:
        """Uniform draw with replacement"""
        if not self.entries:
            raise EmptyInputError("cannot sample from an empty style set")
        return self.entries[rng.choice_index(len(self.entries))].style

    def centroid(self) -> StyleStats:
        """Entry-wise mean of mu and sigma"""
        if not self.entries:
            raise EmptyInputError("an empty style set has no centroid")
        return StyleStats(np.mean([s.mu for s in self.styles], axis=0),
                          np.mean([s.sigma for s in self.styles], axis=0))


def _steer_one(index: int, f: Tensor, trg: Embedding, cfg: SteeringConfig, w: EncoderWeights) -> StyleEntry:
    start = time.perf_counter()
    stats = channel_stats(f)
    z = standardize(f, cfg.eps)
    mu = stats.mu.copy()
    sigma = stats.sigma.copy()
    velocity_mu = np.zeros_like(mu)
    velocity_sigma = np.zeros_like(sigma)
    loss_init: Optional[float] = None
    previous = None
    steps_run = 0

    for step in range(cfg.steps):
        try:
            result = loss_and_grad(z, mu, sigma, trg, w)
        except DegenerateInputError:
            if previous is None:
                raise
            logger.warning(f"Steering: feature {index} hit a degenerate embedding at step {step}, "
                           f"keeping the previous iterate")
            mu, sigma = previous
            break
        if loss_init is None:
            loss_init = result.loss
        previous = (mu, sigma)
        velocity_mu = cfg.momentum * velocity_mu - cfg.lr * result.grad_mu
        velocity_sigma = cfg.momentum * velocity_sigma - cfg.lr * result.grad_sigma
        mu = mu + velocity_mu
        # the floor applies to entries this step moved; an untouched dead channel stays at 0
        moved = velocity_sigma != 0.0
        sigma = np.where(moved, np.maximum(sigma + velocity_sigma, cfg.sigma_min), sigma)
        steps_run += 1

    try:
        loss_final = steered_loss(z, mu, sigma, trg, w)
    except DegenerateInputError:
        if previous is None:
            raise
        logger.warning(f"Steering: feature {index} final iterate is degenerate, keeping the previous one")
        mu, sigma = previous
        steps_run -= 1
        loss_final = steered_loss(z, mu, sigma, trg, w)
    if loss_init is None:
        loss_init = loss_final

    log_elapsed(f"steer feature {index}", start,
                f"loss {loss_init:.6f} -> {loss_final:.6f} in {steps_run} steps")
    return StyleEntry(StyleStats(mu, sigma), loss_init, loss_final, steps_run)


def steer(features: Sequence[Tensor], trg: Embedding, cfg: SteeringConfig, w: EncoderWeights) -> StyleSet:
    """One StyleStats per source feature map, in input order"""
    if not features:
        raise EmptyInputError("steer needs at least one source feature map")
    channels = {f.shape[0] for f in features}
    if len(channels) != 1 or any(f.rank != 3 for f in features):
        raise ShapeError(f"source features must be [c,h,w] with a shared channel count, got {sorted(channels)}")

    if cfg.workers == 1:
        entries = [_steer_one(i, f, trg, cfg, w) for i, f in enumerate(features)]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            entries = list(pool.map(lambda item: _steer_one(item[0], item[1], trg, cfg, w), enumerate(features)))
    return StyleSet(entries, cfg)


def save_style_set(path: Union[str, Path], styles: StyleSet, meta: Optional[ArtifactMeta] = None) -> Path:
    entries: List[StyleEntryRecord] = [
        {
            "mu": [float(x) for x in entry.style.mu],
            "sigma": [float(x) for x in entry.style.sigma],
            "loss_init": float(entry.loss_init),
            "loss_final": float(entry.loss_final),
            "steps_run": int(entry.steps_run),
        }
        for entry in styles.entries
    ]
    payload: Dict[str, Any] = {"config": styles.config_echo.to_record(), "entries": entries}
    if styles.info:
        payload["info"] = styles.info
    return write_json(path, payload, meta)


def load_style_set(path: Union[str, Path]) -> StyleSet:
    data = read_json(path)
    try:
        config = SteeringConfig(**data["config"])
        entries = [
            StyleEntry(
                StyleStats(np.asarray(e["mu"], dtype=np.float64), np.asarray(e["sigma"], dtype=np.float64)),
                float(e["loss_init"]),
                float(e["loss_final"]),
                int(e["steps_run"]),
            )
            for e in data["entries"]
        ]
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"{path}: malformed style set: {e}") from e
    return StyleSet(entries, config, dict(data.get("info", {})))
