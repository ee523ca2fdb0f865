"""Type definitions for PromptSteer on-disk records.

This module provides TypedDict definitions for the JSON / JSONL structures
written and read by the pipeline, improving type safety and IDE support.
"""

from typing import Dict, List, Literal, TypedDict


# Artifact metadata embedded in every output file
class ArtifactMeta(TypedDict):
    """再現性メタデータ"""
    seed: int
    config_hash: str
    tool_version: str


# Dataset types
# "class" is a Python keyword, so box and detection records use the functional form
BoxRecordDict = TypedDict("BoxRecordDict", {
    "x1": float, "y1": float, "x2": float, "y2": float, "class": int,
})


class DatasetLine(TypedDict):
    """One scene per JSONL line"""
    image: str
    boxes: List[BoxRecordDict]


# Detection types
DetectionRecord = TypedDict("DetectionRecord", {
    "x1": float, "y1": float, "x2": float, "y2": float, "class": int, "confidence": float,
})


class DetectionsLine(TypedDict):
    """Per-image detections (predictions or pseudo-labels)"""
    image: str
    detections: List[DetectionRecord]


# Steering types
class StyleEntryRecord(TypedDict):
    """StyleSet entry"""
    mu: List[float]
    sigma: List[float]
    loss_init: float
    loss_final: float
    steps_run: int


class SteeringConfigRecord(TypedDict):
    steps: int
    lr: float
    momentum: float
    sigma_min: float
    eps: float


# Evaluation types
class EvalReportRecord(TypedDict):
    """mAP@50 report"""
    per_class_ap: Dict[str, float]
    map50: float


# Caption types
class CaptionRecordDict(TypedDict):
    where: str
    when: str
    weather: str
    source_id: str


class RejectionRecord(TypedDict):
    """却下されたキャプションと理由"""
    source_id: str
    reason: str
    field: str


# Domain types
class DomainConfigRecord(TypedDict):
    name: str
    channel_gain: List[float]
    channel_bias: List[float]
    gray_blend: float
    noise_std: float


# Audit types
# eval / oracle roles read labeled test or target-train splits outside adaptation
DatasetRole = Literal["source", "cache", "target", "eval", "oracle"]


# Summary types
class DomainSummaryRecord(TypedDict):
    """e2e summary row for one target domain"""
    no_adapt: float
    adapted: float
    oracle: float
    delta: float
    prompt: str
    prompt_cosine: float
    steer_cosine_init: float
    steer_cosine_final: float
