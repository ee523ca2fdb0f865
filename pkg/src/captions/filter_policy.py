# -*- coding: utf-8 -*-
"""
Filter Policy - rejects uncertain or overlong caption records
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import yaml

from src.captions.records import CaptionRecord
from src.core.errors import ConfigError
from src.core.types import RejectionRecord


DEFAULT_BANNED = ("unsure", "unclear", "cannot determine", "unknown")
DEFAULT_MAX_LENGTH = 64


@dataclass(frozen=True)
class FilterPolicy:
    banned: Tuple[str, ...] = DEFAULT_BANNED
    max_length: int = DEFAULT_MAX_LENGTH

    def __post_init__(self):
        object.__setattr__(self, "banned", tuple(str(b).lower() for b in self.banned))
        message = self.validate()
        if message:
            raise ConfigError(message)

    def validate(self) -> Optional[str]:
        if not self.banned:
            return "filter policy needs at least one banned substring"
        if any(not b for b in self.banned):
            return "banned substrings must be non-empty"
        if self.max_length < 1:
            return f"max_length must be >= 1, got {self.max_length}"
        return None

    def check(self, rec: CaptionRecord) -> Optional[Tuple[str, str]]:
        """(reason, field) of the first rule the record breaks, fields in where/when/weather order"""
        for name, value in rec.fields().items():
            for banned in self.banned:
                if banned in value:
                    return f'banned:"{banned}"', name
            if len(value) > self.max_length:
                return "length", name
        return None

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'FilterPolicy':
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"cannot read filter policy {path}: {e}") from e
        if not isinstance(data, dict) or set(data) - {"banned", "max_length"}:
            raise ConfigError(f"{path}: filter policy takes only 'banned' and 'max_length'")
        return cls(tuple(data.get("banned", DEFAULT_BANNED)), int(data.get("max_length", DEFAULT_MAX_LENGTH)))


@dataclass(frozen=True)
class Rejection:
    source_id: str
    reason: str
    field: str = ""

    def to_record(self) -> RejectionRecord:
        return {"source_id": self.source_id, "reason": self.reason, "field": self.field}


@dataclass
class FilterResult:
    kept: List[CaptionRecord] = field(default_factory=list)
    rejected: List[Rejection] = field(default_factory=list)


def filter_records(records: Sequence[CaptionRecord], policy: FilterPolicy) -> FilterResult:
    """Partition records into kept / rejected, input order preserved in both"""
    result = FilterResult()
    for rec in records:
        broken = policy.check(rec)
        if broken is None:
            result.kept.append(rec)
        else:
            result.rejected.append(Rejection(rec.source_id, *broken))
    return result

