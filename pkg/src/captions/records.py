# -*- coding: utf-8 -*-
"""
Caption Records - strict parsing of raw where/when/weather captions

The raw caption must be exactly one JSON object with the string keys where,
when and weather. No prose before or after the object is salvaged.
"""
import json
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Tuple, Union

from src.core.errors import ParseError, SchemaError
from src.core.types import CaptionRecordDict


CAPTION_FIELDS: Tuple[str, ...] = ("where", "when", "weather")


def collapse(text: str) -> str:
    """lowercase + single spaces"""
    return " ".join(text.lower().split())


@dataclass(frozen=True)
class CaptionRecord:
    where: str
    when: str
    weather: str
    source_id: str = ""

    def fields(self) -> Dict[str, str]:
        return {name: getattr(self, name) for name in CAPTION_FIELDS}

    def with_fields(self, values: Dict[str, str]) -> 'CaptionRecord':
        return replace(self, **values)

    def to_record(self) -> CaptionRecordDict:
        return {"where": self.where, "when": self.when, "weather": self.weather, "source_id": self.source_id}


def _unique_keys(pairs: List[Tuple[str, Any]]) -> Dict[str, Any]:
    result: Dict[str, Any] = {}
    for key, value in pairs:
        if key in result:
            raise SchemaError(f"duplicate key {key!r}")
        result[key] = value
    return result


def parse_caption(raw: Union[bytes, str], source_id: str = "") -> CaptionRecord:
    """raw caption -> CaptionRecord (ParseError / SchemaError on failure)"""
    if isinstance(raw, bytes):
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(f"caption is not valid UTF-8: {e}") from e
    else:
        text = raw
    try:
        data = json.loads(text, object_pairs_hook=_unique_keys)
    except json.JSONDecodeError as e:
        raise ParseError(f"caption is not a single JSON object: {e.msg}") from e

    if not isinstance(data, dict):
        raise SchemaError(f"caption must be a JSON object, got {type(data).__name__}")
    keys = set(data)
    missing = [name for name in CAPTION_FIELDS if name not in keys]
    extra = sorted(keys - set(CAPTION_FIELDS))
    if missing:
        raise SchemaError(f"caption is missing {missing}")
    if extra:
        raise SchemaError(f"caption has unexpected keys {extra}")

    values: Dict[str, str] = {}
    for name in CAPTION_FIELDS:
        value = data[name]
        if not isinstance(value, str):
            raise SchemaError(f"field {name!r} must be a string, got {type(value).__name__}")
        values[name] = collapse(value)
        if not values[name]:
            raise SchemaError(f"field {name!r} is empty")
    return CaptionRecord(source_id=source_id, **values)
