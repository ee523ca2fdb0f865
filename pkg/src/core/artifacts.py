# -*- coding: utf-8 -*-
"""
Artifacts - deterministic JSON / JSONL writers and readers

Every artifact is written with sorted keys and "\n" line endings so reruns with
the same (seed, config hash, tool version) are byte-identical. Floats use the
shortest repr that round-trips exactly.
"""
import json
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional, Union

from src.core.errors import ParseError
from src.core.types import ArtifactMeta


PathLike = Union[str, Path]


def dumps(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def write_json(path: PathLike, payload: Dict[str, Any], meta: Optional[ArtifactMeta] = None) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    body = dict(payload)
    if meta is not None:
        body["meta"] = dict(meta)
    with open(target, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps(body))
    return target


def meta_path(path: PathLike) -> Path:
    """Sidecar holding the meta block of a JSONL artifact"""
    target = Path(path)
    return target.with_name(target.stem + ".meta.json")


def write_jsonl(path: PathLike, rows: Iterable[Dict[str, Any]], meta: Optional[ArtifactMeta] = None) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", encoding="utf-8", newline="\n") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True, ensure_ascii=False, allow_nan=False))
            f.write("\n")
    if meta is not None:
        write_json(meta_path(target), {}, meta)
    return target


def read_json(path: PathLike) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ParseError(f"cannot read JSON file {path}: {e}") from e
    if not isinstance(data, dict):
        raise ParseError(f"{path}: top-level JSON value must be an object")
    return data


def iter_jsonl(path: PathLike) -> Iterator[Dict[str, Any]]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            for line_number, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as e:
                    raise ParseError(f"{path}:{line_number}: {e}") from e
                if not isinstance(row, dict):
                    raise ParseError(f"{path}:{line_number}: each line must be a JSON object")
                yield row
    except (OSError, UnicodeDecodeError) as e:
        raise ParseError(f"cannot read JSONL file {path}: {e}") from e


def read_jsonl(path: PathLike) -> List[Dict[str, Any]]:
    return list(iter_jsonl(path))
