# -*- coding: utf-8 -*-
"""
Synonym Table - canonical terms and their variants

File format (YAML or JSON): {canonical: [variant, ...]}. Matching works on
whitespace tokens, longest variant first, and canonical phrases match themselves
so they are never broken up by a shorter variant.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import yaml

from src.captions.records import CaptionRecord, collapse
from src.core.errors import ConfigError
from src.core.logger import get_logger

logger = get_logger(__name__)


MAX_PASSES = 16


@dataclass(frozen=True)
class SynonymTable:
    """同義語テーブル (canonical -> variants)"""
    mapping: Dict[str, Tuple[str, ...]]
    _phrases: Tuple[Tuple[Tuple[str, ...], str], ...] = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        cleaned = {collapse(k): tuple(collapse(v) for v in variants) for k, variants in self.mapping.items()}
        object.__setattr__(self, "mapping", cleaned)
        message = self.validate()
        if message:
            raise ConfigError(message)
        phrases = {canonical: canonical for canonical in cleaned}
        for canonical, variants in cleaned.items():
            for variant in variants:
                phrases[variant] = canonical
        ordered = sorted(phrases.items(), key=lambda item: (-len(item[0].split()), item[0]))
        object.__setattr__(self, "_phrases", tuple((tuple(p.split()), c) for p, c in ordered))

    def validate(self) -> Optional[str]:
        """テーブルを検証し、エラーがあればメッセージを返す"""
        owner: Dict[str, str] = {}
        for canonical, variants in self.mapping.items():
            if not canonical:
                return "empty canonical term"
            for variant in variants:
                if not variant:
                    return f"empty variant under {canonical!r}"
                if variant in owner and owner[variant] != canonical:
                    return f"variant {variant!r} maps to both {owner[variant]!r} and {canonical!r}"
                owner[variant] = canonical
        for canonical in self.mapping:
            if canonical in owner and owner[canonical] != canonical:
                return f"canonical {canonical!r} is a variant of {owner[canonical]!r}"
        return None

    def canonical_of(self, phrase: str) -> Optional[str]:
        tokens = tuple(collapse(phrase).split())
        for variant, canonical in self._phrases:
            if variant == tokens:
                return canonical
        return None

    def rewrite(self, text: str) -> str:
        """One left-to-right, longest-first replacement pass over the tokens"""
        tokens = text.split()
        out: List[str] = []
        i = 0
        while i < len(tokens):
            for variant, canonical in self._phrases:
                n = len(variant)
                if tuple(tokens[i:i + n]) == variant:
                    out.append(canonical)
                    i += n
                    break
            else:
                out.append(tokens[i])
                i += 1
        return " ".join(out)

    def apply(self, text: str) -> str:
        """Repeat rewrite until nothing changes"""
        current = collapse(text)
        for _ in range(MAX_PASSES):
            updated = self.rewrite(current)
            if updated == current:
                return current
            current = updated
        raise ConfigError(f"synonym table does not settle on {text!r} within {MAX_PASSES} passes")

    @classmethod
    def from_dict(cls, data: Dict[str, Sequence[str]]) -> 'SynonymTable':
        if not isinstance(data, dict):
            raise ConfigError("synonym table must be a mapping of canonical -> [variants]")
        mapping: Dict[str, Tuple[str, ...]] = {}
        for canonical, variants in data.items():
            if isinstance(variants, str) or not isinstance(variants, (list, tuple)):
                raise ConfigError(f"variants of {canonical!r} must be a list")
            mapping[str(canonical)] = tuple(str(v) for v in variants)
        return cls(mapping)

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'SynonymTable':
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = yaml.safe_load(f)
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"cannot read synonym table {path}: {e}") from e
        table = cls.from_dict(data or {})
        logger.debug(f"Synonyms: {len(table.mapping)} canonical terms from {path}")
        return table


def normalize(rec: CaptionRecord, table: SynonymTable) -> CaptionRecord:
    """Replace variants with canonicals in every field (idempotent)"""
    return rec.with_fields({name: table.apply(value) for name, value in rec.fields().items()})

