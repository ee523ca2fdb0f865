# -*- coding: utf-8 -*-
"""
Caption Pipeline - raw caption JSONL -> kept records, rejections, prompts

Input lines: {"source_id": "...", "raw": "<raw model output>"}. Parse and schema
failures become rejections ("parse" / "schema") instead of aborting the batch.
Source ids of the form "<domain>:<n>" group records by domain; a domain's prompt
comes from its first kept record.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

from src.captions.filter_policy import FilterPolicy, Rejection, filter_records
from src.captions.prompts import DEFAULT_TEMPLATE_NAME, PromptTemplateManager
from src.captions.records import CaptionRecord, parse_caption
from src.captions.synonyms import SynonymTable, normalize
from src.core.artifacts import iter_jsonl, write_json, write_jsonl
from src.core.errors import ParseError, SchemaError
from src.core.logger import get_logger
from src.core.types import ArtifactMeta

logger = get_logger(__name__)


def domain_of(source_id: str) -> str:
    return source_id.split(":", 1)[0]


@dataclass
class CaptionRun:
    """1回分の処理結果"""
    kept: List[CaptionRecord] = field(default_factory=list)
    rejected: List[Rejection] = field(default_factory=list)
    prompts: Dict[str, str] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return len(self.kept) + len(self.rejected)

    def save(self, out_dir: Union[str, Path], meta: Optional[ArtifactMeta] = None) -> None:
        root = Path(out_dir)
        write_jsonl(root / "kept.jsonl", [rec.to_record() for rec in self.kept], meta)
        write_jsonl(root / "rejected.jsonl", [rej.to_record() for rej in self.rejected], meta)
        write_json(root / "prompts.json", {"prompts": dict(sorted(self.prompts.items()))}, meta)


def run_caption_pipeline(path: Union[str, Path], table: SynonymTable, policy: FilterPolicy,
                         templates: PromptTemplateManager, template: str = DEFAULT_TEMPLATE_NAME) -> CaptionRun:
    """parse -> normalize -> filter -> assemble over one JSONL file"""
    run = CaptionRun()
    order: List[Union[CaptionRecord, Rejection]] = []
    for line_number, row in enumerate(iter_jsonl(path), start=1):
        source_id = str(row.get("source_id", f"line{line_number}"))
        raw = row.get("raw")
        if not isinstance(raw, str):
            order.append(Rejection(source_id, "schema", "raw"))
            continue
        try:
            rec = normalize(parse_caption(raw.encode("utf-8"), source_id), table)
        except ParseError as e:
            logger.debug(f"Captions: {source_id} rejected: {e}")
            order.append(Rejection(source_id, "parse", "raw"))
            continue
        except SchemaError as e:
            logger.debug(f"Captions: {source_id} rejected: {e}")
            order.append(Rejection(source_id, "schema", "raw"))
            continue
        order.append(rec)

    for item in order:
        if isinstance(item, Rejection):
            run.rejected.append(item)
            continue
        verdict = filter_records([item], policy)
        run.kept.extend(verdict.kept)
        run.rejected.extend(verdict.rejected)

    for rec in run.kept:
        domain = domain_of(rec.source_id)
        if domain not in run.prompts:
            run.prompts[domain] = templates.assemble_prompt(rec, template).text
    logger.info(f"Captions: {len(run.kept)} kept, {len(run.rejected)} rejected, "
                f"prompts for {sorted(run.prompts)}")
    return run
