# -*- coding: utf-8 -*-
"""
End-to-End Runner - every stage in sequence plus the per-domain summary

For each target domain the summary compares the source-only student (no-adapt),
the pseudo-label adapted student and a student trained on labeled target data
(in-domain oracle). The clear-domain score of the source-only student is the
reference for the degradation check.
"""
import time
from typing import Any, Dict, List

from src.cli import stages
from src.cli.context import RunContext
from src.core.artifacts import write_json
from src.core.audit import get_audit
from src.core.logger import get_logger, log_elapsed
from src.core.types import DomainSummaryRecord

logger = get_logger(__name__)


def run_e2e(ctx: RunContext) -> Dict[str, Any]:
    start = time.perf_counter()
    get_audit().reset()
    stages.gen_data(ctx)
    captions = stages.run_captions(ctx)
    _, student, _ = stages.pretrain(ctx)

    clear = stages.evaluate_student(ctx, student, ctx.data_path(ctx.source_domain, "test"), "no_adapt_clear")
    domains: Dict[str, DomainSummaryRecord] = {}
    for domain in ctx.target_domains:
        domain_start = time.perf_counter()
        test_path = ctx.data_path(domain, "test")
        styles = stages.steer_domain(ctx, domain)
        stages.adapt_teacher(ctx, domain)
        stages.pseudo_label_domain(ctx, domain)
        adapted = stages.adapt_student(ctx, domain)
        oracle = stages.train_oracle(ctx, domain)

        no_adapt_map = stages.evaluate_student(ctx, student, test_path, f"no_adapt_{domain}").map50
        adapted_map = stages.evaluate_student(ctx, adapted, test_path, f"adapted_{domain}").map50
        oracle_map = stages.evaluate_student(ctx, oracle, test_path, f"oracle_{domain}").map50
        cos_init, cos_final = stages.mean_cosines(styles)
        domains[domain] = {
            "no_adapt": no_adapt_map,
            "adapted": adapted_map,
            "oracle": oracle_map,
            "delta": adapted_map - no_adapt_map,
            "prompt": str(styles.info.get("prompt", "")),
            "prompt_cosine": float(styles.info.get("prompt_cosine", 0.0)),
            "steer_cosine_init": cos_init,
            "steer_cosine_final": cos_final,
        }
        log_elapsed(f"e2e domain {domain}", domain_start,
                    f"no-adapt {no_adapt_map:.4f} adapted {adapted_map:.4f} oracle {oracle_map:.4f}")

    adaptation_phases = [log.phase for log in get_audit().logs()
                         if log.phase.split("/")[0] in ("steer", "adapt-teacher", "pseudo-label", "adapt-student")]
    summary = {
        "source_domain": ctx.source_domain,
        "source_prompt": captions.prompts.get(ctx.source_domain, ""),
        "clear_reference": clear.map50,
        "domains": domains,
        "audit": {"adaptation_phases": adaptation_phases, "violations": 0},
    }
    write_json(ctx.out / "summary.json", summary, ctx.meta)
    table = format_summary(summary)
    with open(ctx.out / "summary.txt", "w", encoding="utf-8", newline="\n") as f:
        f.write(table)
    log_elapsed("e2e", start)
    return summary


def _points(value: float) -> str:
    return f"{100.0 * value:8.2f}"


def format_summary(summary: Dict[str, Any]) -> str:
    """Fixed-width mAP@50 table, values in points"""
    header = f"{'domain':<10}{'no-adapt':>10}{'adapted':>10}{'oracle':>10}{'delta':>10}{'prompt-cos':>12}"
    lines: List[str] = [header, "-" * len(header)]
    lines.append(f"{summary['source_domain']:<10}  {_points(summary['clear_reference'])}"
                 f"{'-':>10}{'-':>10}{'-':>10}{'-':>12}")
    for name, row in summary["domains"].items():
        lines.append(
            f"{name:<10}  {_points(row['no_adapt'])}  {_points(row['adapted'])}  {_points(row['oracle'])}"
            f"  {100.0 * row['delta']:+8.2f}{row['prompt_cosine']:12.4f}"
        )
    return "\n".join(lines) + "\n"
