# -*- coding: utf-8 -*-
"""
Pipeline Stages - one function per subcommand, reading and writing the run layout

Stages communicate only through files under <out>, so every subcommand can run
on its own and `e2e` is the same stages in sequence.
"""
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from src.captions.filter_policy import FilterPolicy
from src.captions.pipeline import CaptionRun, run_caption_pipeline
from src.captions.prompts import PromptTemplateManager
from src.captions.synonyms import SynonymTable
from src.cli.context import RunContext
from src.core.artifacts import read_json, read_jsonl, write_json, write_jsonl
from src.core.audit import AccessLog, get_audit, violations
from src.core.errors import ConfigError, DataError
from src.core.logger import get_logger, log_elapsed, log_stage
from src.core.tensor import Tensor
from src.core.types import DetectionsLine
from src.detection.boxes import Detections
from src.detection.dataset import SceneDataset, write_dataset
from src.detection.detector import (
    StudentModel, TeacherHead, load_student, load_teacher_head, save_model,
)
from src.detection.metrics import EvalReport, evaluate_map
from src.detection.postprocess import student_detect
from src.detection.scenes import gen_scenes
from src.detection.source_cache import SourceCache
from src.detection.training import (
    adapt_student_trace, finetune_teacher_trace, label_target_images, pretrain_student, pretrain_teacher,
)
from src.encoder.dual_encoder import encode_image_layer1, encode_text
from src.steering.steer import StyleSet, load_style_set, save_style_set, steer

logger = get_logger(__name__)


@contextmanager
def adaptation_phase(ctx: RunContext, name: str) -> Iterator[AccessLog]:
    """Audited phase: no target truth, no source image outside the cache"""
    with get_audit().phase(name) as log:
        yield log
    cache_ids = set()
    if ctx.cache_path.exists():
        cache = SceneDataset(ctx.cache_path, role="cache")
        cache_ids = {cache.image_id(i) for i in range(len(cache))}
    found = violations(log, cache_ids)
    if found:
        raise DataError(f"data access violations in phase {name!r}: {found}")


def gen_data(ctx: RunContext) -> List[str]:
    """Labeled train/test splits for every domain plus an adaptation split per target"""
    start = time.perf_counter()
    counts = {
        "train": ctx.settings.require_int("data.train_scenes"),
        "test": ctx.settings.require_int("data.test_scenes"),
        "adapt": ctx.settings.require_int("data.target_images"),
    }
    written = []
    for name in [ctx.source_domain] + ctx.target_domains:
        domain = ctx.domain(name)
        splits = ["train", "test"] if name == ctx.source_domain else ["train", "test", "adapt"]
        for split in splits:
            scenes = gen_scenes(domain, ctx.derive_seed(f"scenes/{name}/{split}"), counts[split])
            write_dataset(ctx.data_path(name, split), scenes, ctx.meta)
            written.append(f"{name}_{split}")
    log_elapsed("gen-data", start, f"{len(written)} splits")
    return written


def run_captions(ctx: RunContext, input_path: Optional[str] = None) -> CaptionRun:
    log_stage("captions")
    table = SynonymTable.load(ctx.resolve("paths.synonyms"))
    policy = FilterPolicy.load(ctx.resolve("paths.filter_policy"))
    templates = PromptTemplateManager(ctx.resolve("paths.templates_dir"))
    source = input_path if input_path is not None else ctx.resolve("paths.captions")
    run = run_caption_pipeline(source, table, policy, templates, str(ctx.settings.require("prompts.template")))
    run.save(ctx.out / "captions", ctx.meta)
    return run


def pretrain(ctx: RunContext) -> Tuple[TeacherHead, StudentModel, SourceCache]:
    """Source-only training of the teacher head and the student, then the five-image cache"""
    log_stage("pretrain")
    w = ctx.encoder
    radius = ctx.settings.require_int("detector.head_radius")
    init_scale = ctx.settings.require_float("detector.init_scale")
    momentum = ctx.settings.require_float("training.momentum")
    path = ctx.require_file(ctx.data_path(ctx.source_domain, "train"), "gen-data")

    with get_audit().phase("pretrain"):
        dataset = SceneDataset(path, role="source")
        images = dataset.images()
        truths = dataset.truths()
        features = [encode_image_layer1(image, w) for image in images]

        teacher = pretrain_teacher(
            TeacherHead.init(ctx.derive_seed("init/teacher"), w.layer1_channels, radius, init_scale),
            features, truths,
            ctx.settings.require_int("pretrain.teacher_epochs"), ctx.settings.require_float("pretrain.teacher_lr"),
            ctx.rng("pretrain/teacher"), momentum, decay=ctx.lr_decay(),
        )
        student = pretrain_student(
            initial_student(ctx), images, truths,
            ctx.settings.require_int("pretrain.student_epochs"), ctx.settings.require_float("pretrain.student_lr"),
            ctx.rng("pretrain/student"), momentum, decay=ctx.lr_decay(),
        )
        cache = SourceCache.select(dataset, w, ctx.rng("cache"))

    save_model(ctx.model_path("teacher_head"), teacher.model, ctx.meta)
    save_model(ctx.model_path("student"), student.model, ctx.meta)
    cache.save(ctx.cache_path, ctx.meta)
    write_json(ctx.report_path("pretrain"), {
        "teacher_losses": teacher.epoch_losses,
        "student_losses": student.epoch_losses,
    }, ctx.meta)
    return teacher.model, student.model, cache


def initial_student(ctx: RunContext) -> StudentModel:
    return StudentModel.init(
        ctx.derive_seed("init/student"),
        ctx.settings.require_int("encoder.layer1_channels"),
        ctx.settings.require_int("detector.head_radius"),
        ctx.settings.require_float("detector.init_scale"),
    )


def _prompts(ctx: RunContext) -> Dict[str, str]:
    return dict(read_json(ctx.require_file(ctx.prompts_path, "captions")).get("prompts", {}))


def steer_domain(ctx: RunContext, domain: str, prompt: Optional[str] = None) -> StyleSet:
    """Prompt-steered style statistics for one target domain, from the cached source features"""
    log_stage("steer", domain)
    w = ctx.encoder
    prompts = _prompts(ctx)
    target_prompt = prompt if prompt is not None else prompts.get(domain)
    if not target_prompt:
        raise ConfigError(f"no prompt for domain {domain!r}; captions produced {sorted(prompts)}")
    trg = encode_text(target_prompt, w)

    with adaptation_phase(ctx, f"steer/{domain}"):
        cache = SourceCache.load(ctx.require_file(ctx.cache_path, "pretrain"), w)
        styles = steer(cache.features, trg, ctx.steering_config(), w)
    info = {"domain": domain, "prompt": target_prompt}
    source_prompt = prompts.get(ctx.source_domain)
    if source_prompt:
        info["source_prompt"] = source_prompt
        info["prompt_cosine"] = encode_text(source_prompt, w).cosine(trg)
    styles = StyleSet(styles.entries, styles.config_echo, info)
    save_style_set(ctx.styles_path(domain), styles, ctx.meta)
    return styles


def adapt_teacher(ctx: RunContext, domain: str) -> TeacherHead:
    log_stage("adapt-teacher", domain)
    w = ctx.encoder
    head = load_teacher_head(ctx.require_file(ctx.model_path("teacher_head"), "pretrain"))
    styles = load_style_set(ctx.require_file(ctx.styles_path(domain), "steer"))
    before = w.fingerprint()
    with adaptation_phase(ctx, f"adapt-teacher/{domain}"):
        cache = SourceCache.load(ctx.require_file(ctx.cache_path, "pretrain"), w)
        result = finetune_teacher_trace(
            cache, styles, head,
            ctx.settings.require_int("finetune_teacher.epochs"), ctx.settings.require_float("finetune_teacher.lr"),
            ctx.rng(f"finetune/{domain}"), ctx.settings.require_float("training.momentum"), ctx.lr_decay(),
        )
    if w.fingerprint() != before:
        raise DataError("encoder weights changed during teacher fine-tuning")
    save_model(ctx.model_path(f"teacher_{domain}"), result.model, ctx.meta)
    write_json(ctx.report_path(f"finetune_{domain}"), {"epoch_losses": result.epoch_losses}, ctx.meta)
    return result.model


def _target_images(ctx: RunContext, domain: str) -> Tuple[SceneDataset, List[Tensor]]:
    dataset = SceneDataset(ctx.require_file(ctx.data_path(domain, "adapt"), "gen-data"), role="target")
    return dataset, dataset.images()


def _labeling_styles(ctx: RunContext, domain: str) -> Optional[StyleSet]:
    """Steered styles the teacher labels in, or None when pseudo_label.restyle is off"""
    if not ctx.settings.require("pseudo_label.restyle"):
        return None
    return load_style_set(ctx.require_file(ctx.styles_path(domain), "steer"))


def pseudo_label_domain(ctx: RunContext, domain: str) -> List[Detections]:
    log_stage("pseudo-label", domain)
    w = ctx.encoder
    head = load_teacher_head(ctx.require_file(ctx.model_path(f"teacher_{domain}"), "adapt-teacher"))
    styles = _labeling_styles(ctx, domain)
    with adaptation_phase(ctx, f"pseudo-label/{domain}"):
        dataset, images = _target_images(ctx, domain)
        labels = label_target_images(images, head, w, ctx.settings.require_float("pseudo_label.tau"),
                                     ctx.detect_config(), styles)
    rows: List[DetectionsLine] = [
        {"image": dataset.image_path(i).relative_to(ctx.out.resolve()).as_posix(), "detections": d.to_records()}
        for i, d in enumerate(labels)
    ]
    write_jsonl(ctx.pseudo_path(domain), rows, ctx.meta)
    return labels


def adapt_student(ctx: RunContext, domain: str) -> StudentModel:
    log_stage("adapt-student", domain)
    w = ctx.encoder
    student = load_student(ctx.require_file(ctx.model_path("student"), "pretrain"))
    head = load_teacher_head(ctx.require_file(ctx.model_path(f"teacher_{domain}"), "adapt-teacher"))
    styles = _labeling_styles(ctx, domain)
    with adaptation_phase(ctx, f"adapt-student/{domain}"):
        _, images = _target_images(ctx, domain)
        result = adapt_student_trace(
            student, images, head, w,
            ctx.settings.require_float("pseudo_label.tau"),
            ctx.settings.require_int("adapt_student.epochs"), ctx.settings.require_float("adapt_student.lr"),
            ctx.rng(f"adapt/{domain}"), ctx.settings.require_float("training.momentum"), ctx.detect_config(),
            styles, ctx.settings.require_float("adapt_student.min_labeled_fraction"), ctx.lr_decay(),
        )
    save_model(ctx.model_path(f"student_{domain}"), result.model, ctx.meta)
    write_json(ctx.report_path(f"adapt_{domain}"), {
        "epoch_losses": result.epoch_losses,
        "pseudo_labels": sum(len(d) for d in result.labels),
        "labeled_fraction": result.labeled_fraction,
        "skipped": result.skipped,
    }, ctx.meta)
    return result.model


def train_oracle(ctx: RunContext, domain: str) -> StudentModel:
    """In-domain upper bound: the student trained on labeled target-domain data"""
    log_stage("oracle", domain)
    with get_audit().phase(f"oracle/{domain}"):
        dataset = SceneDataset(ctx.require_file(ctx.data_path(domain, "train"), "gen-data"), role="oracle")
        result = pretrain_student(
            initial_student(ctx), dataset.images(), dataset.truths(),
            ctx.settings.require_int("pretrain.student_epochs"), ctx.settings.require_float("pretrain.student_lr"),
            ctx.rng(f"oracle/{domain}"), ctx.settings.require_float("training.momentum"), stage="oracle student",
            decay=ctx.lr_decay(),
        )
    save_model(ctx.model_path(f"oracle_{domain}"), result.model, ctx.meta)
    return result.model


def evaluate_student(ctx: RunContext, student: StudentModel, dataset_path: Path, name: str) -> EvalReport:
    with get_audit().phase(f"eval/{name}"):
        dataset = SceneDataset(dataset_path, role="eval")
        preds = [student_detect(image, student, ctx.detect_config()) for image in dataset.images()]
        report = evaluate_map(preds, dataset.truths())
    report.save(ctx.report_path(name), ctx.meta)
    logger.info(f"Eval: {name} mAP@50 = {report.map50:.4f}")
    return report


def evaluate_predictions(ctx: RunContext, predictions_path: Path, dataset_path: Path, name: str) -> EvalReport:
    """mAP of a detections JSONL against a labeled split, lines matched in order"""
    rows = read_jsonl(predictions_path)
    with get_audit().phase(f"eval/{name}"):
        dataset = SceneDataset(dataset_path, role="eval")
        if len(rows) != len(dataset):
            raise DataError(f"{predictions_path} has {len(rows)} lines, {dataset_path} has {len(dataset)}")
        preds = [Detections.from_records(row.get("detections", [])) for row in rows]
        report = evaluate_map(preds, dataset.truths())
    report.save(ctx.report_path(name), ctx.meta)
    return report


def mean_cosines(styles: StyleSet) -> Tuple[float, float]:
    return (float(np.mean([e.cosine_init for e in styles.entries])),
            float(np.mean([e.cosine_final for e in styles.entries])))
