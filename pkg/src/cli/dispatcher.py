# -*- coding: utf-8 -*-
"""
CLI Dispatcher - argparse front end for the pipeline stages

Exit codes: 0 success, 1 usage error (help text printed), 2 data / schema /
configuration error.
"""
import argparse
import sys
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence

from src import __version__
from src.cli import stages
from src.cli.context import DEFAULT_CONFIG, RunContext
from src.cli.e2e import format_summary, run_e2e
from src.core.errors import ConfigError, PromptSteerError, UsageError
from src.core.logger import get_logger, get_run_log
from src.core.settings import RunSettings
from src.detection.detector import load_student

logger = get_logger(__name__)


EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting"""

    def error(self, message: str):  # type: ignore[override]
        raise UsageError(message)


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, help="run seed (overrides the config file)")
    parser.add_argument("--config", default=str(DEFAULT_CONFIG), help="YAML / JSON run config")
    parser.add_argument("--out", default="runs/default", help="output directory")


def _domain(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--domain", required=True, help="target domain name")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="promptsteer", description="Prompt-steered zero-shot detector adaptation")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    p = sub.add_parser("gen-data", help="generate source and target datasets")
    _common(p)

    p = sub.add_parser("captions", help="parse / normalize / filter captions into prompts")
    _common(p)
    p.add_argument("--input", help="caption JSONL (default: paths.captions)")

    p = sub.add_parser("pretrain", help="train teacher head and student on source data, build the cache")
    _common(p)
    p.add_argument("--epochs", type=int, help="epochs for both models")
    p.add_argument("--lr", type=float, help="learning rate for both models")

    p = sub.add_parser("steer", help="optimize style statistics toward a target prompt")
    _common(p)
    _domain(p)
    p.add_argument("--prompt", help="target prompt text (default: from captions)")
    p.add_argument("--steps", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--momentum", type=float)

    p = sub.add_parser("adapt-teacher", help="fine-tune the teacher head on steered cache features")
    _common(p)
    _domain(p)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--momentum", type=float)

    p = sub.add_parser("pseudo-label", help="teacher pseudo-labels for target images")
    _common(p)
    _domain(p)
    p.add_argument("--tau", type=float)

    p = sub.add_parser("adapt-student", help="train the student on teacher pseudo-labels")
    _common(p)
    _domain(p)
    p.add_argument("--tau", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--momentum", type=float)

    p = sub.add_parser("eval", help="mAP@50 report")
    _common(p)
    p.add_argument("--dataset", required=True, help="labeled dataset JSONL")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--model", help="student model JSON")
    source.add_argument("--predictions", help="detections JSONL, one line per dataset image")
    p.add_argument("--name", default="eval", help="report name")

    p = sub.add_parser("e2e", help="full pipeline and summary table")
    _common(p)
    p.add_argument("--tau", type=float)
    p.add_argument("--steps", type=int, help="steering steps")
    p.add_argument("--lr", type=float, help="steering learning rate")
    p.add_argument("--momentum", type=float, help="steering momentum")
    p.add_argument("--epochs", type=int, help="teacher fine-tuning epochs")
    return parser


# flag -> settings key, per subcommand
_OVERRIDES: Dict[str, Dict[str, str]] = {
    "pretrain": {"epochs": "pretrain.teacher_epochs|pretrain.student_epochs",
                 "lr": "pretrain.teacher_lr|pretrain.student_lr"},
    "steer": {"steps": "steering.steps", "lr": "steering.lr", "momentum": "steering.momentum"},
    "adapt-teacher": {"epochs": "finetune_teacher.epochs", "lr": "finetune_teacher.lr",
                      "momentum": "training.momentum"},
    "pseudo-label": {"tau": "pseudo_label.tau"},
    "adapt-student": {"tau": "pseudo_label.tau", "epochs": "adapt_student.epochs", "lr": "adapt_student.lr",
                      "momentum": "training.momentum"},
    "e2e": {"tau": "pseudo_label.tau", "steps": "steering.steps", "lr": "steering.lr",
            "momentum": "steering.momentum", "epochs": "finetune_teacher.epochs"},
}


def load_run_settings(args: argparse.Namespace) -> RunSettings:
    settings = RunSettings(args.config)
    overrides: Dict[str, Any] = {"seed": args.seed}
    for flag, keys in _OVERRIDES.get(args.command, {}).items():
        for key in keys.split("|"):
            overrides[key] = getattr(args, flag, None)
    settings.apply_overrides(overrides)
    return settings


def _cmd_gen_data(ctx: RunContext, args: argparse.Namespace) -> None:
    for name in stages.gen_data(ctx):
        print(f"wrote {ctx.out / 'data' / name}.jsonl")


def _cmd_captions(ctx: RunContext, args: argparse.Namespace) -> None:
    run = stages.run_captions(ctx, args.input)
    print(f"kept {len(run.kept)}, rejected {len(run.rejected)}")
    for domain, prompt in sorted(run.prompts.items()):
        print(f"{domain}: {prompt}")


def _cmd_pretrain(ctx: RunContext, args: argparse.Namespace) -> None:
    stages.pretrain(ctx)
    print(f"wrote {ctx.model_path('teacher_head')}, {ctx.model_path('student')}, {ctx.cache_path}")


def _cmd_steer(ctx: RunContext, args: argparse.Namespace) -> None:
    styles = stages.steer_domain(ctx, args.domain, args.prompt)
    cos_init, cos_final = stages.mean_cosines(styles)
    print(f"{args.domain}: mean cosine {cos_init:.4f} -> {cos_final:.4f}, wrote {ctx.styles_path(args.domain)}")


def _cmd_adapt_teacher(ctx: RunContext, args: argparse.Namespace) -> None:
    stages.adapt_teacher(ctx, args.domain)
    print(f"wrote {ctx.model_path('teacher_' + args.domain)}")


def _cmd_pseudo_label(ctx: RunContext, args: argparse.Namespace) -> None:
    labels = stages.pseudo_label_domain(ctx, args.domain)
    print(f"{sum(len(d) for d in labels)} pseudo-labels over {len(labels)} images, "
          f"wrote {ctx.pseudo_path(args.domain)}")


def _cmd_adapt_student(ctx: RunContext, args: argparse.Namespace) -> None:
    stages.adapt_student(ctx, args.domain)
    print(f"wrote {ctx.model_path('student_' + args.domain)}")


def _cmd_eval(ctx: RunContext, args: argparse.Namespace) -> None:
    if args.model:
        report = stages.evaluate_student(ctx, load_student(args.model), Path(args.dataset), args.name)
    else:
        report = stages.evaluate_predictions(ctx, Path(args.predictions), Path(args.dataset), args.name)
    print(f"map50 {report.map50:.4f}, wrote {ctx.report_path(args.name)}")


def _cmd_e2e(ctx: RunContext, args: argparse.Namespace) -> None:
    print(format_summary(run_e2e(ctx)), end="")


_COMMANDS: Dict[str, Callable[[RunContext, argparse.Namespace], None]] = {
    "gen-data": _cmd_gen_data,
    "captions": _cmd_captions,
    "pretrain": _cmd_pretrain,
    "steer": _cmd_steer,
    "adapt-teacher": _cmd_adapt_teacher,
    "pseudo-label": _cmd_pseudo_label,
    "adapt-student": _cmd_adapt_student,
    "eval": _cmd_eval,
    "e2e": _cmd_e2e,
}


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit code"""
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("no command given")
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # --help / --version
        return int(e.code or 0)

    try:
        ctx = RunContext(load_run_settings(args), args.out)
        run_log = get_run_log()
        try:
            run_log.configure(log_file=str(ctx.out / "run.log"),
                              level=str(ctx.settings.require("logging.level")),
                              echo_warnings=bool(ctx.settings.require("logging.echo_warnings")))
        except ValueError as e:
            raise ConfigError(str(e)) from e
        run_log.unbind()
        run_log.bind(command=args.command, seed=ctx.seed)
        logger.info(f"Command: {args.command} {' '.join(argv[1:])}")
        _COMMANDS[args.command](ctx, args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    except PromptSteerError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK
