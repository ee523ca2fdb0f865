# -*- coding: utf-8 -*-
import json
import time

import pytest
from numpy.testing import assert_array_equal

from src import __version__
from src.cli.dispatcher import EXIT_DATA, EXIT_OK, EXIT_USAGE, dispatch
from src.core.artifacts import read_json, write_jsonl
from src.core.audit import get_audit
from src.core.tensor import channel_stats
from src.detection.dataset import SceneDataset
from src.detection.source_cache import SourceCache
from src.encoder.dual_encoder import EncoderWeights
from src.steering.steer import load_style_set
from tests.conftest import FIXTURES


SMALL = str(FIXTURES / "run_small.yaml")
ADAPTATION_STAGES = ("steer", "adapt-teacher", "pseudo-label", "adapt-student")


def run(*argv, out=None, config=SMALL):
    args = list(argv)
    if out is not None:
        args += ["--out", str(out), "--config", config]
    return dispatch(args)


@pytest.fixture(scope="module")
def pretrained(tmp_path_factory):
    """gen-data + captions + pretrain in the small configuration"""
    out = tmp_path_factory.mktemp("run")
    for command in ("gen-data", "captions", "pretrain"):
        assert run(command, out=out) == EXIT_OK
    return out


class TestExitCodes:

    def test_no_command(self, capsys):
        assert dispatch([]) == EXIT_USAGE
        assert "usage" in capsys.readouterr().err

    def test_unknown_command(self):
        assert dispatch(["bogus"]) == EXIT_USAGE

    def test_version(self, capsys):
        assert dispatch(["--version"]) == EXIT_OK
        assert __version__ in capsys.readouterr().out

    def test_help(self):
        assert dispatch(["--help"]) == EXIT_OK

    def test_missing_required_flag(self, tmp_path):
        assert run("steer", out=tmp_path) == EXIT_USAGE

    def test_missing_config(self, tmp_path):
        assert run("gen-data", out=tmp_path, config=str(tmp_path / "nope.yaml")) == EXIT_DATA

    def test_steer_before_captions(self, tmp_path, capsys):
        assert run("steer", "--domain", "fog", out=tmp_path) == EXIT_DATA
        assert "captions" in capsys.readouterr().err

    def test_unknown_domain(self, tmp_path):
        assert run("gen-data", out=tmp_path, config=str(_write_config(tmp_path, "data:\n  target_domains: [lava]\n"))) \
            == EXIT_DATA

    def test_negative_encoder_seed(self, tmp_path, capsys):
        config = _write_config(tmp_path, "encoder:\n  seed: -1\n")
        assert run("gen-data", out=tmp_path, config=str(config)) == EXIT_DATA
        assert "seed" in capsys.readouterr().err

    def test_negative_run_seed(self, tmp_path):
        assert run("gen-data", "--seed", "-3", out=tmp_path) == EXIT_DATA

    def test_fractional_scene_count(self, tmp_path):
        config = _write_config(tmp_path, "data:\n  train_scenes: 2.5\n")
        assert run("gen-data", out=tmp_path, config=str(config)) == EXIT_DATA


def _write_config(tmp_path, body):
    path = tmp_path / "config.yaml"
    path.write_text(body, encoding="utf-8")
    return path


class TestStages:

    def test_gen_data_layout(self, pretrained):
        data = pretrained / "data"
        for name in ("clear_train", "clear_test", "fog_train", "fog_test", "fog_adapt", "cache"):
            assert (data / f"{name}.jsonl").exists()
            assert (data / f"{name}.meta.json").exists()
        assert len(SceneDataset(data / "clear_train.jsonl", role="eval")) == 8
        assert len(SceneDataset(data / "cache.jsonl", role="cache")) == 5

    def test_captions_output(self, pretrained):
        prompts = read_json(pretrained / "captions" / "prompts.json")["prompts"]
        assert prompts["fog"] == "an aerial view of desert plain morning in fog"

    def test_zero_step_steering_keeps_source_statistics(self, pretrained):
        assert run("steer", "--domain", "fog", "--steps", "0", out=pretrained) == EXIT_OK
        styles = load_style_set(pretrained / "styles" / "fog.json")
        assert styles.info["prompt"] == "an aerial view of desert plain morning in fog"
        w = EncoderWeights.load(pretrained / "models" / "encoder.p2aw")
        cache = SourceCache.load(pretrained / "data" / "cache.jsonl", w)
        for entry, features in zip(styles.entries, cache.features):
            stats = channel_stats(features)
            assert_array_equal(entry.style.mu, stats.mu)
            assert_array_equal(entry.style.sigma, stats.sigma)

    def test_eval_with_perfect_predictions(self, pretrained):
        dataset_path = pretrained / "data" / "clear_test.jsonl"
        dataset = SceneDataset(dataset_path, role="eval")
        rows = [{"detections": [dict(box.to_record(), confidence=1.0) for box in truth]}
                for truth in dataset.truths()]
        predictions = write_jsonl(pretrained / "perfect.jsonl", rows)
        assert run("eval", "--dataset", str(dataset_path), "--predictions", str(predictions),
                   "--name", "perfect", out=pretrained) == EXIT_OK
        assert read_json(pretrained / "reports" / "perfect.json")["map50"] == 1.0

    def test_eval_line_count_mismatch(self, pretrained):
        predictions = write_jsonl(pretrained / "short.jsonl", [{"detections": []}])
        assert run("eval", "--dataset", str(pretrained / "data" / "clear_test.jsonl"),
                   "--predictions", str(predictions), out=pretrained) == EXIT_DATA


class TestEndToEnd:

    def test_reruns_are_byte_identical_and_firewalled(self, tmp_path):
        for name in ("a", "b"):
            assert run("e2e", out=tmp_path / name) == EXIT_OK
        for artifact in ("summary.json", "summary.txt"):
            assert (tmp_path / "a" / artifact).read_bytes() == (tmp_path / "b" / artifact).read_bytes()

        summary = json.loads((tmp_path / "a" / "summary.json").read_text(encoding="utf-8"))
        assert set(summary["domains"]) == {"fog"}
        assert summary["audit"]["violations"] == 0

        phases = [log for log in get_audit().logs() if log.phase.split("/")[0] in ADAPTATION_STAGES]
        assert {log.phase.split("/")[0] for log in phases} == set(ADAPTATION_STAGES)
        for log in phases:
            assert log.truth_count("target") == 0
            assert log.images("source") == set()


@pytest.mark.slow
class TestDefaultConfiguration:
    """Degradation and recovery with the shipped configuration (several minutes)"""

    SHIFTED = ("fog", "dust", "rain", "snow")
    BUDGET_SECONDS = 300.0

    @pytest.fixture(scope="class")
    def summary(self, tmp_path_factory):
        out = tmp_path_factory.mktemp("default")
        start = time.perf_counter()
        assert dispatch(["e2e", "--out", str(out)]) == EXIT_OK
        summary = read_json(out / "summary.json")
        summary["elapsed_seconds"] = time.perf_counter() - start
        return summary

    def test_finishes_within_budget(self, summary):
        assert summary["elapsed_seconds"] < self.BUDGET_SECONDS

    def test_shifted_domains_degrade(self, summary):
        for domain in self.SHIFTED:
            assert summary["clear_reference"] - summary["domains"][domain]["no_adapt"] >= 0.10, domain

    def test_adaptation_recovers(self, summary):
        deltas = [summary["domains"][domain]["delta"] for domain in self.SHIFTED]
        assert sum(delta >= 0.05 for delta in deltas) >= 3
        assert min(deltas) >= -0.02
