# -*- coding: utf-8 -*-
import pytest

from src.core.audit import get_audit, violations
from src.core.errors import ConfigError, SchemaError
from src.core.seeded_rng import SeededRng
from src.detection.dataset import SceneDataset, write_dataset
from src.detection.source_cache import CACHE_SIZE, SourceCache
from tests.helpers import clear_scenes


@pytest.fixture
def source_split(tmp_path):
    return write_dataset(tmp_path / "data" / "clear_train.jsonl", clear_scenes(1, 8))


class TestSourceCache:

    @pytest.mark.parametrize("count", [4, 6])
    def test_holds_exactly_five(self, weights, count):
        with pytest.raises(ConfigError):
            SourceCache(clear_scenes(1, count), weights)

    def test_select_save_load(self, tmp_path, weights, source_split):
        dataset = SceneDataset(source_split, role="source")
        cache = SourceCache.select(dataset, weights, SeededRng(3))
        assert len(cache) == CACHE_SIZE
        assert cache.image_ids <= {dataset.image_id(i) for i in range(len(dataset))}

        again = SourceCache.select(dataset, weights, SeededRng(3))
        assert cache.image_ids == again.image_ids

        path = cache.save(tmp_path / "data" / "cache.jsonl")
        loaded = SourceCache.load(path, weights)
        for a, b in zip(cache.entries, loaded.entries):
            assert a.scene.image.equals(b.scene.image)
            assert a.scene.truth == b.scene.truth
            assert a.features.equals(b.features)

    def test_too_small_split(self, tmp_path, weights):
        path = write_dataset(tmp_path / "tiny.jsonl", clear_scenes(1, 3))
        with pytest.raises(ConfigError):
            SourceCache.select(SceneDataset(path, role="source"), weights, SeededRng(0))


class TestDataAccessAudit:

    def test_cache_reads_are_clean(self, tmp_path, weights, source_split):
        cache = SourceCache.select(SceneDataset(source_split, role="source"), weights, SeededRng(0))
        path = cache.save(tmp_path / "data" / "cache.jsonl")
        with get_audit().phase("adapt-teacher") as log:
            loaded = SourceCache.load(path, weights)
        assert len(log.images("cache")) == CACHE_SIZE
        assert log.truth_count("cache") == CACHE_SIZE
        assert violations(log, loaded.image_ids) == []

    def test_breaches_are_reported(self, tmp_path, weights, source_split):
        source = SceneDataset(source_split, role="source")
        target_path = write_dataset(tmp_path / "data" / "fog_adapt.jsonl", clear_scenes(2, 2))
        target = SceneDataset(target_path, role="target")
        with get_audit().phase("adapt-student") as log:
            source.load_image(0)
            target.images()
            target.load_truth(1)
        found = violations(log, set())
        assert ("target-truth", "1 reads") in found
        assert ("source-image", source.image_id(0)) in found
        assert len(log.images("target")) == 2

    def test_reads_outside_a_phase_are_not_logged(self, source_split):
        SceneDataset(source_split, role="source").load_scene(0)
        assert get_audit().logs() == []


class TestDataset:

    def test_round_trip_and_meta(self, tmp_path):
        scenes = clear_scenes(4, 3)
        path = write_dataset(tmp_path / "s.jsonl", scenes, {"seed": 4, "config_hash": "x", "tool_version": "1.0.0"})
        assert path.with_name("s.meta.json").exists()
        dataset = SceneDataset(path, role="eval")
        assert len(dataset) == 3
        for scene, loaded in zip(scenes, dataset.scenes()):
            assert scene.image.equals(loaded.image)
            assert scene.truth == loaded.truth

    def test_bad_record(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"image": "a.p2af"}\n', encoding="utf-8")
        with pytest.raises(SchemaError):
            SceneDataset(path, role="eval")
