# -*- coding: utf-8 -*-
from itertools import combinations

import numpy as np
import pytest

from src.core.errors import ConfigError, PlacementError
from src.core.seeded_rng import SeededRng
from src.detection import scenes
from src.detection.boxes import iou
from src.detection.scenes import (
    CLASS_COLORS, HAZE_LEVEL, IMAGE_SIZE, DomainConfig, _sample_layout, gen_scene, gen_scenes, load_domains,
)
from src.cli.context import PROJECT_ROOT


DOMAINS_DIR = PROJECT_ROOT / "data" / "domains"


def uncovered_pixel(boxes, index):
    """A pixel inside boxes[index] that no later box paints over"""
    box = boxes[index]
    for y in range(int(box.y1), int(box.y2)):
        for x in range(int(box.x1), int(box.x2)):
            if not any(b.x1 <= x < b.x2 and b.y1 <= y < b.y2 for b in boxes[index + 1:]):
                return y, x
    return None


class TestGenScene:

    def test_clear_domain_keeps_class_colors(self):
        seen_class0 = False
        for seed in range(30):
            scene = gen_scene(DomainConfig.clear(), SeededRng(seed))
            for index, box in enumerate(scene.truth):
                pixel = uncovered_pixel(scene.truth, index)
                if pixel is None:
                    continue
                y, x = pixel
                assert np.array_equal(scene.image.data[:, y, x], CLASS_COLORS[box.class_id])
                seen_class0 |= box.class_id == 0
        assert seen_class0

    @pytest.mark.parametrize("name", ["clear", "fog", "dust", "rain", "snow", "leaves"])
    def test_generator_contract(self, name):
        domain = load_domains(DOMAINS_DIR)[name]
        for scene in gen_scenes(domain, 5, 20):
            assert scene.image.shape == (3, IMAGE_SIZE, IMAGE_SIZE)
            assert scene.image.data.min() >= 0.0 and scene.image.data.max() <= 1.0
            assert 1 <= len(scene.truth) <= 3
            for box in scene.truth:
                assert box.within(IMAGE_SIZE, IMAGE_SIZE)
                assert box.area >= 16
            for a, b in combinations(scene.truth, 2):
                assert iou(a, b) < 0.3

    def test_fog_matches_straight_line_shift(self):
        fog = load_domains(DOMAINS_DIR)["fog"]
        scene = gen_scene(fog, SeededRng(3))

        rng = SeededRng(3)
        background = rng.uniform(0.3, 0.6)
        boxes = _sample_layout(rng, IMAGE_SIZE)
        assert boxes == scene.truth
        noise = rng.fill_normal(3 * IMAGE_SIZE * IMAGE_SIZE).reshape(3, IMAGE_SIZE, IMAGE_SIZE)

        for c in range(3):
            gain, bias = fog.channel_gain[c], fog.channel_bias[c]
            for y in range(IMAGE_SIZE):
                for x in range(IMAGE_SIZE):
                    px = background
                    for box in boxes:
                        if box.x1 <= x < box.x2 and box.y1 <= y < box.y2:
                            px = CLASS_COLORS[box.class_id][c]
                    value = (1.0 - fog.gray_blend) * (gain * px + bias) + fog.gray_blend * HAZE_LEVEL
                    value = min(max(value, 0.0), 1.0)
                    value = min(max(value + fog.noise_std * noise[c, y, x], 0.0), 1.0)
                    assert scene.image.data[c, y, x] == pytest.approx(value, abs=1e-12)

    def test_seeded_generation_is_repeatable(self):
        domain = load_domains(DOMAINS_DIR)["rain"]
        a, b = gen_scenes(domain, 17, 4), gen_scenes(domain, 17, 4)
        for x, y in zip(a, b):
            assert x.image.equals(y.image)
            assert x.truth == y.truth

    def test_placement_budget(self, monkeypatch):
        monkeypatch.setattr(scenes, "MAX_PLACEMENT_ATTEMPTS", 0)
        with pytest.raises(PlacementError):
            gen_scene(DomainConfig.clear(), SeededRng(1))


class TestDomainConfig:

    def test_shipped_domains(self):
        domains = load_domains(DOMAINS_DIR)
        assert set(domains) == {"clear", "fog", "dust", "rain", "snow", "leaves"}
        assert domains["fog"].gray_blend == 0.6
        assert domains["fog"].noise_std == 0.02

    def test_scalar_gain_broadcasts(self):
        assert DomainConfig("x", channel_gain=0.5).channel_gain == (0.5, 0.5, 0.5)

    @pytest.mark.parametrize("kwargs", [
        {"gray_blend": 1.5}, {"gray_blend": -0.1}, {"noise_std": -1.0}, {"channel_gain": (1.0, 1.0)},
    ])
    def test_invalid_values(self, kwargs):
        with pytest.raises(ConfigError):
            DomainConfig("bad", **kwargs)

    def test_unknown_keys_are_rejected(self):
        with pytest.raises(ConfigError):
            DomainConfig.from_record({"name": "x", "contrast": 2.0})

    def test_record_round_trip(self):
        fog = load_domains(DOMAINS_DIR)["fog"]
        assert DomainConfig.from_record(dict(fog.to_record())) == fog

    def test_noise_free_shift_ignores_rng(self):
        dust = DomainConfig("dust", channel_gain=(1.1, 0.9, 0.7), channel_bias=0.05, gray_blend=0.2)
        image = np.full((3, 4, 4), 0.4)
        a = dust.shift(image, SeededRng(1))
        b = dust.shift(image, SeededRng(2))
        assert np.array_equal(a, b)

    def test_duplicate_names(self, tmp_path):
        for stem in ("a", "b"):
            (tmp_path / f"{stem}.yaml").write_text("name: fog\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_domains(tmp_path)
