# -*- coding: utf-8 -*-
import numpy as np
import pytest

from src.core.errors import ConfigError
from src.core.seeded_rng import SeededRng
from src.detection.detector import OUTPUTS, StudentModel, TeacherHead
from src.detection.postprocess import DetectConfig, cell_center, decode, student_detect, teacher_detect
from src.detection.scenes import DomainConfig, gen_scene
from src.encoder.dual_encoder import encode_image_layer1
from tests.helpers import random_image


def constant_head(bias, channels: int = 8, radius: int = 1) -> TeacherHead:
    kernel = 2 * radius + 1
    return TeacherHead(np.zeros((OUTPUTS, channels, kernel, kernel)), np.asarray(bias, dtype=np.float64))


class TestDecode:

    def test_cell_centers(self):
        assert cell_center(0, 0) == (1.0, 1.0)
        assert cell_center(1, 3) == (7.0, 3.0)

    def test_single_confident_cell(self):
        out = np.zeros((OUTPUTS, 4, 4))
        out[0] = -20.0
        out[:, 1, 1] = [20.0, 5.0, 0.0, 0.0, 2 / 16, 2 / 16, 2 / 16, 2 / 16]
        dets = decode(out, (8, 8))
        assert len(dets) == 1
        det = dets[0]
        assert (det.x1, det.y1, det.x2, det.y2) == pytest.approx((1.0, 1.0, 5.0, 5.0))
        assert det.class_id == 0
        assert det.confidence == pytest.approx(1.0 / (1.0 + 2.0 * np.exp(-5.0)), rel=1e-6)

    def test_negative_offsets_collapse_to_the_center(self):
        out = np.zeros((OUTPUTS, 2, 2))
        out[0] = [[10.0, -30.0], [-30.0, -30.0]]
        out[4:] = -1.0
        det = decode(out, (4, 4))[0]
        assert (det.x1, det.y1, det.x2, det.y2) == (1.0, 1.0, 1.0, 1.0)

    def test_candidate_cap(self):
        out = np.zeros((OUTPUTS, 4, 4))
        out[0] = 10.0
        out[1] = 5.0
        dets = decode(out, (8, 8), DetectConfig(max_candidates=3, nms_iou=1.0))
        assert len(dets) == 3

    def test_one_candidate_per_cell_even_for_a_close_runner_up(self):
        out = np.zeros((OUTPUTS, 2, 2))
        out[0] = -30.0
        out[:, 0, 0] = [20.0, 4.9, 5.0, -10.0, 0.1, 0.1, 0.1, 0.1]
        dets = decode(out, (4, 4), DetectConfig(conf_floor=0.0, nms_iou=1.0))
        assert [d.class_id for d in dets if (d.x1, d.y1) == (0.0, 0.0)] == [1]


class TestTeacherDetect:

    def test_low_objectness_yields_nothing(self, weights):
        head = constant_head([-10.0] + [0.0] * 7)
        scene = gen_scene(DomainConfig.clear(), SeededRng(0))
        assert len(teacher_detect(scene, head, weights, conf_floor=0.1)) == 0

    def test_conf_floor_and_config_together_are_rejected(self, weights):
        head = constant_head([0.0] * 8)
        scene = gen_scene(DomainConfig.clear(), SeededRng(0))
        with pytest.raises(ConfigError):
            teacher_detect(scene, head, weights, conf_floor=0.2, cfg=DetectConfig(conf_floor=0.5))

    def test_config_floor_applies(self, weights):
        head = constant_head([0.0] * 8)
        scene = gen_scene(DomainConfig.clear(), SeededRng(0))
        assert len(teacher_detect(scene, head, weights, cfg=DetectConfig(conf_floor=0.5))) == 0
        assert len(teacher_detect(scene, head, weights, conf_floor=0.1)) > 0

    def test_boxes_are_clamped_to_the_image(self, weights):
        head = constant_head([10.0, 0.0, 0.0, 0.0, 100.0, 100.0, 100.0, 100.0])
        scene = gen_scene(DomainConfig.clear(), SeededRng(0))
        dets = teacher_detect(scene, head, weights)
        assert len(dets) == 1
        det = dets[0]
        assert (det.x1, det.y1, det.x2, det.y2) == (0.0, 0.0, 64.0, 64.0)
        assert det.confidence == pytest.approx(1.0 / 3.0, rel=1e-4)

    def test_scene_image_and_features_agree(self, weights):
        head = TeacherHead.init(5, 8, init_scale=1.0)
        scene = gen_scene(DomainConfig.clear(), SeededRng(2))
        features = encode_image_layer1(scene.image, weights)
        a = teacher_detect(scene, head, weights)
        b = teacher_detect(scene.image, head, weights)
        c = teacher_detect(features, head, weights)
        assert a == b == c
        assert len(a) > 0

    def test_detections_are_sorted_and_inside(self, weights):
        head = TeacherHead.init(8, 8, init_scale=1.0)
        dets = teacher_detect(gen_scene(DomainConfig.clear(), SeededRng(4)), head, weights)
        confidences = [d.confidence for d in dets]
        assert confidences == sorted(confidences, reverse=True)
        for d in dets:
            assert 0.0 <= d.x1 <= d.x2 <= 64.0 and 0.0 <= d.y1 <= d.y2 <= 64.0
            assert d.confidence >= 0.05


class TestStudentDetect:

    def test_runs_on_small_images(self):
        student = StudentModel.init(3, init_scale=1.0)
        dets = student_detect(random_image(1), student, DetectConfig(conf_floor=0.0))
        assert len(dets) >= 1
        for d in dets:
            assert d.x2 <= 16.0 and d.y2 <= 16.0


class TestDetectConfig:

    @pytest.mark.parametrize("kwargs", [
        {"conf_floor": -0.1}, {"conf_floor": 1.5}, {"nms_iou": 2.0}, {"max_candidates": 0},
    ])
    def test_invalid_values(self, kwargs):
        with pytest.raises(ConfigError):
            DetectConfig(**kwargs)
