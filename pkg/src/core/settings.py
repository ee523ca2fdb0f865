# -*- coding: utf-8 -*-
"""
Run Settings - run configuration management

A single static config file (YAML or JSON) merged over built-in defaults, then
command-line overrides. No environment variables are consulted.
"""
import hashlib
import json
import math
import os
from typing import Any, Dict, Optional

import yaml

from src import __version__
from src.core.errors import ConfigError
from src.core.types import ArtifactMeta


class RunSettings:
    """実行設定管理クラス"""

    def __init__(self, config_file: Optional[str] = None):
        self.config_file = config_file
        self.settings: Dict[str, Any] = self.load_default_settings()
        if config_file is not None:
            self.load_settings()

    def load_default_settings(self) -> Dict[str, Any]:
        """デフォルト設定を読み込み"""
        return {
            "seed": 42,
            "logging": {
                "level": "INFO",
                "echo_warnings": False,
            },
            "paths": {
                "domains_dir": "data/domains",
                "synonyms": "data/synonyms.yaml",
                "filter_policy": "data/filter_policy.yaml",
                "templates_dir": "templates/prompts",
                "captions": "data/captions/domains.jsonl",
            },
            "encoder": {
                "seed": 42,
                "layer1_channels": 8,
            },
            "steering": {
                "steps": 100,
                "lr": 0.05,
                "momentum": 0.0,
                "sigma_min": 1e-4,
                "eps": 1e-5,
                "workers": 1,
            },
            "detector": {
                "head_radius": 4,
                "conf_floor": 0.05,
                "nms_iou": 0.5,
                "max_candidates": 100,
                "init_scale": 0.01,
            },
            "training": {
                "momentum": 0.9,
                "lr_decay_step": 10,
                "lr_decay_gamma": 0.5,
            },
            "pretrain": {
                "teacher_epochs": 40,
                "teacher_lr": 0.05,
                "student_epochs": 30,
                "student_lr": 0.05,
            },
            "finetune_teacher": {
                "epochs": 20,
                "lr": 0.1,
            },
            "pseudo_label": {
                "tau": 0.5,
                "restyle": True,
            },
            "adapt_student": {
                "epochs": 30,
                "lr": 0.05,
                "min_labeled_fraction": 0.5,
            },
            "data": {
                "source_domain": "clear",
                "target_domains": ["fog", "dust", "rain", "snow", "leaves"],
                "train_scenes": 48,
                "test_scenes": 32,
                "target_images": 32,
                "cache_size": 5,
            },
            "prompts": {
                "template": "aerial_scene",
            },
        }

    def load_settings(self) -> None:
        """設定ファイルから設定を読み込み"""
        if self.config_file is None:
            return
        if not os.path.exists(self.config_file):
            raise ConfigError(f"config file not found: {self.config_file}")
        try:
            with open(self.config_file, 'r', encoding='utf-8') as f:
                loaded_settings = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError(f"config file {self.config_file} is not valid YAML/JSON: {e}") from e
        if loaded_settings is None:
            return
        if not isinstance(loaded_settings, dict):
            raise ConfigError(f"config file {self.config_file} must hold a mapping")
        self.merge_settings(loaded_settings)

    def merge_settings(self, loaded_settings: Dict[str, Any]) -> None:
        """読み込んだ設定をデフォルト設定にマージ"""
        def merge_dict(default: Dict, loaded: Dict) -> Dict:
            result = default.copy()
            for key, value in loaded.items():
                if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                    result[key] = merge_dict(result[key], value)
                else:
                    result[key] = value
            return result

        self.settings = merge_dict(self.settings, loaded_settings)

    def get(self, key_path: str, default: Any = None) -> Any:
        """設定値を取得（ドット記法でネストしたキーにアクセス可能）"""
        keys = key_path.split('.')
        value = self.settings

        try:
            for key in keys:
                value = value[key]
            return value
        except (KeyError, TypeError):
            return default

    def require(self, key_path: str) -> Any:
        """必須の設定値を取得（存在しない場合はConfigError）"""
        marker = object()
        value = self.get(key_path, marker)
        if value is marker:
            raise ConfigError(f"missing config value: {key_path}")
        return value

    def require_int(self, key_path: str) -> int:
        """整数の必須設定値 (bool や小数は ConfigError)"""
        value = self.require(key_path)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key_path} must be an integer, got {value!r}")
        return value

    def require_float(self, key_path: str) -> float:
        value = self.require(key_path)
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"{key_path} must be a finite number, got {value!r}")
        return float(value)

    def set(self, key_path: str, value: Any) -> None:
        """設定値を設定（ドット記法でネストしたキーにアクセス可能）"""
        keys = key_path.split('.')
        current = self.settings

        # 最後のキー以外を辿る
        for key in keys[:-1]:
            if key not in current:
                current[key] = {}
            current = current[key]

        # 最後のキーに値を設定
        current[keys[-1]] = value

    def apply_overrides(self, overrides: Dict[str, Any]) -> None:
        """コマンドライン引数による上書き（Noneは無視）"""
        for key_path, value in overrides.items():
            if value is not None:
                self.set(key_path, value)

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form of the merged settings (logging excluded)"""
        hashed = {key: value for key, value in self.settings.items() if key != "logging"}
        canonical = json.dumps(hashed, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def artifact_meta(self) -> ArtifactMeta:
        return {
            "seed": self.require_int("seed"),
            "config_hash": self.config_hash(),
            "tool_version": __version__,
        }
