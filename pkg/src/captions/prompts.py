# -*- coding: utf-8 -*-
"""
Prompt Templates - プロンプトテンプレート管理
Target / source prompt assembly from normalized caption records
"""
import json
import string
from pathlib import Path
from typing import Dict, List, Optional, Union

import yaml

from src.captions.records import CAPTION_FIELDS, CaptionRecord
from src.core.errors import ConfigError
from src.core.logger import get_logger
from src.encoder.dual_encoder import PromptString

logger = get_logger(__name__)


DEFAULT_TEMPLATE_NAME = "aerial_scene"
DEFAULT_TEMPLATE = "an aerial view of {where} {when} in {weather}"


def _check_placeholders(title: str, content: str) -> None:
    names = {name for _, name, _, _ in string.Formatter().parse(content) if name is not None}
    unknown = names - set(CAPTION_FIELDS)
    if unknown:
        raise ConfigError(f"template {title!r} uses unknown placeholders {sorted(unknown)}")


class PromptTemplateManager:
    """プロンプトテンプレート管理クラス"""

    def __init__(self, templates_dir: Optional[Union[str, Path]] = None):
        """
        初期化

        Args:
            templates_dir: テンプレート格納ディレクトリ（指定しない場合は templates/prompts）
        """
        if templates_dir is None:
            app_dir = Path(__file__).parent.parent.parent  # Go up to project root
            self.templates_dir = app_dir / "templates" / "prompts"
        else:
            self.templates_dir = Path(templates_dir)

        self._templates: Dict[str, str] = {DEFAULT_TEMPLATE_NAME: DEFAULT_TEMPLATE}
        self.reload_templates()

    def reload_templates(self) -> None:
        """テンプレートを再読み込み"""
        self._templates = {DEFAULT_TEMPLATE_NAME: DEFAULT_TEMPLATE}
        if not self.templates_dir.exists():
            logger.warning(f"Templates: directory not found, using the built-in template: {self.templates_dir}")
            return

        # YAMLファイルを読み込み
        for file_path in sorted(self.templates_dir.glob("*.yaml")):
            try:
                with open(file_path, 'r', encoding='utf-8') as f:
                    data = yaml.safe_load(f)
                if isinstance(data, dict) and 'title' in data and 'content' in data:
                    self._register(str(data['title']), str(data['content']))
            except (yaml.YAMLError, OSError) as e:
                logger.warning(f"Templates: failed to load {file_path}: {e}")

        # JSONファイルも読み込み（同名のYAMLがあればスキップ）
        for file_path in sorted(self.templates_dir.glob("*.json")):
            if file_path.with_suffix('.yaml').exists():
                continue
            try:
                with open(file_path, 'r', encoding='utf-8') as f:
                    data = json.load(f)
                if isinstance(data, dict) and 'title' in data and 'content' in data:
                    self._register(str(data['title']), str(data['content']))
            except (json.JSONDecodeError, OSError) as e:
                logger.warning(f"Templates: failed to load {file_path}: {e}")

    def _register(self, title: str, content: str) -> None:
        _check_placeholders(title, content)
        self._templates[title] = content

    def get_template_names(self) -> List[str]:
        """テンプレート名一覧を取得"""
        return sorted(self._templates)

    def get_template_content(self, name: str) -> str:
        """テンプレート内容を取得（存在しない場合はConfigError）"""
        if name not in self._templates:
            raise ConfigError(f"unknown prompt template {name!r}; available: {self.get_template_names()}")
        return self._templates[name]

    def assemble_prompt(self, rec: CaptionRecord, template: str = DEFAULT_TEMPLATE_NAME) -> PromptString:
        """正規化済みレコードからプロンプトを構築"""
        return PromptString(self.get_template_content(template).format(**rec.fields()))

