# -*- coding: utf-8 -*-
"""
Dataset Store - JSONL scene lists with P2AF image files

    <root>/<split>.jsonl            {"image": "images/<split>/0000.p2af", "boxes": [...]}
    <root>/<split>.meta.json        {seed, config_hash, tool_version}
    <root>/images/<split>/NNNN.p2af

Image paths are stored relative to the JSONL file. Images and truth are loaded
through separate calls, each reported to the data-access audit under the
dataset's role.
"""
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Union

from src.core.artifacts import read_jsonl, write_jsonl
from src.core.audit import get_audit
from src.core.errors import SchemaError
from src.core.feature_io import read_tensor, write_tensor
from src.core.tensor import Tensor
from src.core.types import ArtifactMeta, DatasetLine, DatasetRole
from src.detection.boxes import GroundTruthBox
from src.detection.scenes import Scene


def write_dataset(path: Union[str, Path], scenes: Sequence[Scene], meta: Optional[ArtifactMeta] = None) -> Path:
    """シーン一覧をJSONLと画像ファイルとして保存"""
    target = Path(path)
    split = target.stem
    lines: List[DatasetLine] = []
    for index, scene in enumerate(scenes):
        relative = f"images/{split}/{index:04d}.p2af"
        write_tensor(target.parent / relative, scene.image)
        lines.append({"image": relative, "boxes": [box.to_record() for box in scene.truth]})
    return write_jsonl(target, lines, meta)


class SceneDataset:
    """Read side of a dataset split"""

    def __init__(self, path: Union[str, Path], role: DatasetRole):
        self.path = Path(path)
        self.role = role
        rows = read_jsonl(self.path)
        self._images: List[str] = []
        self._boxes: List[list] = []
        for line_number, row in enumerate(rows, start=1):
            if set(row) != {"image", "boxes"} or not isinstance(row["image"], str) \
                    or not isinstance(row["boxes"], list):
                raise SchemaError(f"{self.path}:{line_number}: expected {{image, boxes}} record")
            self._images.append(row["image"])
            self._boxes.append(row["boxes"])

    def __len__(self) -> int:
        return len(self._images)

    def image_path(self, index: int) -> Path:
        return (self.path.parent / self._images[index]).resolve()

    def image_id(self, index: int) -> str:
        return str(self.image_path(index))

    def load_image(self, index: int) -> Tensor:
        path = self.image_path(index)
        get_audit().record_image(self.role, str(path))
        return read_tensor(path)

    def load_truth(self, index: int) -> List[GroundTruthBox]:
        get_audit().record_truth(self.role, f"{self.path}#{index}")
        return [GroundTruthBox.from_record(record) for record in self._boxes[index]]

    def load_scene(self, index: int) -> Scene:
        return Scene(self.load_image(index), self.load_truth(index))

    def images(self, limit: Optional[int] = None) -> List[Tensor]:
        """Bare images, truth untouched"""
        count = len(self) if limit is None else min(limit, len(self))
        return [self.load_image(i) for i in range(count)]

    def truths(self) -> List[List[GroundTruthBox]]:
        return [self.load_truth(i) for i in range(len(self))]

    def scenes(self) -> Iterator[Scene]:
        for index in range(len(self)):
            yield self.load_scene(index)
