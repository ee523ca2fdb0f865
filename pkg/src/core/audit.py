# -*- coding: utf-8 -*-
"""
Data Access Audit - records which images and which ground truth a phase touched

Dataset readers report every image load and every truth load here. Adaptation
phases check afterwards that no target truth was read and that source imagery
came only from the five-image cache.
"""
from collections import defaultdict, deque
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import DefaultDict, Deque, Iterator, List, Optional, Set, Tuple

from src.core.logger import get_logger

logger = get_logger(__name__)


# phase logs kept for reporting; older ones drop out first
MAX_LOGS = 256


@dataclass
class AccessLog:
    """1フェーズ分のアクセス記録"""
    phase: str
    image_reads: DefaultDict[str, Set[str]] = field(default_factory=lambda: defaultdict(set))
    truth_reads: DefaultDict[str, List[str]] = field(default_factory=lambda: defaultdict(list))

    def images(self, role: str) -> Set[str]:
        return set(self.image_reads.get(role, set()))

    def truth_count(self, role: str) -> int:
        return len(self.truth_reads.get(role, []))


class DataAccessAudit:
    """Phase-scoped access recorder"""

    _instance: Optional['DataAccessAudit'] = None

    def __init__(self, max_logs: int = MAX_LOGS):
        self._active: List[AccessLog] = []
        self._logs: Deque[AccessLog] = deque(maxlen=max_logs)

    @classmethod
    def get_instance(cls) -> 'DataAccessAudit':
        if cls._instance is None:
            cls._instance = cls()
        return cls._instance

    @contextmanager
    def phase(self, name: str) -> Iterator[AccessLog]:
        log = AccessLog(phase=name)
        self._logs.append(log)
        self._active.append(log)
        try:
            yield log
        finally:
            self._active.pop()

    def _current(self) -> Optional[AccessLog]:
        return self._active[-1] if self._active else None

    def record_image(self, role: str, path: str) -> None:
        log = self._current()
        if log is not None:
            log.image_reads[role].add(path)

    def record_truth(self, role: str, path: str) -> None:
        log = self._current()
        if log is not None:
            log.truth_reads[role].append(path)
            if role == "target":
                logger.warning(f"Audit: target truth read during phase '{log.phase}': {path}")

    def logs(self, name: Optional[str] = None) -> List[AccessLog]:
        return [log for log in self._logs if name is None or log.phase == name]

    def reset(self) -> None:
        self._active.clear()
        self._logs.clear()


def get_audit() -> DataAccessAudit:
    return DataAccessAudit.get_instance()


def violations(log: AccessLog, cache_images: Set[str]) -> List[Tuple[str, str]]:
    """(kind, detail) pairs for every firewall / cache-constraint breach in a phase"""
    found: List[Tuple[str, str]] = []
    if log.truth_count("target"):
        found.append(("target-truth", f"{log.truth_count('target')} reads"))
    for path in sorted(log.images("source") - cache_images):
        found.append(("source-image", path))
    return found
