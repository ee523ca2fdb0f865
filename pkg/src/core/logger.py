# -*- coding: utf-8 -*-
"""
Run logger - file-based log shared by every pipeline component

一つの実行 (<out>/run.log) に全ステージのログを追記する。
各モジュールは get_logger(__name__) でコンポーネント名付きのロガーを取得する。
"""
import os
import sys
import time
from datetime import datetime
from typing import Dict, Optional, TextIO


_LEVELS: Dict[str, int] = {"DEBUG": 10, "INFO": 20, "WARNING": 30, "ERROR": 40}


def _format_fields(fields: Dict[str, object]) -> str:
    return " ".join(f"{key}={fields[key]}" for key in sorted(fields))


class ApplicationLogger:
    """Writes one line per record: timestamp, level, component, message, run fields"""

    _instance: Optional['ApplicationLogger'] = None

    def __init__(self, log_file: str = "debug.log", level: str = "INFO"):
        self.log_file = log_file
        self.level = level
        self.enabled = True
        self.echo: Optional[TextIO] = None
        self.fields: Dict[str, object] = {}

    @classmethod
    def get_instance(cls) -> 'ApplicationLogger':
        if cls._instance is None:
            cls._instance = cls()
        return cls._instance

    def configure(self, log_file: Optional[str] = None, level: Optional[str] = None,
                  echo_warnings: Optional[bool] = None) -> None:
        """ログ出力先とレベルを設定する (CLIは <out>/run.log を指定)"""
        if log_file is not None:
            directory = os.path.dirname(log_file)
            if directory:
                os.makedirs(directory, exist_ok=True)
            self.log_file = log_file
        if level is not None:
            if level.upper() not in _LEVELS:
                raise ValueError(f"unknown log level: {level}")
            self.level = level.upper()
        if echo_warnings is not None:
            self.echo = sys.stderr if echo_warnings else None

    def bind(self, **fields: object) -> None:
        """Attach run-wide fields (command, seed, ...) to every following record"""
        self.fields.update(fields)

    def unbind(self) -> None:
        self.fields = {}

    def write(self, level: str, component: str, message: str) -> None:
        if not self.enabled or _LEVELS[level] < _LEVELS[self.level]:
            return

        timestamp = datetime.now().strftime("%Y-%m-%d %H:%M:%S.%f")[:-3]
        suffix = f" | {_format_fields(self.fields)}" if self.fields else ""
        entry = f"[{timestamp}] {level} {component}: {message}{suffix}\n"

        try:
            with open(self.log_file, 'a', encoding='utf-8') as f:
                f.write(entry)
        except OSError:
            # ログ失敗で実行を止めない
            pass
        if self.echo is not None and _LEVELS[level] >= _LEVELS["WARNING"]:
            self.echo.write(f"{level.lower()}: {message}\n")

    def clear(self):
        """Truncate the log file"""
        try:
            with open(self.log_file, 'w', encoding='utf-8'):
                pass
        except OSError:
            pass

    def disable(self):
        self.enabled = False

    def enable(self):
        self.enabled = True


class ComponentLogger:
    """Named view on the shared run log"""

    def __init__(self, component: str, sink: ApplicationLogger):
        self.component = component
        self.sink = sink

    def debug(self, message: str):
        self.sink.write("DEBUG", self.component, message)

    def info(self, message: str):
        self.sink.write("INFO", self.component, message)

    def warning(self, message: str):
        self.sink.write("WARNING", self.component, message)

    def error(self, message: str):
        self.sink.write("ERROR", self.component, message)


_components: Dict[str, ComponentLogger] = {}


def _component_name(name: str) -> str:
    # src.steering.steer -> steering.steer
    return name[len("src."):] if name.startswith("src.") else name


def log_stage(stage: str, details: str = ""):
    """Log pipeline stage progress"""
    get_logger("stage").info(f"{stage} {details}".strip())


def log_performance(operation: str, duration: float, details: str = ""):
    """Log performance metrics"""
    get_logger("perf").info(f"{operation} took {duration:.3f}s {details}".strip())


def log_elapsed(operation: str, start_time: float, details: str = ""):
    """Log time since start_time (time.perf_counter based)"""
    log_performance(operation, time.perf_counter() - start_time, details)


def get_run_log() -> ApplicationLogger:
    """共有ロガー本体 (出力先・レベル・実行フィールドの設定用)"""
    return ApplicationLogger.get_instance()


def get_logger(name: str = "app") -> ComponentLogger:
    """コンポーネントロガーを取得"""
    component = _component_name(name)
    if component not in _components:
        _components[component] = ComponentLogger(component, get_run_log())
    return _components[component]
