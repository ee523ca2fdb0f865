# -*- coding: utf-8 -*-
"""Shared fixtures: encoder weights, fixture paths, isolated logger and audit"""
from pathlib import Path

import pytest

from src.core.audit import get_audit
from src.core.logger import get_run_log
from src.encoder.dual_encoder import EncoderWeights


FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(autouse=True)
def isolated_run_state(tmp_path):
    """Every test logs into its own temp file and starts with an empty audit"""
    log = get_run_log()
    previous = (log.log_file, log.level)
    log.configure(log_file=str(tmp_path / "test.log"), echo_warnings=False)
    log.unbind()
    get_audit().reset()
    yield
    log.log_file, log.level = previous
    log.unbind()
    get_audit().reset()


@pytest.fixture(scope="session")
def weights() -> EncoderWeights:
    return EncoderWeights.derive(42)


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES
