from __future__ import annotations

import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).resolve().parent

# make engine_helpers and oracles importable regardless of invocation dir
sys.path.insert(0, str(TESTS_DIR))

from engine_helpers import FIXTURES, GOLDENS  # noqa: E402

from chainv.trace_model import GridSpec  # noqa: E402


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def goldens_dir() -> Path:
    return GOLDENS


@pytest.fixture
def grid_32() -> GridSpec:
    return GridSpec(rows=4, cols=4, patch_w=8, patch_h=8, image_w=32, image_h=32)
