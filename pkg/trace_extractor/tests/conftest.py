from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from extract_helpers import ScriptedSession  # noqa: E402


@pytest.fixture
def scripted_session():
    return ScriptedSession
