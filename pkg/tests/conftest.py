import shutil
import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).resolve().parent
FIXTURE_DIR = TESTS_DIR / "data" / "fixture"

sys.path.insert(0, str(TESTS_DIR))  # makes `import oracles` work everywhere


@pytest.fixture
def bundle(tmp_path) -> Path:
    """A working copy of the committed fixture bundle."""
    dest = tmp_path / "fixture"
    shutil.copytree(FIXTURE_DIR, dest)
    return dest


@pytest.fixture
def fixture_dir() -> Path:
    return FIXTURE_DIR
