from __future__ import annotations

import os
import sys
import tempfile
from pathlib import Path

import pytest

# Configure test-specific storage before importing the package
TMP_DIR = Path(tempfile.mkdtemp(prefix="hj-lab-test-"))
ROOT = Path(__file__).resolve().parents[1]

sys.path.insert(0, str(ROOT / "src"))
os.environ["HJLAB_OUTPUT_DIR"] = str(TMP_DIR / "out")
os.environ.setdefault("HJLAB_LOG_LEVEL", "WARNING")

from hj_lab.core import config as config_module  # noqa: E402

config_module.get_settings.cache_clear()

from hj_lab.domain.types import Grid  # noqa: E402
from hj_lab.infrastructure.registries.hamiltonians import BuiltinHamiltonians  # noqa: E402
from hj_lab.infrastructure.registries.initial_conditions import BuiltinInitialConditions  # noqa: E402


@pytest.fixture(scope="session")
def hamiltonians() -> BuiltinHamiltonians:
    return BuiltinHamiltonians()


@pytest.fixture(scope="session")
def initial_conditions() -> BuiltinInitialConditions:
    return BuiltinInitialConditions()


@pytest.fixture
def line_grid() -> Grid:
    return Grid.uniform([-2.0], [2.0], [201])


@pytest.fixture
def scenario_dir() -> Path:
    return ROOT / "scenarios"
