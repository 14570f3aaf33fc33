import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

REPO_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_SCENARIO = REPO_ROOT / "configs" / "synth_default.json"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def default_scenario_path():
    return DEFAULT_SCENARIO
