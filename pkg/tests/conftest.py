import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

REPO_ROOT = Path(__file__).parent.parent


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def repo_root():
    return REPO_ROOT
