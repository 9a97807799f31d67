import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from inaad import linear_schedule


@pytest.fixture(scope="session")
def schedule500():
    return linear_schedule(500)


@pytest.fixture(scope="session")
def schedule50():
    return linear_schedule(50)
