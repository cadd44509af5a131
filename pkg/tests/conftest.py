import sys
from pathlib import Path

import pytest

_root = Path(__file__).resolve().parent.parent
if str(_root) not in sys.path:
    sys.path.insert(0, str(_root))

from config import PROCESS_PRESETS


@pytest.fixture
def markov_spec():
    return dict(PROCESS_PRESETS["markov"])


@pytest.fixture
def small_schedule():
    from core.odometer import OdometerSchedule

    return OdometerSchedule((5, 9, 15))
