import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from heatcap.density import system_density  # noqa: E402
from heatcap.potential import quartic_chain, well_plus_oscillators  # noqa: E402


@pytest.fixture(scope="session")
def well3_density():
    """Fig 3a system: asymmetric double well plus two oscillators."""
    return system_density(well_plus_oscillators(3), 8.0, 4000)


@pytest.fixture(scope="session")
def chain3_density():
    """Three quartic components with a_i = i/5."""
    return system_density(quartic_chain(3), 8.0, 4001)
