import numpy as np
import pytest
from hypothesis import settings

from talbotlau import (
    BeamlineGeometry,
    GratingSpec,
    InterferometerConfig,
    MoleculeSpecies,
    SourceModel,
)
from talbotlau.constants import MEV_NM3

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

# illustrative interaction strength for tests that need the wall potential switched on
C3_ILLUSTRATIVE = 5 * MEV_NM3


def make_config(c3=0.0, open_fraction=0.40, separation=0.38):
    g = GratingSpec(991e-9, open_fraction, 500e-9)
    return InterferometerConfig(g, g, g, separation, MoleculeSpecies("TPP", 614.0, c3))


@pytest.fixture
def paper_config():
    return make_config()


@pytest.fixture
def vdw_config():
    return make_config(C3_ILLUSTRATIVE)


@pytest.fixture
def geom():
    return BeamlineGeometry()


@pytest.fixture
def source():
    return SourceModel()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
