import pytest

import config
import store
from models import NOMINAL_ENVIRONMENT, Environment


@pytest.fixture(scope='session')
def params():
    """KC200GT seed calibrated to 217.54 W at 25 C / 1000 W/m^2"""
    return store.default_params()


@pytest.fixture(scope='session')
def seed():
    return store.load_params(config.SEED_PARAMS_FILE)


@pytest.fixture
def nominal():
    return NOMINAL_ENVIRONMENT


@pytest.fixture
def hot():
    return Environment(t_celsius=50.0, g=1000.0)


@pytest.fixture
def cold():
    return Environment(t_celsius=0.0, g=1000.0)
