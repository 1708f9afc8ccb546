import pytest

from togglectl.equilibria import default_database
from togglectl.model import ModelParams, reduce_params


@pytest.fixture(scope="session")
def p():
    return ModelParams()


@pytest.fixture(scope="session")
def rp(p):
    return reduce_params(p)


@pytest.fixture(scope="session")
def db(p):
    return default_database(p)
