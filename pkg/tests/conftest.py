import pytest

from buckvrft.circuit import CircuitParameters, build_model


@pytest.fixture(scope="session")
def params():
    return CircuitParameters()


@pytest.fixture(scope="session")
def model(params):
    return build_model(params)
