import numpy as np
import pytest

from crosspeak.catalog import load_catalog


@pytest.fixture(scope="session")
def catalog():
    return load_catalog()


@pytest.fixture(scope="session")
def nv(catalog):
    return catalog["NV"]


@pytest.fixture(scope="session")
def vh(catalog):
    return catalog["VH-"]


@pytest.fixture(scope="session")
def war1(catalog):
    return catalog["WAR1"]


@pytest.fixture(scope="session")
def p1(catalog):
    return catalog["P1"]


@pytest.fixture(scope="session")
def nv13c(catalog):
    return catalog["NV-13C"]


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
