import numpy as np
import pytest

import tamelab as tl


@pytest.fixture(scope="session")
def two_node():
    return tl.two_node_context()


@pytest.fixture(scope="session")
def interval64():
    dom = tl.build_grid("interval", resolution=64)
    return tl.build_generator(dom)


@pytest.fixture(scope="session")
def interval64_dirichlet():
    dom = tl.build_grid("interval", resolution=64, bc="dirichlet")
    return tl.build_generator(dom)


@pytest.fixture(scope="session")
def torus16():
    dom = tl.build_grid("torus", resolution=(16, 16))
    return tl.build_generator(dom)


@pytest.fixture(scope="session")
def torus64():
    dom = tl.build_grid("torus", resolution=(64, 64))
    return tl.build_generator(dom)


@pytest.fixture(scope="session")
def strip48():
    dom = tl.build_grid("halfplane-strip", resolution=(48, 48), width=1.0, height=1.0)
    return tl.build_generator(dom)


@pytest.fixture(scope="session")
def strip_small():
    dom = tl.build_grid("halfplane-strip", resolution=(16, 12), width=1.0, height=0.75)
    return tl.build_generator(dom)


@pytest.fixture(scope="session")
def path8():
    dom = tl.build_grid("interval", resolution=8, extent=7.0)  # h = 1, unit masses/weights
    return tl.build_generator(dom)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
