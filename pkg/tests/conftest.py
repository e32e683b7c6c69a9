from __future__ import annotations

import numpy as np
import pytest

import fixtures as fx
from mdplan import Plane, SelfSupportParams


@pytest.fixture(scope="session")
def platform() -> Plane:
    return Plane((0.0, 0.0, 0.0), (0.0, 0.0, 1.0))


@pytest.fixture(scope="session")
def params() -> SelfSupportParams:
    return SelfSupportParams(alpha_max_deg=45.0)


@pytest.fixture(scope="session")
def cube20():
    return fx.cube(20.0)


@pytest.fixture(scope="session")
def sphere_small():
    """Unit icosphere at ~5k facets for mid-weight geometry tests."""
    return fx.icosphere(1.0, 4)


@pytest.fixture(scope="session")
def sphere_fine():
    """20480-facet icosphere, radius 40, resting on the platform plane."""
    return fx.icosphere(40.0, 5, center=(0.0, 0.0, 40.0))


@pytest.fixture(scope="session")
def sphere_fine_origin():
    """20480-facet icosphere, radius 40, centred at the origin."""
    return fx.icosphere(40.0, 5)


@pytest.fixture(scope="session")
def torus_mesh():
    return fx.torus()


@pytest.fixture(scope="session")
def lprism():
    return fx.l_prism()


@pytest.fixture(scope="session")
def snowman_mesh():
    return fx.snowman()


@pytest.fixture(scope="session")
def mushroom_mesh():
    return fx.mushroom()


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
