import numpy as np
import pytest

from ckequant import continuum as ct
from ckequant import solver
from ckequant.config import GENERAL, TestbedSpec
from ckequant.geometry import build_grid


@pytest.fixture(scope="session")
def p1_spec():
    return TestbedSpec(n=1, degrees=(1, 1), k=4)


@pytest.fixture(scope="session")
def p1_grid(p1_spec):
    return build_grid(p1_spec, 64)


@pytest.fixture(scope="session")
def p1_ref_state(p1_spec, p1_grid):
    return solver.reference_state(p1_spec, p1_grid)


@pytest.fixture(scope="session")
def p1_general_spec():
    return TestbedSpec(n=1, degrees=(1, 1), k=3, symmetry=GENERAL)


@pytest.fixture(scope="session")
def p1_general_grid(p1_general_spec):
    return build_grid(p1_general_spec, 48)


@pytest.fixture(scope="session")
def p1_general_state(p1_general_spec, p1_general_grid):
    return solver.reference_state(p1_general_spec, p1_general_grid)


@pytest.fixture(scope="session")
def p2_spec():
    return TestbedSpec(n=2, degrees=(1, 2), k=2)


@pytest.fixture(scope="session")
def p2_grid(p2_spec):
    return build_grid(p2_spec, 48)


@pytest.fixture(scope="session")
def p2_ref_state(p2_spec, p2_grid):
    return solver.reference_state(p2_spec, p2_grid)


@pytest.fixture(scope="session")
def rgrid():
    return ct.radial_grid(256)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
