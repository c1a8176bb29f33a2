import pytest

from rcmlab.environment import ConductanceLaw, Environment


@pytest.fixture(scope="session")
def lattice_env():
    """Full lattice, unit conductances: everything about it is exact."""
    return Environment(dim=2, p=1.0, seed=0, law=ConductanceLaw.constant(1.0))


@pytest.fixture(scope="session")
def disordered_env():
    return Environment(dim=2, p=0.7, seed=1, law=ConductanceLaw.pareto(3.0))


@pytest.fixture(scope="session")
def heavy_env():
    # pareto(0.8) has infinite mean: the degenerate-CSRW regime.
    return Environment(dim=2, p=0.7, seed=1, law=ConductanceLaw.pareto(0.8))
