import numpy as np
import pytest

from pqspectra import DiscreteFunction, build_problem, build_rectangle_mesh


@pytest.fixture(scope="session")
def unit_mesh_16():
    return build_rectangle_mesh(1.0, 1.0, 16, 16)


@pytest.fixture(scope="session")
def unit_mesh_8():
    return build_rectangle_mesh(1.0, 1.0, 8, 8)


@pytest.fixture(scope="session")
def sublinear_cfg(unit_mesh_16):
    """p=2, q=3, r=1.5, Robin weights 1, lambda 1 on the unit square."""
    return build_problem(unit_mesh_16, p="2", q="3", r="1.5",
                         alpha="1", beta1="1", lam=1.0)


def random_function(mesh, rng, scale=1.0):
    return DiscreteFunction(mesh, scale * rng.standard_normal(mesh.n_nodes))


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
