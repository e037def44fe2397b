"""Shared fixtures: ground profiles, operators and spectra are expensive,
so they are computed once per session on moderate grids."""

import numpy as np
import pytest

from nlslab import assemble, build_Vk, compute_spectrum, make_grid, solve_ground


@pytest.fixture(scope="session")
def grid33():
    return make_grid(3, 30.0, 1500)


@pytest.fixture(scope="session")
def gp33(grid33):
    return solve_ground(grid33, 3.0)


@pytest.fixture(scope="session")
def ops33(gp33):
    return assemble(gp33)


@pytest.fixture(scope="session")
def spec33(ops33):
    return compute_spectrum(ops33)


@pytest.fixture(scope="session")
def sol33(spec33, ops33):
    return build_Vk(1.0, 3, spec33, ops33)


@pytest.fixture(scope="session")
def grid17():
    return make_grid(1, 30.0, 1500)


@pytest.fixture(scope="session")
def gp17(grid17):
    return solve_ground(grid17, 7.0)


@pytest.fixture(scope="session")
def ops17(gp17):
    return assemble(gp17)


@pytest.fixture(scope="session")
def spec17(ops17):
    return compute_spectrum(ops17)


@pytest.fixture()
def rng():
    return np.random.default_rng(7)
