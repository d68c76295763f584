import pytest

from hsground.core import ProblemSpec, instanton, make_grid
from hsground.solver import SolveOptions


@pytest.fixture(scope="session")
def opts():
    return SolveOptions()


@pytest.fixture(scope="session")
def grid3():
    return make_grid(3, 1e4, 2049)


@pytest.fixture(scope="session")
def U3(grid3):
    return instanton(grid3)


@pytest.fixture(scope="session")
def single_positive():
    return ProblemSpec(3, ((1.0, 1.0),), 1)


@pytest.fixture(scope="session")
def mixed_spec():
    return ProblemSpec(3, ((0.5, 1.0), (1.5, -0.1)), 1)


@pytest.fixture(scope="session")
def eps_reports(single_positive, opts):
    from hsground.solver import epsilon_continuation

    return epsilon_continuation(single_positive, [0.4, 0.2, 0.1, 0.05, 0.02], opts)


@pytest.fixture(scope="session")
def lambda_reports(mixed_spec, opts):
    from hsground.solver import lambda_continuation

    return lambda_continuation(mixed_spec, [0.5, 0.0, -0.25, -0.5, -0.75, -1.0], 0.0, opts)
