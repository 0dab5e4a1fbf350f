import numpy as np
import pytest

from twoshock.profiles import FluidParams, solve_intermediate_state, solve_profile

# u_plus that closes the symmetric gamma = 2 problem with v_mid = 0.9 exactly
U_PLUS_EXACT = -0.30631219449089375

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def params():
    return FluidParams()


@pytest.fixture(scope="session")
def config(params):
    return solve_intermediate_state(1.0, 0.0, 1.0, U_PLUS_EXACT, params)


@pytest.fixture(scope="session")
def profiles(config):
    return solve_profile(1, config), solve_profile(2, config)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
