import numpy as np
import pytest

from cdeinv import IntegratorConfig, make_cev, make_cir, make_constant, make_geometric

CIR_PARAMS = dict(a=0.1, b=0.05, sigma=0.05)
CEV_PARAMS = dict(mu=0.05, sigma=0.15, gamma=1.5)


@pytest.fixture
def cir():
    return make_cir(**CIR_PARAMS)


@pytest.fixture
def cev():
    return make_cev(**CEV_PARAMS)


@pytest.fixture
def geometric():
    return make_geometric()


@pytest.fixture
def unit_field():
    return make_constant([[1.0]])


@pytest.fixture
def rk4():
    return IntegratorConfig("rk4", 50)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# criterion number -> one-line verdict, filled in by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
