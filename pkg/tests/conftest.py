import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from macrojumps.models import build_effective, build_full, build_toy, preset, to_bell_basis

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def toy_bundle():
    return build_toy(preset("toy"))


@pytest.fixture(scope="session")
def fig5a_full():
    return build_full(preset("fig5a"))


@pytest.fixture(scope="session")
def fig5a_bell(fig5a_full):
    return to_bell_basis(fig5a_full)


@pytest.fixture(scope="session")
def fig5a_eff():
    return build_effective(preset("fig5a"))


def ground(bundle):
    psi = np.zeros(bundle.dim, dtype=complex)
    psi[0] = 1.0
    return psi


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        terminalreporter.write_line(results[key])
