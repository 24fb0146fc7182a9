import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from impvqe import studies

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# dense-oracle suites use this many random cases
ORACLE_CASES = 1000


@pytest.fixture(scope="session")
def eg():
    return studies.problem("e_g")


@pytest.fixture(scope="session")
def eg_mo():
    return studies.problem("e_g", "hartree_fock", "mo")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


# acceptance verdicts, echoed again in the terminal summary
AC_LINES = []


@pytest.fixture
def verdict():
    def record(tag, ok, detail):
        line = f"{tag} {'PASS' if ok else 'FAIL'}: {detail}"
        AC_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if AC_LINES:
        terminalreporter.section("acceptance")
        for line in AC_LINES:
            terminalreporter.write_line(line)
