import numpy as np
import pytest

from conicscat import build_manifold

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def record(number, title, passed, detail):
    ACCEPTANCE[number] = (title, bool(passed), detail)
    print(f"criterion {number:2d} {'PASS' if passed else 'FAIL'}: {title} ({detail})")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d} {'PASS' if ok else 'FAIL'}: {title} ({detail})")


@pytest.fixture(scope="session")
def flat():
    return build_manifold("flat", 2)


@pytest.fixture(scope="session")
def invsq():
    return build_manifold("inverse-square", 2, c=1.0)


@pytest.fixture(scope="session")
def bump():
    return build_manifold("bump-metric", 2, amplitude=0.5, width=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
