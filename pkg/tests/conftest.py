import numpy as np
import pytest

from preyswitch.models import ModelParams

# (e, beta1, beta2, r1, r2, m, q1, q2) = (0.25, 1, 1, 1.3, 0.26, 0.14, 1, 0.5)
FIG1 = ModelParams(r1=1.3, r2=0.26, m=0.14, e=0.25, q1=1.0, q2=0.5, beta1=1.0, beta2=1.0)


@pytest.fixture
def fig1():
    return FIG1


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_params(rng, **fixed):
    """Draw a parameter set from the fitting prior box (model I)."""
    r1 = rng.uniform(1.0, 3.0)
    r2 = rng.uniform(0.01, min(0.8, r1 * 0.999))
    values = dict(r1=r1, r2=r2, m=rng.uniform(0.1, 1.0), aq=rng.uniform(0.01, 2.0),
                  k=rng.uniform(1.0, 100.0))
    values.update(fixed)
    return ModelParams().replace(**values)


# criterion number -> (passed, detail), filled in by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
