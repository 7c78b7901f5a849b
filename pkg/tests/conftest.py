import sys

import numpy as np
import pytest

from heavykin import ModelParams


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One line per acceptance criterion, whenever that module ran."""
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for line in results:
            terminalreporter.write_line(line)


@pytest.fixture
def asym_params():
    """Workhorse asymmetric, modulated instance exercised across suites."""
    return ModelParams(
        alpha=1.5,
        beta=0.25,
        kappa=0.2,
        core_asym=0.5,
        nu0_mean=1.0,
        nu0_delta=0.3,
        domain_length=20.0,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20260815)
