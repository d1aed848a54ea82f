"""Shared fixtures, hypothesis profile and the acceptance summary hook."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("repo", max_examples=150, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(RESULTS):
        verdict, detail = RESULTS[k]
        terminalreporter.write_line(f"criterion {k}: {verdict}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
