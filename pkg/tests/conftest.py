from __future__ import annotations

import numpy as np
import pytest

from inert_drift.paths import RngConfig, SampledPath, generate_brownian_path


def grid_path(fn, horizon: float, dt: float) -> SampledPath:
    n = int(round(horizon / dt))
    t = dt * np.arange(n + 1)
    return SampledPath(0.0, dt, fn(t))


@pytest.fixture
def brownian():
    def make(seed: int, dt: float = 1e-3, horizon: float = 1.0, replica: int = 0):
        return generate_brownian_path(RngConfig(seed, replica), dt, horizon)[0]
    return make


# one line per acceptance criterion, printed after the run
ACCEPTANCE: list[tuple[int, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
