import time

import numpy as np
import pytest
from hypothesis import settings

from mcflab.solver import RadialGrid, SolverConfig, run_truncation_ladder

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

# criterion lines collected by the acceptance suite, printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


BALL_TIMES = list(np.linspace(0.0, 0.5, 21)[1:-1])   # includes 0.1, 0.2, 0.3, 0.4


@pytest.fixture(scope="session")
def ball_ladder():
    """Complete data (1 - r)^-2 over the unit disc, caps 10..80, snapshots every 0.025."""
    grid = RadialGrid(2, 1.0, 513)
    u0 = lambda r: np.where(r < 1, (1 - np.asarray(r, float)) ** -2.0, np.inf)
    cfg = SolverConfig(truncation_schedule=(10.0, 20.0, 40.0, 80.0))
    start = time.perf_counter()
    res = run_truncation_ladder(u0, grid, cfg, BALL_TIMES[-1], BALL_TIMES)
    res.elapsed = time.perf_counter() - start
    return res
