import numpy as np
import pytest

from accelpt import AnnealingPath, build_target


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def gauss_path():
    """1-D linear path from N(0,1) to N(1,1)."""
    return AnnealingPath(build_target("gaussian", dim=1, mean=1.0), "linear")


def central_fd(f, x, h=1e-5):
    g = np.zeros_like(x)
    for j in range(len(x)):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2 * h)
    return g


# --------------------------------------------------------------------------
# acceptance report: one PASS/FAIL line per criterion at the end of the run
# --------------------------------------------------------------------------

_REPORT = []


@pytest.fixture
def report():
    def add(k, ok, detail=""):
        _REPORT.append((k, bool(ok), detail))
        return ok
    return add


def pytest_sessionstart(session):
    import time

    session.config._accelpt_t0 = time.perf_counter()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    import time

    if not _REPORT:
        return
    wall = time.perf_counter() - config._accelpt_t0
    stats = terminalreporter.stats
    failed = len(stats.get("failed", [])) + len(stats.get("error", []))
    terminalreporter.section("acceptance criteria")
    for k, ok, detail in sorted(_REPORT):
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    ok = failed == 0 and wall < 600
    terminalreporter.write_line(
        f"suite: {'PASS' if ok else 'FAIL'}  failures={failed} wall={wall:.0f}s (limit 600s)")
