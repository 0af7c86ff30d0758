"""Shared fixtures: the two bundled problems and the two preset kernels."""

from __future__ import annotations

import numpy as np
import pytest

from hammercert.cli import bundled_config_text
from hammercert.config import build_problem, parse_config
from hammercert.kernels import finalize_kernel, preset


@pytest.fixture(scope="session")
def example1_cfg():
    return parse_config(bundled_config_text("example1"), "<example1>")


@pytest.fixture(scope="session")
def example2_cfg():
    return parse_config(bundled_config_text("example2"), "<example2>")


@pytest.fixture(scope="session")
def example1(example1_cfg):
    return build_problem(example1_cfg)


@pytest.fixture(scope="session")
def example2(example2_cfg):
    return build_problem(example2_cfg)


@pytest.fixture(scope="session")
def dirichlet():
    return preset("dirichlet_max")


@pytest.fixture(scope="session")
def periodic():
    built = preset("periodic_deviation")
    return built, finalize_kernel(built.kernel)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------------------
# acceptance bookkeeping: one summary line per criterion

CRITERIA = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[CRITERIA] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    entry = item.config.stash[CRITERIA].setdefault(mark.args[0], {"failed": [], "n": 0, "secs": 0.0})
    entry["secs"] += rep.duration
    if rep.when == "call":
        entry["n"] += 1
    if rep.failed:
        entry["failed"].append(item.name)


@pytest.fixture
def criterion_log(request):
    return request.config.stash[CRITERIA]


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash[CRITERIA]
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        r = results[n]
        status = "FAIL" if r["failed"] else "PASS"
        detail = f" failing: {', '.join(r['failed'])}" if r["failed"] else ""
        terminalreporter.write_line(
            f"criterion {n}: {status} ({r['n']} tests, {r['secs']:.1f} s){detail}")
