import functools

import pytest

from planar_morse.radial import SolveConfig, solve
from planar_morse.spectrum import eigenvalues_galerkin, eigenvalues_shooting

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@functools.lru_cache(maxsize=None)
def cached_solution(p, m, alpha=0.0):
    return solve(SolveConfig(p, m, alpha))


@functools.lru_cache(maxsize=None)
def cached_shooting(p, m, alpha=0.0):
    return eigenvalues_shooting(cached_solution(p, m, alpha))


@functools.lru_cache(maxsize=None)
def cached_galerkin(p, m):
    return eigenvalues_galerkin(cached_solution(p, m))


@pytest.fixture
def acceptance(request):
    """Record a criterion outcome; the summary is printed after the run."""
    state = {}

    def record(n, detail=""):
        state["n"] = n
        state["detail"] = detail

    yield record
    if "n" in state:
        failed = request.node.rep_call.failed if hasattr(request.node, "rep_call") else True
        ACCEPTANCE[state["n"]] = (not failed, state["detail"])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
