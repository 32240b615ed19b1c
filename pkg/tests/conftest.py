import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mocu import CostFunctionSet, FiniteOperatorClass, FiniteUncertaintyClass  # noqa: E402

ACCEPTANCE_RESULTS: dict[int, tuple[str, str]] = {}


def matrix_problem(tensor, weights=None):
    """Finite problem from ``tensor[model, operator, objective]``."""
    T = np.asarray(tensor, dtype=float)
    m, k, n = T.shape
    theta = FiniteUncertaintyClass.uniform(list(range(m))) if weights is None else FiniteUncertaintyClass(list(range(m)), weights)
    ops = FiniteOperatorClass(list(range(k)))
    costs = CostFunctionSet(
        costs=[(lambda i: (lambda model, op: float(T[model, op, i])))(i) for i in range(n)],
        joint=lambda model, op: T[model, op],
    )
    return theta, ops, costs


@pytest.fixture
def record_criterion():
    def record(number, passed, detail=""):
        ACCEPTANCE_RESULTS[number] = ("PASS" if passed else "FAIL", detail)

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    number = getattr(item.function, "criterion", None)
    if number is not None and report.when == "call" and report.failed:
        ACCEPTANCE_RESULTS[number] = ("FAIL", ACCEPTANCE_RESULTS.get(number, ("", ""))[1])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        status, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {status} {detail}".rstrip())
