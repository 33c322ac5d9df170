import numpy as np
import pytest

from flopt.kernel import DeterministicRng
from flopt.problem import ConstraintKind
from flopt.suite import quadratic_problem


def half_norm_problem(A, b, kind=ConstraintKind.EQUALITY):
    """``f = 1/2 ||x||^2`` with affine constraints ``A x + b``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[1]
    return quadratic_problem(np.eye(n), np.zeros(n), A, b, kind)


def linear_objective_problem(c, A, b, kind=ConstraintKind.EQUALITY):
    """``f = c^T x`` (Hessian zero) with affine constraints."""
    c = np.asarray(c, dtype=float)
    return quadratic_problem(np.zeros((c.size, c.size)), c, A, b, kind)


@pytest.fixture
def rng():
    return DeterministicRng(2024)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if rep.when != "call":
                continue
            lines.extend(v for k, v in rep.user_properties if k == "acceptance")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1][2:])):
            terminalreporter.write_line(line)
