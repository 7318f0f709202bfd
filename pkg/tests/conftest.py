import sys

import numpy as np
import pytest

from smpm_schur.mesh import build_decomposition, build_mesh
from smpm_schur.operator import build_operator
from smpm_schur.solver import SchurSolver

EPS = np.finfo(float).eps


def make_op(n, m_x, m_z, l_x, l_z, c_tau=1.0):
    mesh = build_mesh(n, m_x, m_z, l_x, l_z)
    return build_operator(mesh, build_decomposition(mesh), c_tau=c_tau)


@pytest.fixture(scope="session")
def small_solver():
    """r = 864, five interfaces: small enough for dense references."""
    return SchurSolver(make_op(6, 6, 4, 6.0, 4.0))


@pytest.fixture(scope="session")
def tiny_op():
    return make_op(5, 3, 2, 3.0, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(mod.RESULTS.items()):
            terminalreporter.write_line(line)
