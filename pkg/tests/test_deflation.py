import numpy as np
import pytest

from smpm_schur.deflation import apply_P, apply_Q, build_coarse
from smpm_schur.errors import ConfigError
from smpm_schur.oracles import dense_projected_solve, relative_inf_error
from smpm_schur.solver import METHODS


def test_indicator_basis(small_solver):
    cs = small_solver.coarse
    dec = small_solver.op.dec
    Z = cs.apply_Z(np.eye(cs.d))
    assert Z.shape == (dec.k, dec.n_interfaces)
    # each interface carries n*m_z nodes on each of its two sides
    mesh = small_solver.mesh
    np.testing.assert_array_equal(Z.T @ Z, 2 * mesh.n * mesh.m_z * np.eye(cs.d))
    v = np.arange(dec.k, dtype=float)
    np.testing.assert_allclose(cs.apply_Zt(v), Z.T @ v)


def test_coarse_matrix(small_solver):
    cs = small_solver.coarse
    S = small_solver.sys.dense()
    Z = cs.apply_Z(np.eye(cs.d))
    np.testing.assert_allclose(cs.C, Z.T @ S @ Z, rtol=1e-12, atol=1e-10)
    assert cs.tridiagonal
    assert np.linalg.norm(cs.C.T @ cs.u_C) < 1e-8 * np.linalg.norm(cs.C)


def test_regularised_coarse_solve(small_solver, rng):
    cs = small_solver.coarse
    b = rng.standard_normal(cs.d)
    y = cs.coarse_solve(b)
    b_proj = b - cs.u_C * (cs.u_C @ b)
    np.testing.assert_allclose(cs.C @ y, b_proj, atol=1e-9 * np.linalg.norm(b))
    assert abs(cs.u_C @ y) < 1e-9 * np.linalg.norm(y)


def test_projections_on_consistent_vectors(small_solver, rng):
    sys, cs = small_solver.sys, small_solver.coarse
    _, b = small_solver.schur_rhs(rng.standard_normal(small_solver.op.r))
    Z = cs.apply_Z(np.eye(cs.d))
    # P leaves only the coarse null direction: Z^T P b is parallel to u_C
    zpb = cs.apply_Zt(apply_P(cs, sys, b))
    assert np.linalg.norm(zpb - cs.u_C * (cs.u_C @ zpb)) < 1e-9 * np.linalg.norm(b)
    # P S = S Q
    v = rng.standard_normal(sys.k)
    np.testing.assert_allclose(apply_P(cs, sys, sys.apply(v)), sys.apply(apply_Q(cs, sys, v)),
                               atol=1e-9 * np.linalg.norm(v))
    assert Z.shape[1] == cs.d


def test_invertible_coarse_tridiagonal_path(small_solver, rng):
    sys = small_solver.sys
    cs = build_coarse(sys)  # no null vector: the banded path is prepared
    assert cs.tridiagonal and cs._banded is not None
    b = small_solver.coarse.C @ rng.standard_normal(cs.d)
    np.testing.assert_allclose(cs.C @ cs.coarse_solve(b), b, atol=1e-6 * np.linalg.norm(b))


def _per_iteration_applies(solver, b, method):
    counts = []
    for its in (4, 8):
        solver.sys.reset_count()
        _, rep = solver.solve_schur(b, method, tol=1e-30, max_iter=its)
        assert rep.iterations == its
        counts.append(solver.sys.apply_count)
    return (counts[1] - counts[0]) / 4


def test_matvec_cost_per_iteration(small_solver, rng):
    _, b = small_solver.schur_rhs(rng.standard_normal(small_solver.op.r))
    assert _per_iteration_applies(small_solver, b, "dbj") == 2
    assert _per_iteration_applies(small_solver, b, "2las") == 1
    assert _per_iteration_applies(small_solver, b, "bj") == 1


def test_methods_agree_with_dense(small_solver, rng):
    f = rng.standard_normal(small_solver.op.r)
    ref, _ = dense_projected_solve(small_solver.op.dense_L(), f)
    sols = {}
    for method in METHODS:
        res = small_solver.solve(f, method, tol=1e-12)
        assert res.report.converged
        assert res.schur_rel_residual < 1e-11
        sols[method] = res.u
        assert relative_inf_error(res.u, ref) < 1e-8
    for m in METHODS[1:]:
        assert relative_inf_error(sols[m], sols["schur"]) < 1e-8


def test_unknown_method(small_solver, rng):
    with pytest.raises(ConfigError):
        small_solver.solve(rng.standard_normal(small_solver.op.r), "cg")
