import numpy as np
import pytest
from conftest import make_op
from hypothesis import given, settings
from hypothesis import strategies as st

from smpm_schur.errors import ConfigError, SingularShiftError
from smpm_schur.helmholtz3d import (ShiftedLocalSolver, build_wavenumber_systems,
                                    factor_unshifted_blocks, flop_model, fourier_transform_y,
                                    inverse_fourier_transform_y, shifted_block_solve, solve_3d,
                                    solve_per_wavenumber, wavenumbers)
from smpm_schur.operator import neumann_rhs
from smpm_schur.schur import assemble_schur


@pytest.fixture(scope="module")
def ctx():
    return build_wavenumber_systems(make_op(6, 4, 3, 4.0, 3.0), m_y=8, l_y=3.0)


def test_wavenumbers():
    np.testing.assert_allclose(wavenumbers(8, 2.0), np.pi * np.arange(4))
    assert len(wavenumbers(16, 1.0)) == 8


def test_cosine_mode():
    y = np.arange(8) * 3.0 / 8
    coef = fourier_transform_y(np.cos(2 * np.pi * y / 3.0)[None, :])
    np.testing.assert_allclose(coef[0], [0, 0.5, 0, 0], atol=1e-15)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([2, 4, 8, 16, 32]), st.integers(0, 2 ** 32 - 1))
def test_round_trip_band_limited(m_y, seed):
    r = np.random.default_rng(seed)
    coef = r.standard_normal((3, m_y // 2)) + 1j * r.standard_normal((3, m_y // 2))
    coef[:, 0] = coef[:, 0].real  # mean is real for real fields
    u = inverse_fourier_transform_y(coef, m_y)
    assert np.isrealobj(u)
    np.testing.assert_allclose(fourier_transform_y(u), coef, atol=1e-13)
    np.testing.assert_allclose(inverse_fourier_transform_y(fourier_transform_y(u), m_y), u,
                               atol=1e-13)


@pytest.mark.parametrize("m_y", [3, 6, 12])
def test_transform_rejects_non_power_of_two(m_y):
    with pytest.raises(ConfigError):
        fourier_transform_y(np.zeros((2, m_y)))


def test_context_validation():
    op = make_op(4, 3, 2, 3.0, 2.0)
    with pytest.raises(ConfigError):
        build_wavenumber_systems(op, m_y=6, l_y=1.0)
    with pytest.raises(ConfigError):
        build_wavenumber_systems(op, m_y=8, l_y=0.0)


def test_shifted_solve_matches_dense(rng):
    op = make_op(5, 3, 2, 3.0, 2.0)
    fac = factor_unshifted_blocks(op)
    for g, block in enumerate(op.blocks):
        b = rng.standard_normal((block.shape[0], 2))
        for k in (0.7, 3.1):
            ref = np.linalg.solve(block - k * k * np.eye(block.shape[0]), b)
            x = shifted_block_solve(fac, g, k, b)
            assert np.isrealobj(x)
            assert np.linalg.norm(x - ref) <= 1e-10 * np.linalg.norm(ref)


def test_shifted_transpose(rng):
    op = make_op(5, 3, 2, 3.0, 2.0)
    loc = ShiftedLocalSolver(op, factor_unshifted_blocks(op), 1.3)
    A = op.dense_A() - 1.69 * np.eye(op.r)
    u = rng.standard_normal(op.r)
    np.testing.assert_allclose(A @ loc.solve(u), u, atol=1e-9)
    np.testing.assert_allclose(A.T @ loc.solve_T(u), u, atol=1e-9)


def test_singular_shift_raises():
    op = make_op(4, 3, 2, 3.0, 2.0)
    fac = factor_unshifted_blocks(op)
    lam = fac.T[0][0, 0]
    with pytest.raises(SingularShiftError):
        shifted_block_solve(fac, 0, np.sqrt(lam + 0j), np.ones(fac.dims[0]))


def test_shifted_solve_cost_quadratic():
    costs = []
    for m_z in (3, 6):
        op = make_op(6, 3, m_z, 3.0, float(m_z))
        fac = factor_unshifted_blocks(op)
        shifted_block_solve(fac, 0, 1.0, np.ones(fac.dims[0]))
        costs.append(fac.ops)
    assert 3.5 < costs[1] / costs[0] <= 4.5


def test_zero_wavenumber_is_2d_system(ctx):
    two_d = assemble_schur(ctx.op)
    np.testing.assert_array_equal(ctx.systems[0].sys.blocks, two_d.blocks)
    assert ctx.systems[0].null is not None


def test_shifted_coarse_invertible(ctx):
    for w in ctx.systems[1:]:
        assert w.null is None
        s = np.linalg.svd(w.coarse.C, compute_uv=False)
        assert s.min() > 1e-8 * s.max()


def test_shifted_schur_matches_definition(ctx, rng):
    w = ctx.systems[2]
    v = rng.standard_normal(w.sys.k)
    ref = w.sys.apply_definition(v)
    assert np.linalg.norm(w.sys.apply(v) - ref) <= 1e-11 * np.linalg.norm(ref)


@pytest.mark.parametrize("method", ["dbj", "2las"])
def test_stacked_matches_per_wavenumber(ctx, rng, method):
    f = rng.standard_normal((ctx.op.r, ctx.m_y))
    res = solve_3d(ctx, f, method, tol=1e-12)
    ref, iters = solve_per_wavenumber(ctx, f, method, tol=1e-12)
    assert np.isrealobj(res.u) and res.u.shape == f.shape
    assert res.report.converged and res.schur_rel_residual < 1e-10
    assert np.abs(res.u - ref).max() <= 1e-9 * np.abs(ref).max()
    assert len(iters) == 2 * ctx.n_modes


def test_only_zero_mode_is_projected(ctx, rng):
    # a right-hand side without a y-mean needs no projection at all
    y = np.arange(ctx.m_y) * ctx.l_y / ctx.m_y
    f = np.outer(rng.standard_normal(ctx.op.r), np.sin(2 * np.pi * y / ctx.l_y))
    res = solve_3d(ctx, f, "dbj", tol=1e-12)
    w = ctx.systems[1]
    A = ctx.op.dense_L() - w.k ** 2 * np.eye(ctx.op.r)
    assert np.linalg.norm(A @ res.coef[:, 1] - fourier_transform_y(f)[:, 1]) < 1e-8 * np.linalg.norm(f)


def manufactured_3d(op, m_y, l_y):
    mesh = op.mesh
    x, z = mesh.node_coords.T
    y = np.arange(m_y) * l_y / m_y
    ax, az, ay = np.pi / mesh.l_x, np.pi / mesh.l_z, 2 * np.pi / l_y
    cy = np.cos(ay * y)
    base = np.cos(ax * x) * np.cos(az * z)
    grad = np.column_stack([-ax * np.sin(ax * x) * np.cos(az * z),
                            -az * np.cos(ax * x) * np.sin(az * z)])
    lap = -(ax ** 2 + az ** 2 + ay ** 2)
    rhs = np.column_stack([neumann_rhs(mesh, op.tau, lap * base * c, grad * c) for c in cy])
    return np.outer(base, cy), rhs


def test_manufactured_solution_3d():
    errs = []
    for n in (6, 10):
        op = make_op(n, 4, 3, 4.0, 3.0)
        c = build_wavenumber_systems(op, m_y=8, l_y=3.0)
        exact, rhs = manufactured_3d(op, 8, 3.0)
        u = solve_3d(c, rhs, "dbj", tol=1e-12).u
        errs.append(np.abs((u - u.mean()) - (exact - exact.mean())).max())
    assert errs[1] < 1e-8 and errs[1] < 1e-3 * errs[0]


def test_flop_model():
    base = flop_model(10, 64, 10, 32, 8, 30)
    assert base > 0
    # doubling m_x and the rank count leaves the per-rank work unchanged
    assert flop_model(10, 128, 10, 32, 16, 30) == pytest.approx(base)
    assert flop_model(10, 64, 10, 64, 8, 30) > 2 * base * 0.99
    assert flop_model(10, 64, 10, 32, 8, 60) > base
