import numpy as np
import pytest
from conftest import make_op
from hypothesis import given, settings
from hypothesis import strategies as st

from smpm_schur.operator import LocalSolver
from smpm_schur.schur import assemble_schur, load_blocks


@pytest.fixture(scope="module")
def system():
    return assemble_schur(make_op(5, 5, 3, 5.0, 3.0))


def test_apply_matches_definition(system, rng):
    for _ in range(20):
        v = rng.standard_normal(system.k)
        ref = system.apply_definition(v)
        assert np.linalg.norm(system.apply(v) - ref) <= 1e-12 * np.linalg.norm(ref) * 10


def test_stacked_apply(system, rng):
    V = rng.standard_normal((system.k, 4))
    np.testing.assert_allclose(system.apply(V), np.column_stack([system.apply(c) for c in V.T]),
                               rtol=1e-13, atol=1e-12)


def test_dense_matches_schur_complement(system):
    op = system.op
    A = op.dense_A()
    E = np.zeros((op.r, op.k))
    E[op.dec.interface_nodes, np.arange(op.k)] = 1.0
    S_ref = np.eye(op.k) + op.B.toarray() @ np.linalg.solve(A, E)
    np.testing.assert_allclose(system.dense(), S_ref, atol=1e-10 * np.abs(S_ref).max())


def test_block_tridiagonal_support(system):
    S = system.dense() - np.eye(system.k)
    dec = system.dec
    d = dec.n_interfaces
    for i in range(d):
        for j in range(d):
            blk = S[dec.interface_slice(i), dec.interface_slice(j)]
            if abs(i - j) > 1:
                assert np.all(blk == 0.0)
    assert system.blocks.shape == (d, 4 * dec.side_size, 2 * dec.side_size)


def test_block_layout(system):
    w2 = system.dec.interface_size
    assert system.interface_block(0).shape == (2 * w2, w2)
    assert system.submatrix([1, 2]).shape == (2 * w2, 2 * w2)


def test_dump_round_trip(system, tmp_path):
    path = tmp_path / "blocks.bin"
    system.dump(path)
    header, blocks = load_blocks(path)
    assert header == {"n": 5, "m_x": 5, "m_z": 3, "k": system.k}
    np.testing.assert_array_equal(blocks, system.blocks)
    assert path.stat().st_size == 32 + 8 * system.blocks.size


def test_recovery_reproduces_full_solution(system, rng):
    # pick u, build f = L u, then the interface trace solves the Schur system
    op = system.op
    u = rng.standard_normal(op.r)
    f = op.apply_L(u)
    x_S = op.apply_B(u)
    np.testing.assert_allclose(system.apply(x_S), system.rhs(f), rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(system.recover(f, x_S), u, rtol=1e-9, atol=1e-9)


def test_apply_counter(system, rng):
    system.reset_count()
    system.apply(rng.standard_normal(system.k))
    system.apply(rng.standard_normal((system.k, 3)))
    assert system.apply_count == 4


@settings(max_examples=8, deadline=None)
@given(st.integers(3, 6), st.integers(2, 5), st.integers(1, 3), st.floats(1.0, 20.0))
def test_apply_property(n, m_x, m_z, eta):
    op = make_op(n, m_x, m_z, eta * m_x, float(m_z))
    sys = assemble_schur(op, LocalSolver(op))
    v = np.random.default_rng(n + m_x).standard_normal(sys.k)
    ref = sys.apply_definition(v)
    assert np.linalg.norm(sys.apply(v) - ref) <= 1e-11 * np.linalg.norm(ref)
