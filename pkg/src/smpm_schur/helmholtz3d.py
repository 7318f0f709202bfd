"""Transversely periodic 3D Poisson-Neumann solve by Fourier decomposition in y.

Each retained wavenumber ``k_j = 2 pi j / l_y`` gives a 2D Helmholtz problem
``(L - k_j^2 I) u_j = f_j`` with the same split ``A(k_j) = A - k_j^2 I``,
``B`` unchanged.  Divisions by ``A(k_j)`` reuse one complex Schur form
``A = U T U^*`` per distinct strip block, so every shifted solve is a
triangular solve plus two matrix-vector products.

All ``S(k_j)`` are real (``A`` and ``k_j^2`` are real), so the complex
Schur problems are solved as pairs of real problems: the stacked Krylov
vector holds the real and imaginary parts of every wavenumber.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .deflation import apply_P, apply_Q, build_coarse
from .errors import ConfigError, NumericError, SingularShiftError
from .krylov import gmres
from .nullspace import compute_null_space
from .operator import LocalSolver
from .preconditioner import BlockJacobi
from .schur import assemble_schur

UNITARY_TOL = 1e-12


def _is_power_of_two(m):
    return m >= 2 and (m & (m - 1)) == 0


def wavenumbers(m_y, l_y):
    """Retained wavenumbers ``2 pi j / l_y`` for ``j = 0 .. m_y/2 - 1``."""
    return 2.0 * np.pi * np.arange(m_y // 2) / l_y


def fourier_transform_y(u):
    """Coefficients ``(1/m_y) sum_l u_l exp(-2 pi i j l / m_y)`` for ``j < m_y/2``.

    ``u`` has shape ``(r, m_y)``; the Nyquist coefficient is discarded.
    """
    u = np.asarray(u, dtype=float)
    m_y = u.shape[-1]
    if not _is_power_of_two(m_y):
        raise ConfigError(f"m_y must be a power of two, got {m_y}")
    return np.fft.rfft(u, axis=-1)[..., : m_y // 2] / m_y


def inverse_fourier_transform_y(coef, m_y):
    """Real field ``u_0 + 2 Re sum_{j>=1} u_j exp(i k_j y)`` on ``m_y`` points."""
    if not _is_power_of_two(m_y):
        raise ConfigError(f"m_y must be a power of two, got {m_y}")
    coef = np.asarray(coef)
    if coef.shape[-1] != m_y // 2:
        raise ValueError(f"expected {m_y // 2} coefficients, got {coef.shape[-1]}")
    full = np.zeros(coef.shape[:-1] + (m_y // 2 + 1,), dtype=complex)
    full[..., : m_y // 2] = coef
    return np.fft.irfft(full * m_y, n=m_y, axis=-1)


@dataclass
class ShiftFactors:
    """Complex Schur forms ``A_g = U_g T_g U_g^*`` of the distinct strip blocks."""

    U: list = field(repr=False)
    T: list = field(repr=False)
    ops: int = 0  # multiply-adds spent in shifted solves

    @property
    def dims(self):
        return [t.shape[0] for t in self.T]


def factor_unshifted_blocks(op):
    factors = ShiftFactors(U=[], T=[])
    for g, block in enumerate(op.blocks):
        try:
            T, U = sla.schur(block, output="complex")
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericError(f"Schur factorisation of strip block {g} failed: {exc}") from exc
        err = np.abs(U.conj().T @ U - np.eye(U.shape[0])).max()
        if err > UNITARY_TOL * U.shape[0]:
            raise NumericError(f"Schur vectors of strip block {g} lost unitarity ({err:.2e})")
        factors.U.append(U)
        factors.T.append(T)
    return factors


def shifted_block_solve(factors, g, k, b):
    """``(A_g - k^2 I)^{-1} b`` through ``U (T - k^2 I)^{-1} U^* b``.

    ``b`` may be a vector or a ``(dim, m)`` array.  Real input gives real
    output.
    """
    U, T = factors.U[g], factors.T[g]
    dim = T.shape[0]
    shift = k * k
    diag = np.diag(T) - shift
    scale = np.abs(np.diag(T)).max() + shift
    if np.abs(diag).min() <= np.finfo(float).eps * dim * scale:
        raise SingularShiftError(f"k^2 = {shift:.6g} coincides with an eigenvalue of strip block {g}")
    b = np.asarray(b)
    Ts = T - shift * np.eye(dim)
    y = sla.solve_triangular(Ts, U.conj().T @ b)
    x = U @ y
    ncols = 1 if b.ndim == 1 else int(np.prod(b.shape[1:]))
    # U^* b and U y are dim^2 each, the back-substitution dim (dim + 1) / 2
    factors.ops += ncols * (2 * dim * dim + dim * (dim + 1) // 2)
    if np.isrealobj(b):
        return x.real
    return x


class ShiftedLocalSolver:
    """Local solver for ``A(k) = A - k^2 I`` built from shared Schur factors.

    Presents the same interface as :class:`~smpm_schur.operator.LocalSolver`
    so the Schur assembly and recovery code is reused unchanged.
    """

    def __init__(self, op, factors, k):
        self.op = op
        self.factors = factors
        self.k = float(k)

    def solve_strip(self, g, rhs):
        return shifted_block_solve(self.factors, g, self.k, rhs)

    def _apply(self, u, trans):
        u = np.asarray(u)
        m_x, s = self.op.mesh.m_x, self.op.mesh.strip_size
        U = u.reshape((m_x, s) + u.shape[1:])
        out = np.empty(U.shape, dtype=np.result_type(u, float))
        for g in range(len(self.factors.T)):
            ids = self.op.strips_of_block(g)
            rhs = np.moveaxis(U[ids], 0, -1).reshape(s, -1)
            if trans:
                # A^T = conj(U) T^T U^T, so solve with the lower triangle T^T
                Ug, Tg = self.factors.U[g], self.factors.T[g]
                Ts = Tg - self.k ** 2 * np.eye(s)
                sol = Ug.conj() @ sla.solve_triangular(Ts.T, Ug.T @ rhs, lower=True)
                sol = sol.real if np.isrealobj(rhs) else sol
            else:
                sol = self.solve_strip(g, rhs)
            out[ids] = np.moveaxis(sol.reshape((s,) + U.shape[2:] + (ids.size,)), -1, 0)
        return out.reshape(u.shape)

    def solve(self, u):
        return self._apply(u, False)

    def solve_T(self, u):
        return self._apply(u, True)


@dataclass
class WavenumberSystem:
    j: int
    k: float
    sys: object = field(repr=False)
    M: object = field(repr=False)
    coarse: object = field(repr=False)
    null: object = field(default=None, repr=False)


@dataclass
class FourierContext:
    op: object = field(repr=False)
    m_y: int
    l_y: float
    k: np.ndarray
    factors: ShiftFactors = field(repr=False)
    systems: list = field(repr=False)
    setup_time: float = 0.0

    @property
    def n_modes(self):
        return len(self.k)


def build_wavenumber_systems(op, m_y, l_y, sigma=None, seed=0):
    """Factor ``A`` once and assemble ``S(k_j)``, ``M(k_j)`` and ``C(k_j)`` for every ``j``.

    ``j = 0`` goes through the LU-based 2D path (so ``S(0)`` is the 2D Schur
    matrix) together with its null vectors; ``j >= 1`` use shifted solves
    and an unregularised coarse matrix.
    """
    if not _is_power_of_two(m_y):
        raise ConfigError(f"m_y must be a power of two, got {m_y}")
    if not l_y > 0:
        raise ConfigError(f"l_y must be positive, got {l_y}")
    t0 = time.perf_counter()
    factors = factor_unshifted_blocks(op)
    ks = wavenumbers(m_y, l_y)
    systems = []
    for j, k in enumerate(ks):
        if j == 0:
            sys = assemble_schur(op, LocalSolver(op))
            null = compute_null_space(sys, sigma=sigma, seed=seed)
            coarse = build_coarse(sys, u_C=null.u_C)
        else:
            sys = assemble_schur(op, ShiftedLocalSolver(op, factors, k))
            null = None
            coarse = build_coarse(sys)
        systems.append(WavenumberSystem(j=j, k=float(k), sys=sys, M=BlockJacobi(sys),
                                        coarse=coarse, null=null))
    return FourierContext(op=op, m_y=m_y, l_y=float(l_y), k=ks, factors=factors,
                          systems=systems, setup_time=time.perf_counter() - t0)


@dataclass
class Solve3DResult:
    u: np.ndarray = field(repr=False)
    coef: np.ndarray = field(repr=False)
    x_S: np.ndarray = field(repr=False)
    report: object
    schur_rel_residual: float


def _split(coef):
    """Complex ``(r, J)`` -> real ``(r, 2J)`` with columns ``Re_0, Im_0, Re_1, ...``."""
    out = np.empty(coef.shape[:-1] + (2 * coef.shape[-1],))
    out[..., 0::2] = coef.real
    out[..., 1::2] = coef.imag
    return out


def _join(parts):
    return parts[..., 0::2] + 1j * parts[..., 1::2]


def schur_rhs_3d(ctx, coef):
    """Projected ``f_j`` and ``b_j = B A(k_j)^{-1} f_j``, as real column pairs."""
    f_parts = _split(coef)
    b_parts = np.empty((ctx.op.dec.k, f_parts.shape[1]))
    for w in ctx.systems:
        cols = slice(2 * w.j, 2 * w.j + 2)
        f = f_parts[:, cols]
        if w.null is not None:
            f = f - np.outer(w.null.u_L, w.null.u_L @ f)
            f_parts[:, cols] = f
        b = w.sys.rhs(f)
        if w.null is not None:
            b = b - np.outer(w.null.u_S, w.null.u_S @ b)
        b_parts[:, cols] = b
    return f_parts, b_parts


def _stacked(ctx, fn):
    """Apply ``fn(w, block)`` to each wavenumber's ``(k, 2)`` slice of a flat vector."""
    kdim, J = ctx.op.dec.k, ctx.n_modes

    def apply(v):
        V = v.reshape(kdim, 2 * J, order="F")
        out = np.empty_like(V)
        for w in ctx.systems:
            cols = slice(2 * w.j, 2 * w.j + 2)
            out[:, cols] = fn(w, V[:, cols])
        return out.reshape(-1, order="F")

    return apply


def stacked_schur_solve(ctx, b_parts, method="dbj", tol=1e-10, max_iter=None):
    """One GMRES over every wavenumber's Schur system; returns ``(x_parts, report)``."""
    b = b_parts.reshape(-1, order="F")
    if method == "dbj":
        def coarse_part(w, B):
            cs = w.coarse
            return cs.apply_Z(cs.coarse_solve(cs.apply_Zt(B)))

        pb = _stacked(ctx, lambda w, B: apply_P(w.coarse, w.sys, B))(b)
        pb_norm = np.linalg.norm(pb)
        scaled = tol * np.linalg.norm(b) / pb_norm if pb_norm > 0 else tol
        op = _stacked(ctx, lambda w, V: apply_P(w.coarse, w.sys, w.sys.apply(w.M(V))))
        xp, report = gmres(op, pb, tol=scaled, max_iter=max_iter)
        fix = _stacked(ctx, lambda w, V: apply_Q(w.coarse, w.sys, w.M(V)))
        x = _stacked(ctx, coarse_part)(b) + fix(xp)
    elif method == "2las":
        def precond(w, V):
            cs = w.coarse
            return w.M(V) + cs.apply_Z(cs.coarse_solve(cs.apply_Zt(V)))

        pre = _stacked(ctx, precond)
        op = _stacked(ctx, lambda w, V: w.sys.apply(precond(w, V)))
        xp, report = gmres(op, b, tol=tol, max_iter=max_iter)
        x = pre(xp)
    else:
        raise ConfigError(f"3D solve supports 'dbj' and '2las', got {method!r}")
    return x.reshape(ctx.op.dec.k, -1, order="F"), report


def solve_3d(ctx, f, method="dbj", tol=1e-10, max_iter=None):
    """Solve the transversely periodic problem for a real ``(r, m_y)`` right-hand side."""
    f = np.asarray(f, dtype=float)
    if f.shape != (ctx.op.r, ctx.m_y):
        raise ValueError(f"right-hand side has shape {f.shape}, expected {(ctx.op.r, ctx.m_y)}")
    coef = fourier_transform_y(f)
    f_parts, b_parts = schur_rhs_3d(ctx, coef)
    x_parts, report = stacked_schur_solve(ctx, b_parts, method, tol, max_iter)
    u_parts = np.empty_like(f_parts)
    res = np.empty_like(b_parts)
    for w in ctx.systems:
        cols = slice(2 * w.j, 2 * w.j + 2)
        u_parts[:, cols] = w.sys.recover(f_parts[:, cols], x_parts[:, cols])
        res[:, cols] = w.sys.apply(x_parts[:, cols]) - b_parts[:, cols]
    u_coef = _join(u_parts)
    bnorm = np.linalg.norm(b_parts)
    rel = float(np.linalg.norm(res) / bnorm) if bnorm > 0 else 0.0
    return Solve3DResult(u=inverse_fourier_transform_y(u_coef, ctx.m_y), coef=u_coef,
                         x_S=_join(x_parts), report=report, schur_rel_residual=rel)


def solve_per_wavenumber(ctx, f, method="dbj", tol=1e-10, max_iter=None):
    """Reference path: a separate GMRES for each wavenumber and component."""
    from .solver import solve_schur_system

    coef = fourier_transform_y(np.asarray(f, dtype=float))
    f_parts, b_parts = schur_rhs_3d(ctx, coef)
    u_parts = np.empty_like(f_parts)
    iters = []
    for w in ctx.systems:
        for c in (2 * w.j, 2 * w.j + 1):
            x, rep = solve_schur_system(w.sys, w.M, w.coarse, b_parts[:, c], method, tol, max_iter)
            u_parts[:, c] = w.sys.recover(f_parts[:, c], x)
            iters.append(rep.iterations)
    return inverse_fourier_transform_y(_join(u_parts), ctx.m_y), iters


def flop_model(n, m_x, m_z, m_y, n_p, K):
    """Per-rank operation estimate of the 3D solve with unit constants and ``log2``.

    Three terms: the transforms, ``6 m_y m_x / n_p`` shifted block solves and
    one GMRES run of ``K`` iterations.
    """
    per_rank = m_x / n_p
    transforms = 2 * n * n * m_z * per_rank * m_y * np.log2(m_y)
    shifted = 6 * m_y * per_rank * (n * n * m_z) ** 2
    krylov = per_rank * K ** 3 * 16 * m_y * n * n * m_z ** 2
    return float(transforms + shifted + krylov)
