"""Experiment drivers: iteration-count sweeps, oracle validation, convergence study.

Right-hand sides are drawn uniformly on [0, 1] from numpy's PCG64 generator.
Trial ``t`` uses the ``t``-th child of ``SeedSequence(seed)``, so every method
sees the same right-hand sides and reruns with the same seed reproduce the
same rows (timing columns aside).
"""

import csv
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, ConvergenceError, NumericError
from .helmholtz3d import build_wavenumber_systems, solve_3d
from .mesh import build_decomposition, build_mesh
from .nullspace import angle
from .operator import build_operator, neumann_rhs
from .oracles import dense_left_null_vector, dense_projected_solve, dense_smpm_matrix, guard, relative_inf_error
from .solver import METHODS, SchurSolver

log = logging.getLogger(__name__)

CSV_COLUMNS = ("method", "n", "m_x", "m_z", "m_y", "eta", "trial", "iterations",
               "rel_residual", "setup_time_s", "solve_time_s", "status")
METHODS_3D = ("dbj", "2las")


@dataclass
class ExperimentConfig:
    method: str = "dbj"
    n: int = 10
    m_x: int = 8
    m_z: int = 10
    m_y: int = 0  # 0 selects the 2D problem
    l_x: float = None  # defaults to unit element aspect ratio
    l_z: float = 10.0
    l_y: float = None  # defaults to l_z
    tol: float = 1e-10
    trials: int = 10
    seed: int = 0
    c_tau: float = 1.0
    out: str = None
    max_iter: int = None
    jobs: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        allowed = METHODS_3D if self.m_y else METHODS
        if self.method not in allowed:
            raise ConfigError(f"method {self.method!r} not available here; choose from {allowed}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if min(self.n, self.m_x, self.m_z) < 1 or self.n < 2:
            raise ConfigError("grid needs n >= 2, m_x >= 1, m_z >= 1")
        if self.m_y and (self.m_y < 2 or self.m_y & (self.m_y - 1)):
            raise ConfigError(f"m_y must be a power of two, got {self.m_y}")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")

    @property
    def lx(self):
        return self.l_x if self.l_x is not None else self.m_x * self.l_z / self.m_z

    @property
    def ly(self):
        return self.l_y if self.l_y is not None else self.l_z

    @property
    def eta(self):
        return (self.lx / self.m_x) / (self.l_z / self.m_z)


def trial_generators(seed, trials):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(trials)]


def build_setup(cfg):
    """Solver state for the grid in ``cfg`` (2D solver or 3D context)."""
    mesh = build_mesh(cfg.n, cfg.m_x, cfg.m_z, cfg.lx, cfg.l_z)
    op = build_operator(mesh, build_decomposition(mesh), c_tau=cfg.c_tau)
    if cfg.m_y:
        return build_wavenumber_systems(op, cfg.m_y, cfg.ly, seed=cfg.seed)
    return SchurSolver(op, seed=cfg.seed)


def _row(cfg, trial, iterations, rel, setup, solve, status):
    return {"method": cfg.method, "n": cfg.n, "m_x": cfg.m_x, "m_z": cfg.m_z, "m_y": cfg.m_y,
            "eta": cfg.eta, "trial": trial, "iterations": iterations, "rel_residual": rel,
            "setup_time_s": setup, "solve_time_s": solve, "status": status}


def _one_trial(cfg, setup, rng, trial):
    r = setup.op.r
    f = rng.random((r, cfg.m_y)) if cfg.m_y else rng.random(r)
    t0 = time.perf_counter()
    try:
        if cfg.m_y:
            res = solve_3d(setup, f, cfg.method, cfg.tol, cfg.max_iter)
        else:
            res = setup.solve(f, cfg.method, cfg.tol, cfg.max_iter)
    except (ConvergenceError, NumericError) as exc:
        log.warning("trial %d failed: %s", trial, exc)
        return _row(cfg, trial, float("nan"), float("nan"), setup.setup_time,
                    time.perf_counter() - t0, "failed")
    elapsed = time.perf_counter() - t0
    # the residual is measured against the unpreconditioned Schur operator
    status = "ok" if res.schur_rel_residual <= cfg.tol else "failed"
    return _row(cfg, trial, res.report.iterations, res.schur_rel_residual, setup.setup_time,
                elapsed, status)


def run_experiment(cfg, setup=None):
    """One row per trial plus a ``mean`` row over the successful trials."""
    cfg.validate()
    if setup is None:
        setup = build_setup(cfg)
    rngs = trial_generators(cfg.seed, cfg.trials)
    if cfg.jobs > 1:
        with ThreadPoolExecutor(cfg.jobs) as pool:
            rows = list(pool.map(lambda t: _one_trial(cfg, setup, rngs[t], t), range(cfg.trials)))
    else:
        rows = [_one_trial(cfg, setup, rngs[t], t) for t in range(cfg.trials)]
    good = [r for r in rows if r["status"] == "ok"]
    if good:
        mean = {c: float(np.mean([r[c] for r in good]))
                for c in ("iterations", "rel_residual", "solve_time_s")}
        status = "ok" if len(good) == len(rows) else "partial"
    else:
        mean = dict.fromkeys(("iterations", "rel_residual", "solve_time_s"), float("nan"))
        status = "failed"
    rows.append(_row(cfg, "mean", mean["iterations"], mean["rel_residual"], setup.setup_time,
                     mean["solve_time_s"], status))
    return rows


def _methods_on_grid(cfg, methods):
    setup = build_setup(cfg)
    rows = []
    means = {}
    for m in methods:
        part = run_experiment(replace(cfg, method=m), setup)
        means[m] = part[-1]["iterations"]
        rows.extend(part)
    if "dbj" in means and "2las" in means:
        # iteration ratio of deflation to two-level Schwarz on this grid
        ratio = _row(cfg, "ratio", means["dbj"] / means["2las"], float("nan"), setup.setup_time,
                     float("nan"), "ok")
        ratio["method"] = "dbj/2las"
        rows.append(ratio)
    return rows


def sweep_aspect(cfg, etas=(1, 5, 10, 25, 50), methods=("schur", "bj")):
    """Stretch the domain in x at fixed ``m_x, m_z, l_z``."""
    rows = []
    for eta in etas:
        l_x = eta * cfg.m_x * cfg.l_z / cfg.m_z
        rows.extend(_methods_on_grid(replace(cfg, l_x=l_x, method=methods[0]), methods))
    return rows


def sweep_mx(cfg, m_xs=(8, 16, 32, 64), methods=METHODS, eta=1.0):
    """Lengthen the domain at constant element aspect ratio."""
    rows = []
    for m_x in m_xs:
        l_x = eta * m_x * cfg.l_z / cfg.m_z
        rows.extend(_methods_on_grid(replace(cfg, m_x=m_x, l_x=l_x, method=methods[0]), methods))
    return rows


def sweep_3d(cfg, m_xs=(8, 16, 32), methods=METHODS_3D, eta=1.0):
    if not cfg.m_y:
        raise ConfigError("the 3D sweep needs m_y")
    return sweep_mx(cfg, m_xs, methods, eta)


def mean_iterations(rows):
    """``{(method, m_x, eta, m_y): mean iterations}`` from the summary rows."""
    return {(r["method"], r["m_x"], round(r["eta"], 12), r["m_y"]): r["iterations"]
            for r in rows if r["trial"] in ("mean", "ratio")}


def write_csv(rows, path_or_file, columns=CSV_COLUMNS):
    own = isinstance(path_or_file, (str, os.PathLike))
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        writer = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore")
        writer.writeheader()
        for r in rows:
            writer.writerow(r)
    finally:
        if own:
            fh.close()


# --- oracles -------------------------------------------------------------

@dataclass
class Check:
    name: str
    value: float
    threshold: float
    passed: bool

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        return f"{mark}  {self.name}: {self.value:.3e} (limit {self.threshold:.1e})"


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def add(self, name, value, threshold, le=True):
        ok = bool(value <= threshold) if le else bool(value >= threshold)
        self.checks.append(Check(name, float(value), float(threshold), ok))

    def lines(self):
        return [c.line() for c in self.checks]


def residual_bound_gap(solver, f, x_S, b_S_raw, f_tilde):
    """``(||L u - f~||, ||S x - (I - u_S u_S^T) b_S||, rounding scale)`` for one solve."""
    op, sys = solver.op, solver.sys
    u_S = solver.null.u_S
    u = sys.recover(f_tilde, x_S)
    lhs = np.linalg.norm(op.apply_L(u) - f_tilde)
    rhs = np.linalg.norm(sys.apply(x_S) - (b_S_raw - u_S * (u_S @ b_S_raw)))
    l_norm = math.sqrt(sum(np.linalg.norm(b) ** 2 * len(op.strips_of_block(g))
                           for g, b in enumerate(op.blocks)) + np.linalg.norm(op.B.data) ** 2)
    scale = l_norm * np.linalg.norm(u) + np.linalg.norm(f_tilde)
    return lhs, rhs, scale


def run_oracle_validation(cfg, n_bound_rhs=50, tol=1e-8):
    """Compare the iterative path with dense references on a small grid."""
    mesh = build_mesh(cfg.n, cfg.m_x, cfg.m_z, cfg.lx, cfg.l_z)
    guard(mesh.r)
    op = build_operator(mesh, build_decomposition(mesh), c_tau=cfg.c_tau)
    solver = SchurSolver(op, seed=cfg.seed)
    report = ValidationReport()

    L = dense_smpm_matrix(mesh, op.tau)
    report.add("dense assembly vs split operator (max abs diff / max abs)",
               np.abs(L - op.dense_L()).max() / np.abs(L).max(), 1e-12)

    u_L_dense = dense_left_null_vector(L)
    report.add("u_L angle to dense left null vector", angle(solver.null.u_L, u_L_dense), 1e-7)
    report.add("u_S angle to E^T u_L", angle(solver.null.u_S, op.dec.apply_Et(u_L_dense)), 1e-7)
    B_t_uS = solver.local.solve_T(op.B.T @ solver.null.u_S)
    report.add("u_L angle to A^-T B^T u_S", angle(u_L_dense, B_t_uS), 1e-7)

    rng = trial_generators(cfg.seed, 1)[0]
    f = rng.random(mesh.r)
    ref, _ = dense_projected_solve(L, f)
    errs = {}
    for m in METHODS:
        res = solver.solve(f, m, tol=min(cfg.tol, 1e-10))
        errs[m] = relative_inf_error(res.u, ref)
        report.add(f"{m} vs dense projected solve (rel inf, mean removed)", errs[m], tol)
    spread = max(relative_inf_error(solver.solve(f, m).u, solver.solve(f, "dbj").u) for m in METHODS)
    report.add("cross-method agreement (rel inf, mean removed)", spread, tol)

    worst = -np.inf
    for t in range(n_bound_rhs):
        f = rng.random(mesh.r)
        f_tilde, b_S = solver.schur_rhs(f)
        b_raw = solver.sys.rhs(f_tilde)
        x_S, _ = solver.solve_schur(b_S, "dbj", tol=cfg.tol)
        lhs, rhs, scale = residual_bound_gap(solver, f, x_S, b_raw, f_tilde)
        worst = max(worst, lhs - rhs - 10 * np.finfo(float).eps * scale)
    report.add(f"grid residual bound over {n_bound_rhs} rhs (max excess)", worst, 0.0)
    return report


def manufactured_problem(mesh, tau):
    """Exact ``cos(pi x / l_x) cos(pi z / l_z)`` and its right-hand side."""
    x, z = mesh.node_coords.T
    lx, lz = mesh.l_x, mesh.l_z
    cx, cz = np.cos(np.pi * x / lx), np.cos(np.pi * z / lz)
    sx, sz = np.sin(np.pi * x / lx), np.sin(np.pi * z / lz)
    u = cx * cz
    f = -np.pi ** 2 * (1 / lx ** 2 + 1 / lz ** 2) * u
    grad = np.column_stack([-np.pi / lx * sx * cz, -np.pi / lz * cx * sz])
    return u, neumann_rhs(mesh, tau, f, grad)


def run_convergence_study(cfg, ns=(6, 8, 10, 12), method="dbj", tol=1e-12):
    """Mean-removed max-norm error of the manufactured solution for each ``n``."""
    rows = []
    for n in ns:
        mesh = build_mesh(n, cfg.m_x, cfg.m_z, cfg.lx, cfg.l_z)
        op = build_operator(mesh, build_decomposition(mesh), c_tau=cfg.c_tau)
        exact, rhs = manufactured_problem(mesh, op.tau)
        u = SchurSolver(op, seed=cfg.seed).solve(rhs, method, tol=tol).u
        err = (u - u.mean()) - (exact - exact.mean())
        rows.append({"n": n, "L_inf_error": float(np.abs(err).max())})
    return rows
