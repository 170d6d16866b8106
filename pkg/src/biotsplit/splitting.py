"""Fixed-stress splitting for quasi-static Biot consolidation.

Backward Euler in time.  Each outer iteration solves the flow equation
stabilized by L * (p_i - p_{i-1}) terms, then the mechanics equation with
the fresh pressure.  Two drivers share those stages:

    fs_solve  iterates within each time step to convergence before moving
              on (the classical sequential split);
    pfs_solve iterates globally over the whole space-time solution: one
              forward-in-time flow sweep, then one mechanics update of all
              time levels at once, which is embarrassingly parallel in time.

Convergence of the iterate increments (delta u, delta p) is measured per
time level as tol_p * ||delta p|| + tol_u * ||delta u|| in the Euclidean
norm of coefficient vectors, maximized over levels.  The theoretical
contraction factor of the split is L / (1/beta + L) for any L at or above
l_min = l_phy / 2.
"""

from __future__ import annotations

import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .linalg import SolverConfig, SpdSolver


@dataclass(frozen=True)
class SplitConfig:
    """Options shared by both splitting drivers.

    Attributes
    ----------
    L : float
        Stabilization parameter, nonnegative.  Values below l_min void the
        contraction guarantee (a warning is issued, not an error).
    tol_p, tol_u : float
        Weights of the pressure and displacement increment norms in the
        stopping criterion.
    tol : float
        Stopping threshold for the weighted increment norm.
    max_iter : int
        Outer iteration cap.
    worker_count : int
        Thread count for the time-parallel mechanics stage.
    """

    L: float
    tol_p: float = 1e-8
    tol_u: float = 1e2
    tol: float = 1e-8
    max_iter: int = 500
    worker_count: int = 1

    def __post_init__(self):
        if self.L < 0:
            raise ValueError(f"L must be nonnegative, got {self.L}")
        if min(self.tol_p, self.tol_u, self.tol) <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got "
                             f"{self.max_iter}")
        if self.worker_count < 1:
            raise ValueError(f"worker_count must be at least 1, got "
                             f"{self.worker_count}")


@dataclass
class SpaceTimeState:
    """Displacement and pressure coefficients at all time levels.

    Row n holds the solution at time n * tau for n = 0 .. n_steps; row 0 is
    the initial condition and is never modified by the solvers.
    """

    u: np.ndarray
    p: np.ndarray
    tau: float
    n_steps: int

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be at least 1, got "
                             f"{self.n_steps}")
        if self.u.shape[0] != self.n_steps + 1 or \
                self.p.shape[0] != self.n_steps + 1:
            raise ValueError("state arrays must have n_steps + 1 rows")


@dataclass
class IterationReport:
    """Convergence record of one splitting run.

    For the time-parallel driver, increment_sq_sums[i-1] holds
    sum_n tau * ||(delta p^n_i - delta p^{n-1}_i) / tau||^2 of sweep i and
    observed_rates[i-2] the ratio of consecutive sums.  For the sequential
    driver the per-step iteration counts and their mean are filled instead.
    A final sweep whose increment is exactly zero only confirms the fixed
    point and is not counted in `iterations`.
    """

    method: str
    converged: bool
    iterations: int
    increment_sq_sums: list = field(default_factory=list)
    observed_rates: list = field(default_factory=list)
    crit_values: list = field(default_factory=list)
    flow_times: list = field(default_factory=list)
    mech_times: list = field(default_factory=list)
    per_step_iterations: list = None
    mean_step_iterations: float = None
    failed_step: int = None


class AlreadyConverged(RuntimeError):
    """The previous sweep had a zero increment; no rate is defined."""


def theoretical_rate(params, L):
    """Contraction bound L / (1/beta + L) of the stabilized split."""
    if L < 0:
        raise ValueError(f"L must be nonnegative, got {L}")
    return L / (1.0 / params.beta + L)


def observed_rate(report, i):
    """Measured contraction between sweeps i-1 and i (1-based, i >= 2)."""
    if i < 2:
        raise ValueError(f"observed rate needs two sweeps, got i={i}")
    sums = report.increment_sq_sums
    if len(sums) < i:
        raise ValueError(f"report holds {len(sums)} sweeps, got i={i}")
    if sums[i - 2] == 0.0:
        raise AlreadyConverged(f"sweep {i - 1} had a zero increment")
    return sums[i - 1] / sums[i - 2]


def build_flow_solver(sys, params, cfg, tau, solver_config=None):
    """Factorized solver of the stabilized flow operator.

    The matrix is (1/beta + L) / tau * Mp + C with fixed pressure dofs
    eliminated; it is SPD for any L >= 0 and is built once per run.
    """
    coef = (1.0 / params.beta + cfg.L) / tau
    mat = (coef * sys.base.Mp + sys.base.C).tocsr()
    return SpdSolver(sys.constrain_flow_matrix(mat), solver_config)


def build_mech_solver(sys, solver_config=None):
    """Factorized solver of the constrained elasticity block."""
    return SpdSolver(sys.A_c, solver_config)


def flow_sweep(state_prev_iter, state_cur, sys, params, cfg, solver=None):
    """March the stabilized flow equation across all time levels once.

    Level n is driven by the freshly computed level n - 1 of state_cur and
    by the lagged displacement and pressure of state_prev_iter:

        [(1/beta + L)/tau Mp + C] p^n =
            (1/beta + L)/tau Mp p^{n-1}
            - alpha/tau Bc (u_lag^n - u_lag^{n-1})
            + L/tau Mp (p_lag^n - p_lag^{n-1}) + f^n.

    state_cur.p rows 1..n_steps are overwritten in place and returned.
    """
    base = sys.base
    tau = state_cur.tau
    if solver is None:
        solver = build_flow_solver(sys, params, cfg, tau)
    coef = (1.0 / params.beta + cfg.L) / tau
    a_t = params.alpha / tau
    l_t = cfg.L / tau
    p = state_cur.p
    u_lag = state_prev_iter.u
    p_lag = state_prev_iter.p
    for n in range(1, state_cur.n_steps + 1):
        rhs = coef * (base.Mp @ p[n - 1])
        if a_t != 0.0:
            rhs -= a_t * (base.Bc @ (u_lag[n] - u_lag[n - 1]))
        if l_t != 0.0:
            rhs += l_t * (base.Mp @ (p_lag[n] - p_lag[n - 1]))
        if base.f_load is not None:
            rhs += base.f_load(n * tau)
        p[n] = solver.solve(sys.constrain_flow_rhs(rhs))
    return p


def mechanics_stage(pressures, sys, params, cfg, solver=None, base=None):
    """Solve the mechanics equation for a batch of pressure fields.

    The solves are independent, so they are distributed over
    cfg.worker_count threads; results do not depend on the thread count.

    Parameters
    ----------
    pressures : ndarray, shape (m, n_pressure)
    base : tuple of ndarray, optional
        Batch (u_prev, p_prev) of a previous iterate whose levels already
        satisfy the mechanics equation.  When given, each level solves
        the load-free increment equation driven by
        pressures[k] - p_prev[k] and adds the correction to u_prev[k].
        Algebraically the result is unchanged, but the rounding error of
        a direct solve scales with the solution, and near a fixed point
        the full-solve noise can straddle a tight stopping tolerance;
        the increment form makes that noise shrink with the increment
        itself, so the outer iteration settles cleanly.

    Returns
    -------
    ndarray, shape (m, n_displacement)
    """
    if solver is None:
        solver = build_mech_solver(sys)
    m = pressures.shape[0]
    out = np.empty((m, sys.dofmap.n_displacement))
    u_prev, p_prev = base if base is not None else (None, None)

    def solve_one(k):
        if base is None:
            rhs = sys.constrain_mech_rhs(
                params.alpha * (sys.bct @ pressures[k])) + sys.g_c
            out[k] = sys.recover_u(solver.solve(rhs))
            return
        rhs = sys.constrain_mech_rhs(
            params.alpha * (sys.bct @ (pressures[k] - p_prev[k])))
        out[k] = u_prev[k] + sys.recover_u(solver.solve(rhs))

    if cfg.worker_count <= 1 or m <= 1:
        for k in range(m):
            solve_one(k)
    else:
        with ThreadPoolExecutor(max_workers=cfg.worker_count) as pool:
            list(pool.map(solve_one, range(m)))
    return out


def _level_norms(delta):
    return np.sqrt(np.einsum("nk,nk->n", delta, delta))


def _criterion(cfg, dp, du):
    per_level = cfg.tol_p * _level_norms(dp[1:]) \
        + cfg.tol_u * _level_norms(du[1:])
    return float(per_level.max())


def _increment_sq_sum(dp, tau):
    rate_inc = np.diff(dp, axis=0)
    return float(np.einsum("nk,nk->", rate_inc, rate_inc) / tau)


def _warn_below_lmin(params, cfg):
    if cfg.L < params.l_min:
        warnings.warn(
            f"L={cfg.L:g} is below l_min={params.l_min:g}; the contraction "
            "guarantee does not apply", UserWarning, stacklevel=3)


def pfs_solve(sys, params, cfg, n_steps, tau, initial_guess,
              solver_config=None):
    """Time-parallel fixed-stress iteration on the whole space-time block.

    Starting from the constant-in-time initial guess, each sweep runs the
    flow stage forward in time and then updates every displacement level
    independently.  Both operators are factorized exactly once.

    Parameters
    ----------
    sys : ConstrainedSystem
    params : MaterialParams
    cfg : SplitConfig
    n_steps : int
    tau : float
    initial_guess : tuple of ndarray
        Coefficient vectors (u0, p0) of the initial condition.

    Returns
    -------
    (SpaceTimeState, IterationReport)
    """
    _warn_below_lmin(params, cfg)
    u0, p0 = initial_guess
    u0 = np.asarray(u0, dtype=np.float64)
    p0 = np.asarray(p0, dtype=np.float64)
    flow_solver = build_flow_solver(sys, params, cfg, tau, solver_config)
    mech_solver = build_mech_solver(sys, solver_config)

    prev = SpaceTimeState(u=np.tile(u0, (n_steps + 1, 1)),
                          p=np.tile(p0, (n_steps + 1, 1)),
                          tau=tau, n_steps=n_steps)
    cur = SpaceTimeState(u=prev.u.copy(), p=prev.p.copy(),
                         tau=tau, n_steps=n_steps)

    report = IterationReport(method="pfs", converged=False, iterations=0)
    for i in range(1, cfg.max_iter + 1):
        t0 = time.perf_counter()
        flow_sweep(prev, cur, sys, params, cfg, solver=flow_solver)
        t1 = time.perf_counter()
        # Sweep 1 anchors the displacement to a full solve; later sweeps
        # apply increment corrections on top of the consistent iterate.
        cur.u[1:] = mechanics_stage(cur.p[1:], sys, params, cfg,
                                    solver=mech_solver,
                                    base=None if i == 1
                                    else (prev.u[1:], prev.p[1:]))
        t2 = time.perf_counter()

        dp = cur.p - prev.p
        du = cur.u - prev.u
        crit = _criterion(cfg, dp, du)
        report.crit_values.append(crit)
        report.increment_sq_sums.append(_increment_sq_sum(dp, tau))
        report.flow_times.append(t1 - t0)
        report.mech_times.append(t2 - t1)
        if i >= 2:
            prev_sq = report.increment_sq_sums[-2]
            report.observed_rates.append(
                report.increment_sq_sums[-1] / prev_sq
                if prev_sq > 0.0 else 0.0)

        prev, cur = cur, prev
        if crit <= cfg.tol:
            report.converged = True
            break

    report.iterations = len(report.crit_values)
    if report.converged and report.crit_values[-1] == 0.0 \
            and report.iterations > 0:
        report.iterations -= 1
    return prev, report


def fs_solve(sys, params, cfg, n_steps, tau, initial_guess,
             solver_config=None):
    """Sequential fixed-stress time stepping.

    Each time step is iterated to the stopping tolerance before the next
    one starts.  The converged previous step supplies the time history,
    while ``initial_guess`` supplies the iterate the step is started from,
    mirroring the whole-interval initialization of :func:`pfs_solve`.

    Returns
    -------
    (SpaceTimeState, IterationReport)
        On a step failure the state holds converged values up to the
        failing step, recorded in report.failed_step.
    """
    _warn_below_lmin(params, cfg)
    u0, p0 = initial_guess
    u0 = np.asarray(u0, dtype=np.float64)
    p0 = np.asarray(p0, dtype=np.float64)
    flow_solver = build_flow_solver(sys, params, cfg, tau, solver_config)
    mech_solver = build_mech_solver(sys, solver_config)

    base = sys.base
    coef = (1.0 / params.beta + cfg.L) / tau
    a_t = params.alpha / tau
    l_t = cfg.L / tau

    state = SpaceTimeState(u=np.tile(u0, (n_steps + 1, 1)),
                           p=np.tile(p0, (n_steps + 1, 1)),
                           tau=tau, n_steps=n_steps)
    report = IterationReport(method="fs", converged=True, iterations=0,
                             per_step_iterations=[])

    stage_cfg = SplitConfig(L=cfg.L, tol_p=cfg.tol_p, tol_u=cfg.tol_u,
                            tol=cfg.tol, max_iter=cfg.max_iter,
                            worker_count=1)
    for n in range(1, n_steps + 1):
        u_old = state.u[n - 1]
        p_old = state.p[n - 1]
        u_it = u0.copy()
        p_it = p0.copy()
        base_rhs = coef * (base.Mp @ p_old)
        if base.f_load is not None:
            base_rhs = base_rhs + base.f_load(n * tau)

        flow_t = 0.0
        mech_t = 0.0
        step_count = 0
        step_converged = False
        for i in range(1, cfg.max_iter + 1):
            t0 = time.perf_counter()
            rhs = base_rhs.copy()
            if a_t != 0.0:
                rhs -= a_t * (base.Bc @ (u_it - u_old))
            if l_t != 0.0:
                rhs += l_t * (base.Mp @ (p_it - p_old))
            p_new = flow_solver.solve(sys.constrain_flow_rhs(rhs))
            t1 = time.perf_counter()
            u_new = mechanics_stage(p_new[None, :], sys, params, stage_cfg,
                                    solver=mech_solver,
                                    base=None if i == 1
                                    else (u_it[None, :], p_it[None, :]))[0]
            t2 = time.perf_counter()
            flow_t += t1 - t0
            mech_t += t2 - t1

            crit = cfg.tol_p * np.linalg.norm(p_new - p_it) \
                + cfg.tol_u * np.linalg.norm(u_new - u_it)
            step_count = i
            p_it, u_it = p_new, u_new
            if crit <= cfg.tol:
                step_converged = True
                if crit == 0.0 and i > 1:
                    step_count = i - 1
                break

        state.p[n] = p_it
        state.u[n] = u_it
        report.per_step_iterations.append(step_count)
        report.crit_values.append(float(crit))
        report.flow_times.append(flow_t)
        report.mech_times.append(mech_t)
        if not step_converged:
            report.converged = False
            report.failed_step = n
            break

    report.iterations = int(sum(report.per_step_iterations))
    report.mean_step_iterations = float(
        np.mean(report.per_step_iterations))
    return state, report
