"""End-to-end acceptance tests of the consolidation benchmark suite.

Each test checks one advertised property of the package and registers a
single verdict line, re-emitted by the conftest hook as a terminal summary
section:

    ACCEPTANCE <n> <title>: PASS|FAIL - details

The tests run real solves; the whole module takes a few minutes, most of
it in the iteration-count table on the finest mesh.
"""

import warnings

import numpy as np
import pytest

import conftest
import test_assembly as ta
from biotsplit import cli
from biotsplit.linalg import SolverConfig
from biotsplit.mandel import (analytic_displacement, analytic_pressure,
                              discretize, initial_conditions,
                              mandel_cryer_profile, preset)
from biotsplit.splitting import (AlreadyConverged, SplitConfig, fs_solve,
                                 observed_rate, pfs_solve, theoretical_rate)

TOL_SOLVE = 1e-8
_DISC_CACHE = {}


def _disc(name, n):
    key = (name, n)
    if key not in _DISC_CACHE:
        _DISC_CACHE[key] = discretize(preset(name), n, n)
    return _DISC_CACHE[key]


def _run(method, name, n, n_steps, tau, L=None, max_iter=100, workers=1,
         solver=None):
    disc = _disc(name, n)
    material = disc.mp.material
    cfg = SplitConfig(L=material.l_phy if L is None else L,
                      max_iter=max_iter, worker_count=workers)
    driver = pfs_solve if method == "pfs" else fs_solve
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return driver(disc.system, material, cfg, n_steps, tau,
                      (disc.u0, disc.p0), solver_config=solver)


def _verdict(num, title, ok, details):
    line = f"ACCEPTANCE {num} {title}: {'PASS' if ok else 'FAIL'} - {details}"
    conftest.acceptance_lines.append(line)
    print(line)
    assert ok, line


def test_criterion_01_iteration_counts_under_refinement():
    # Time step block: the most incompressible preset on the benchmark
    # h = 0.25 grid.  Target 2 time-parallel sweeps (tolerance 1),
    # sequential per-step mean within 0.3 of the published 2.01..2.10.
    problems = []
    for tau in (1.0, 0.5, 0.25, 0.125):
        n_steps = int(round(32.0 / tau))
        _, rp = _run("pfs", "nu0.49999", 40, n_steps, tau, max_iter=20)
        _, rf = _run("fs", "nu0.49999", 40, n_steps, tau)
        pfs_n = rp.iterations if rp.converged else np.inf
        fs_mean = rf.mean_step_iterations
        if not (abs(pfs_n - 2) <= 1 and rf.converged
                and 2.01 - 0.3 <= fs_mean <= 2.10 + 0.3):
            problems.append(f"tau={tau}: pfs {pfs_n} fs {fs_mean:.2f}")

    # Mesh block: element height h = 10/n at tau = 1, target 3 sweeps
    # (tolerance 1), sequential mean within 0.3 of the published
    # 3.19..3.20.
    for n in (20, 40, 80, 160):
        _, rp = _run("pfs", "nu0.499", n, 32, 1.0, max_iter=20)
        _, rf = _run("fs", "nu0.499", n, 32, 1.0)
        pfs_n = rp.iterations if rp.converged else np.inf
        fs_mean = rf.mean_step_iterations
        if not (abs(pfs_n - 3) <= 1 and rf.converged
                and 3.19 - 0.3 <= fs_mean <= 3.20 + 0.3):
            problems.append(f"h=10/{n}: pfs {pfs_n} fs {fs_mean:.2f}")

    _verdict(1, "iteration counts under refinement", not problems,
             "tau block 2 sweeps at tau in {1,.5,.25,.125}, mesh block 3 "
             "sweeps at n in {20,40,80,160}" if not problems
             else "; ".join(problems))


def test_criterion_02_contraction_bound():
    worst_gap = -np.inf
    worst_case = ""
    for name in ("fig3", "nu0.499", "nu0.49999"):
        material = preset(name).material
        for L in (material.l_min, material.l_phy, 4.0 * material.l_phy):
            _, rp = _run("pfs", name, 10, 8, 1.0, L=L, max_iter=200)
            assert rp.converged
            bound = theoretical_rate(material, L)
            for i in range(2, rp.iterations + 1):
                try:
                    gap = observed_rate(rp, i) - bound
                except AlreadyConverged:
                    break
                if gap > worst_gap:
                    worst_gap = gap
                    worst_case = f"{name} L/l_phy={L / material.l_phy:g} i={i}"
    _verdict(2, "contraction bound on observed rates", worst_gap <= 0.05,
             f"max(observed - bound) = {worst_gap:.4f} at {worst_case} "
             f"(allowed 0.05)")


def test_criterion_03_stabilization_optimum():
    factors = (0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0)
    window = {0.5, 1.0, 2.0}
    problems = []
    details = []
    for name in ("nu0.4", "nu0.499", "nu0.49999"):
        material = preset(name).material
        counts = {"fs": [], "pfs": []}
        for f in factors:
            L = f * material.l_phy
            _, rf = _run("fs", name, 10, 8, 1.0, L=L)
            _, rp = _run("pfs", name, 10, 8, 1.0, L=L)
            counts["fs"].append(rf.mean_step_iterations
                                if rf.converged else np.inf)
            counts["pfs"].append(rp.iterations if rp.converged else np.inf)
        for method, vals in counts.items():
            best = min(vals)
            in_window = min(v for f, v in zip(factors, vals) if f in window)
            if in_window != best:
                problems.append(f"{name} {method}: optimum at factor "
                                f"{factors[int(np.argmin(vals))]:g}")
            details.append(f"{name}/{method} best {best:g}")
    _verdict(3, "iteration optimum near the physical stabilization",
             not problems,
             "global minimum attained within [l_phy/2, 2 l_phy] for all "
             "presets and methods" if not problems else "; ".join(problems))


def test_criterion_04_analytic_benchmark_match():
    mp = preset("fig3")
    disc = _disc("fig3", 40)
    state, rep = _run("pfs", "fig3", 40, 30, 1.0)
    assert rep.converged
    xs = disc.mesh.nodes[:41, 0]
    worst_p, worst_u = 0.0, 0.0
    for t in (1.0, 5.0, 10.0, 20.0, 30.0):
        n = int(round(t / 1.0))
        ana = analytic_pressure(xs, t, mp)
        rel = (np.linalg.norm(state.p[n, :41] - ana)
               / np.linalg.norm(ana))
        worst_p = max(worst_p, rel)
        uy_num = state.u[n, disc.dofmap.tie_master]
        uy_ana = analytic_displacement(0.0, mp.b, t, mp)[1]
        worst_u = max(worst_u, abs(uy_num - uy_ana) / abs(uy_ana))
    ok = worst_p <= 0.05 and worst_u <= 0.05
    _verdict(4, "analytic series match on the benchmark grid", ok,
             f"max pressure L2 error {worst_p:.3f}, max plate displacement "
             f"error {worst_u:.4f} (allowed 0.05) at t in 1..30 s")


def test_criterion_05_nonmonotone_pressure_response():
    disc = _disc("fig3", 40)
    p0, _ = initial_conditions(disc.mp)
    state, rep = _run("fs", "fig3", 40, 250, 2.0)
    assert rep.converged
    prof = mandel_cryer_profile(state, 0.0, disc.mesh)
    peak_n = int(np.argmax(prof[1:])) + 1
    rise = prof[peak_n] / prof[1] - 1.0
    post = prof[peak_n:]
    monotone = bool(np.all(np.diff(post) <= 1e-9 * p0))
    final_frac = prof[-1] / p0
    ok = rise >= 0.01 and monotone and final_frac < 0.10
    _verdict(5, "pressure rise before consolidation decay", ok,
             f"rise {100 * rise:.2f}% above the first-step value, peak at "
             f"t={2 * peak_n:g} s, monotone decay {monotone}, final "
             f"pressure {100 * final_frac:.1f}% of p0 at t=500 s")


def test_criterion_06_cross_method_equivalence():
    worst = 0.0
    worst_case = ""
    for name in ("fig3", "nu0.4", "nu0.49", "nu0.499", "nu0.4999",
                 "nu0.49999"):
        state_f, rep_f = _run("fs", name, 10, 8, 1.0)
        state_p, rep_p = _run("pfs", name, 10, 8, 1.0)
        assert rep_f.converged and rep_p.converged
        for n in range(1, 9):
            rel_p = (np.linalg.norm(state_f.p[n] - state_p.p[n])
                     / np.linalg.norm(state_f.p[n]))
            rel_u = (np.linalg.norm(state_f.u[n] - state_p.u[n])
                     / np.linalg.norm(state_f.u[n]))
            if max(rel_p, rel_u) > worst:
                worst = max(rel_p, rel_u)
                worst_case = f"{name} level {n}"
    _verdict(6, "sequential and time-parallel fixed points agree",
             worst <= 1e-6,
             f"max relative difference {worst:.2e} at {worst_case} "
             f"(allowed 1e-6) over all presets")


def test_criterion_07_determinism_under_parallelism():
    ref_state, ref_rep = _run("pfs", "fig3", 10, 8, 1.0, workers=1)
    identical = True
    for wc in (2, 4, 8):
        state, rep = _run("pfs", "fig3", 10, 8, 1.0, workers=wc)
        identical &= (np.array_equal(ref_state.u, state.u)
                      and np.array_equal(ref_state.p, state.p)
                      and rep.iterations == ref_rep.iterations)
    _verdict(7, "bitwise reproducible across worker counts", identical,
             f"worker counts 1, 2, 4, 8 produce identical coefficient "
             f"arrays over {ref_rep.iterations} sweeps")


def test_criterion_08_series_self_consistency():
    mp = preset("fig3")
    m = mp.material
    p0, u0 = initial_conditions(mp)
    xs = np.array([0.0, 0.25, 0.5, 0.75]) * mp.a
    ys = np.linspace(0.0, mp.b, 4)

    p_err = np.max(np.abs(analytic_pressure(xs, 0.0, mp) - p0)) / p0
    ux_a, uy_a = analytic_displacement(xs, ys, 0.0, mp)
    ux_0, uy_0 = u0(xs, ys)
    u_err = max(np.max(np.abs(ux_a - ux_0)) / np.max(np.abs(ux_0)),
                np.max(np.abs(uy_a - uy_0)) / np.max(np.abs(uy_0)))
    c_err = abs(m.c_consol - 46.526) / 46.526
    ok = p_err <= 0.005 and u_err <= 0.005 and c_err <= 0.01
    _verdict(8, "series limits reproduce the loading response", ok,
             f"initial pressure dev {100 * p_err:.2f}%, displacement dev "
             f"{100 * u_err:.2f}% (allowed 0.5%), diffusivity dev "
             f"{100 * c_err:.2f}% of 46.526 (allowed 1%)")


def test_criterion_09_assembly_oracles():
    from biotsplit.assembly import assemble_system, p2_connectivity
    from biotsplit.mesh import build_rect

    mesh = build_rect(1.3, 0.7, 3, 2)
    material = ta._material(E=7.0, nu=0.3)
    base = assemble_system(mesh, material)
    A = base.A.toarray()
    scale = np.abs(A).max()

    oracle = ta._oracle_elasticity(mesh, material.G, material.lam)
    oracle_dev = np.abs(A - oracle).max() / scale

    # Rigid body modes: two translations and one rotation.
    coords = p2_connectivity(mesh).coords
    xs, ys = coords[:, 0], coords[:, 1]
    modes = np.zeros((3, 2 * len(xs)))
    modes[0, 0::2] = 1.0
    modes[1, 1::2] = 1.0
    modes[2, 0::2], modes[2, 1::2] = -ys, xs
    rigid_dev = max(np.abs(A @ mode).max() for mode in modes) / scale

    ones_p = np.ones(base.Mp.shape[0])
    row_sum_dev = np.abs(base.C @ ones_p).max() / np.abs(base.C.toarray()).max()
    mass_dev = abs(ones_p @ (base.Mp @ ones_p) - 1.3 * 0.7) / (1.3 * 0.7)

    # Divergence identity: Bc applied to the field (x, 0) integrates to
    # the pressure mass of the constant 1.
    lin = np.zeros(2 * len(xs))
    lin[0::2] = xs
    div_dev = (np.abs(base.Bc @ lin - base.Mp @ ones_p).max()
               / np.abs(base.Mp @ ones_p).max())

    ok = (oracle_dev <= 1e-12 and rigid_dev <= 1e-9
          and row_sum_dev <= 1e-14 and mass_dev <= 1e-13
          and div_dev <= 1e-12)
    _verdict(9, "element matrices match independent oracles", ok,
             f"oracle dev {oracle_dev:.1e} (<=1e-12), rigid modes "
             f"{rigid_dev:.1e} (<=1e-9), diffusion row sums "
             f"{row_sum_dev:.1e}, mass total {mass_dev:.1e}, divergence "
             f"identity {div_dev:.1e}")


def test_criterion_10_stage_cost_shift(tmp_path):
    solver = SolverConfig(method="cg-jacobi")
    shares = []
    for name in ("nu0.4", "nu0.499", "nu0.49999"):
        _, rep = _run("fs", name, 8, 4, 1.0, solver=solver)
        assert rep.converged
        flow, mech = sum(rep.flow_times), sum(rep.mech_times)
        shares.append(mech / (flow + mech))
    increasing = bool(np.all(np.diff(shares) > 0))

    # Wall times across worker counts are recorded, not asserted.
    config = cli.RunConfig(nx=6, ny=4, tau=1.0, t_end=2.0,
                           out=str(tmp_path))
    rows = cli.bench(config, worker_counts=(1, 2, 4))
    recorded = (tmp_path / "bench.csv").exists() and len(rows) == 4 \
        and all(r["converged"] for r in rows)

    _verdict(10, "mechanics dominates as incompressibility grows",
             increasing and recorded,
             "iterative-solver mechanics share "
             + " -> ".join(f"{s:.3f}" for s in shares)
             + " over nu 0.4, 0.499, 0.49999; worker timings recorded")
