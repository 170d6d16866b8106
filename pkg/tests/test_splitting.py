"""Fixed-stress splitting drivers: rates, fixed points, and determinism."""

import numpy as np
import pytest

from biotsplit import (AlreadyConverged, FlowBC, IterationReport, MechBC,
                       ProblemDef, SideBC, SplitConfig, SpdSolver,
                       apply_constraints, assemble_system, build_dof_map,
                       build_rect, discretize, fs_solve, mechanics_stage,
                       observed_rate, pfs_solve, preset, theoretical_rate)
from biotsplit.mesh import BoundaryTag


@pytest.fixture(scope="module")
def small_fig3():
    mp = preset("fig3")
    return mp, discretize(mp, 10, 10)


def test_theoretical_rate_frozen_values():
    mp = preset("fig3")
    mat = mp.material
    assert mat.l_phy == pytest.approx(2.424242424242424e-10, rel=1e-15)
    assert theoretical_rate(mat, mat.l_phy) == pytest.approx(0.8, rel=1e-13)
    assert theoretical_rate(mat, 0.0) == 0.0
    with pytest.raises(ValueError):
        theoretical_rate(mat, -1e-12)


def test_theoretical_rate_monotone_in_l():
    mat = preset("nu0.4").material
    grid = np.linspace(0.0, 10.0 * mat.l_phy, 25)
    rates = [theoretical_rate(mat, L) for L in grid]
    assert all(b > a for a, b in zip(rates, rates[1:]))
    assert all(0.0 <= r < 1.0 for r in rates)


def test_observed_rate_argument_errors():
    report = IterationReport(method="pfs", converged=True, iterations=2,
                             increment_sq_sums=[4.0, 1.0, 0.0, 0.0])
    assert observed_rate(report, 2) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        observed_rate(report, 1)
    with pytest.raises(ValueError):
        observed_rate(report, 9)
    with pytest.raises(AlreadyConverged):
        observed_rate(report, 4)


def test_decoupled_problem_converges_immediately(small_fig3):
    mp, _ = small_fig3
    from biotsplit import MaterialParams
    mat = mp.material
    decoupled = MaterialParams(E=mat.E, nu=mat.nu, alpha=0.0, beta=mat.beta,
                               kappa=mat.kappa, mu_f=mat.mu_f)
    assert decoupled.l_phy == 0.0
    from biotsplit import MandelParams, mandel_problem
    mp0 = MandelParams(a=mp.a, b=mp.b, force=mp.force, material=decoupled)
    disc = discretize(mp0, 6, 6)
    cfg = SplitConfig(L=decoupled.l_phy)
    guess = (disc.u0, disc.p0)
    _, rep = pfs_solve(disc.system, decoupled, cfg, 4, 1.0, guess)
    assert rep.converged and rep.iterations == 1
    _, rep_fs = fs_solve(disc.system, decoupled, cfg, 4, 1.0, guess)
    assert rep_fs.converged
    assert rep_fs.per_step_iterations == [1, 1, 1, 1]


def test_single_step_matches_monolithic_oracle(small_fig3):
    # One backward-Euler step of the full two-field system, solved densely
    # on the constrained free dofs, is the fixed point both drivers must
    # reach when iterated far beyond the default tolerance.
    mp = preset("fig3")
    disc = discretize(mp, 2, 2)
    mat = mp.material
    sys_ = disc.system
    base = sys_.base
    dofmap = disc.dofmap
    tau = 1.0

    q = sys_._q.toarray()
    a_full = q.T @ base.A.toarray() @ q
    bc_full = base.Bc.toarray() @ q
    slaves = set(dofmap.tie_slaves.tolist())
    fixed_u = set(dofmap.fixed_u.tolist())
    free_u = [i for i in range(base.A.shape[0])
              if i not in slaves and i not in fixed_u]
    free_p = [i for i in range(base.C.shape[0])
              if i not in set(dofmap.fixed_p.tolist())]

    g_vec = base.g_load.copy()
    g_vec[dofmap.tie_master] -= mp.force
    g_r = (q.T @ g_vec)[free_u]

    a_r = a_full[np.ix_(free_u, free_u)]
    b_r = bc_full[np.ix_(free_p, free_u)]
    c_r = base.C.toarray()[np.ix_(free_p, free_p)]
    m_r = base.Mp.toarray()[np.ix_(free_p, free_p)]

    alpha = mat.alpha
    nu_, np_ = len(free_u), len(free_p)
    lhs = np.zeros((nu_ + np_, nu_ + np_))
    lhs[:nu_, :nu_] = a_r
    lhs[:nu_, nu_:] = -alpha * b_r.T
    lhs[nu_:, :nu_] = alpha * b_r / tau
    lhs[nu_:, nu_:] = m_r / (mat.beta * tau) + c_r
    # The initial condition is nonzero on the drained boundary (pressure
    # jump at t = 0), so its contribution enters through full columns.
    rhs_flow = (alpha * (base.Bc @ disc.u0) / tau
                + (base.Mp @ disc.p0) / (mat.beta * tau))[free_p]
    rhs = np.concatenate([g_r, rhs_flow])
    exact = np.linalg.solve(lhs, rhs)

    cfg = SplitConfig(L=mat.l_phy, tol=1e-14, max_iter=2000)
    guess = (disc.u0, disc.p0)
    for driver in (pfs_solve, fs_solve):
        state, rep = driver(sys_, mat, cfg, 1, tau, guess)
        assert rep.converged
        err_u = np.linalg.norm(state.u[1][free_u] - exact[:nu_])
        err_p = np.linalg.norm(state.p[1][free_p] - exact[nu_:])
        assert err_u <= 1e-10 * max(1.0, np.linalg.norm(exact[:nu_]))
        assert err_p <= 1e-10 * np.linalg.norm(exact[nu_:])


def test_uniform_pressure_closed_form_displacement():
    # Traction-free square with symmetry planes: a(u, v) = alpha (p0, div v)
    # has the exact solution u = alpha p0 / (2 (G + lambda)) (x, y).
    mat = preset("fig3").material
    bcs = {
        BoundaryTag.LEFT: SideBC(FlowBC.NO_FLUX, MechBC.NORMAL_ZERO),
        BoundaryTag.BOTTOM: SideBC(FlowBC.NO_FLUX, MechBC.NORMAL_ZERO),
        BoundaryTag.RIGHT: SideBC(FlowBC.PRESSURE, MechBC.TRACTION_FREE),
        BoundaryTag.TOP: SideBC(FlowBC.NO_FLUX, MechBC.TRACTION_FREE),
    }
    problem = ProblemDef(a=1.0, b=1.0, bcs=bcs, p_initial=1.0,
                         u_initial=None, plate_force=0.0)
    mesh = build_rect(1.0, 1.0, 2, 2)
    dofmap = build_dof_map(mesh, problem)
    raw = assemble_system(mesh, mat)
    sys_ = apply_constraints(raw, dofmap, plate_force=0.0)
    p0 = 3.1e6
    pressures = np.full((1, raw.C.shape[0]), p0)
    cfg = SplitConfig(L=mat.l_phy)
    u = mechanics_stage(pressures, sys_, mat, cfg)[0]
    coef = mat.alpha * p0 / (2.0 * (mat.G + mat.lam))
    expected = np.empty_like(u)
    expected[0::2] = coef * dofmap.coords[:, 0]
    expected[1::2] = coef * dofmap.coords[:, 1]
    np.testing.assert_allclose(u, expected, rtol=0,
                               atol=1e-9 * np.abs(expected).max())


def test_under_stabilization_warns(small_fig3):
    mp, disc = small_fig3
    mat = mp.material
    cfg = SplitConfig(L=mat.l_min / 2.0, max_iter=400)
    guess = (disc.u0, disc.p0)
    with pytest.warns(UserWarning, match="below"):
        pfs_solve(disc.system, mat, cfg, 2, 1.0, guess)


def test_observed_rates_below_theoretical_bound(small_fig3):
    mp, disc = small_fig3
    mat = mp.material
    cfg = SplitConfig(L=mat.l_phy)
    guess = (disc.u0, disc.p0)
    _, rep = pfs_solve(disc.system, mat, cfg, 8, 1.0, guess)
    assert rep.converged
    bound = theoretical_rate(mat, mat.l_phy)
    assert len(rep.observed_rates) >= 1
    for i in range(2, 2 + len(rep.observed_rates)):
        assert observed_rate(rep, i) <= bound + 0.05


def test_fs_and_pfs_agree(small_fig3):
    mp, disc = small_fig3
    mat = mp.material
    cfg = SplitConfig(L=mat.l_phy)
    guess = (disc.u0, disc.p0)
    state_p, rep_p = pfs_solve(disc.system, mat, cfg, 8, 1.0, guess)
    state_f, rep_f = fs_solve(disc.system, mat, cfg, 8, 1.0, guess)
    assert rep_p.converged and rep_f.converged
    for n in range(1, 9):
        dp = np.linalg.norm(state_f.p[n] - state_p.p[n])
        assert dp <= 1e-6 * np.linalg.norm(state_f.p[n])


def test_worker_count_does_not_change_results(small_fig3):
    mp, disc = small_fig3
    mat = mp.material
    guess = (disc.u0, disc.p0)
    states = []
    for workers in (1, 4):
        cfg = SplitConfig(L=mat.l_phy, worker_count=workers)
        state, rep = pfs_solve(disc.system, mat, cfg, 4, 1.0, guess)
        assert rep.converged
        states.append(state)
    np.testing.assert_array_equal(states[0].u, states[1].u)
    np.testing.assert_array_equal(states[0].p, states[1].p)


def test_factorized_once_per_driver_run(small_fig3, monkeypatch):
    mp, disc = small_fig3
    mat = mp.material
    import biotsplit.splitting as splitting
    calls = []
    original = SpdSolver.__init__

    def counting(self, matrix, config=None):
        calls.append(matrix.shape)
        original(self, matrix, config)

    monkeypatch.setattr(splitting.SpdSolver, "__init__", counting)
    cfg = SplitConfig(L=mat.l_phy)
    guess = (disc.u0, disc.p0)
    pfs_solve(disc.system, mat, cfg, 4, 1.0, guess)
    assert len(calls) == 2  # one flow operator, one mechanics operator
    calls.clear()
    fs_solve(disc.system, mat, cfg, 4, 1.0, guess)
    assert len(calls) == 2


def test_nonconvergence_reported_not_raised(small_fig3):
    mp, disc = small_fig3
    mat = mp.material
    cfg = SplitConfig(L=mat.l_phy, max_iter=1)
    guess = (disc.u0, disc.p0)
    _, rep = pfs_solve(disc.system, mat, cfg, 4, 1.0, guess)
    assert not rep.converged and rep.iterations == 1
    _, rep_fs = fs_solve(disc.system, mat, cfg, 4, 1.0, guess)
    assert not rep_fs.converged
    assert rep_fs.failed_step == 1


def test_split_config_validation():
    with pytest.raises(ValueError):
        SplitConfig(L=-1.0)
    with pytest.raises(ValueError):
        SplitConfig(L=1.0, tol=0.0)
    with pytest.raises(ValueError):
        SplitConfig(L=1.0, max_iter=0)
    with pytest.raises(ValueError):
        SplitConfig(L=1.0, worker_count=0)
