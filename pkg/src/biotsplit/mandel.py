"""Mandel's problem: setup, analytic series solution, and probes.

A poroelastic slab occupies [-a, a] x [-b, b] between rigid, frictionless,
impermeable plates pressed together by a constant force.  By symmetry only
the quarter [0, a] x [0, b] is computed: rollers and no-flux conditions on
the symmetry planes x = 0 and y = 0, a drained traction-free right edge,
and a rigid impermeable plate on top carrying the total load F (force per
unit out-of-plane thickness for the quarter domain).

The pressure first rises above its initial value near the center before
consolidation drains it (the Mandel-Cryer effect), which makes the problem
a standard benchmark for Biot solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .assembly import (FlowBC, MaterialParams, MechBC, SideBC,
                       apply_constraints, assemble_system, build_dof_map)
from .mesh import BoundaryTag, build_rect

DARCY = 9.869233e-13          # m^2
CENTIPOISE = 1.0e-3           # Pa s

# Reference slab: a 100 m by 10 m quarter domain loaded by 6.8e8 N/m.
BENCH_A = 100.0
BENCH_B = 10.0
BENCH_FORCE = 6.8e8

# Drained Poisson ratios of the named parameter sets.  "fig3" is the
# mildly coupled case used for validation against the analytic solution;
# the nu sweep probes the nearly incompressible regime.
PRESET_NU = {
    "fig3": 0.2,
    "nu0.4": 0.4,
    "nu0.49": 0.49,
    "nu0.499": 0.499,
    "nu0.4999": 0.4999,
    "nu0.49999": 0.49999,
}


def table_material(nu, alpha=1.0):
    """Reference material with the given drained Poisson ratio."""
    return MaterialParams(
        E=5.94e9,
        nu=nu,
        alpha=alpha,
        beta=1.65e10,
        kappa=100.0 * DARCY,
        mu_f=10.0 * CENTIPOISE,
    )


@dataclass(frozen=True)
class MandelParams:
    """Geometry, load, material, and series controls for one setup.

    Attributes
    ----------
    a, b : float
        Quarter-domain half-width and half-height, m.
    force : float
        Total quarter-domain plate load F, N per meter of thickness.
    material : MaterialParams
    series_terms : int
        Number of series roots used by the analytic formulas.
    root_tol : float
        Bisection interval width for the series roots, at most 1e-12.
    """

    a: float
    b: float
    force: float
    material: MaterialParams
    series_terms: int = 200
    root_tol: float = 1e-14

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.force > 0):
            raise ValueError(f"a, b, force must be positive, got "
                             f"a={self.a}, b={self.b}, force={self.force}")
        if self.series_terms < 1:
            raise ValueError(f"series_terms must be at least 1, got "
                             f"{self.series_terms}")
        if not (0 < self.root_tol <= 1e-12):
            raise ValueError(f"root_tol must lie in (0, 1e-12], got "
                             f"{self.root_tol}")


def preset(name):
    """Named benchmark setup on the reference slab."""
    try:
        nu = PRESET_NU[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; expected one of "
                         f"{sorted(PRESET_NU)}") from None
    return MandelParams(a=BENCH_A, b=BENCH_B, force=BENCH_FORCE,
                        material=table_material(nu))


def mandel_bcs():
    """Boundary condition table of the quarter-domain problem."""
    return {
        BoundaryTag.LEFT: SideBC(FlowBC.NO_FLUX, MechBC.NORMAL_ZERO),
        BoundaryTag.BOTTOM: SideBC(FlowBC.NO_FLUX, MechBC.NORMAL_ZERO),
        BoundaryTag.RIGHT: SideBC(FlowBC.PRESSURE, MechBC.TRACTION_FREE),
        BoundaryTag.TOP: SideBC(FlowBC.NO_FLUX, MechBC.RIGID_PLATE),
    }


@dataclass(frozen=True)
class ProblemDef:
    """Boundary value problem description consumed by build_dof_map."""

    a: float
    b: float
    bcs: dict
    p_initial: float
    u_initial: object
    plate_force: float
    f_source: object = None


def initial_conditions(mp):
    """Undrained instantaneous response to the plate load.

    Returns
    -------
    p0 : float
        Uniform initial pressure F B (1 + nu_u) / (3 a).
    u0 : callable
        Vectorized map (x, y) -> (u_x, u_y) of the initial displacement,
        u_x = F nu_u x / (2 G a), u_y = -F (1 - nu_u) y / (2 G a).
    """
    m = mp.material
    p0 = mp.force * m.b_skempton * (1.0 + m.nu_u) / (3.0 * mp.a)
    cx = mp.force * m.nu_u / (2.0 * m.G * mp.a)
    cy = -mp.force * (1.0 - m.nu_u) / (2.0 * m.G * mp.a)

    def u0(x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        return cx * x, cy * y

    return p0, u0


def mandel_problem(mp):
    """ProblemDef of the quarter-domain consolidation run."""
    p0, u0 = initial_conditions(mp)
    return ProblemDef(a=mp.a, b=mp.b, bcs=mandel_bcs(), p_initial=p0,
                      u_initial=u0, plate_force=mp.force)


def find_series_roots(ratio, count, root_tol=1e-14):
    """First `count` positive roots of tan(x) = ratio * x, ratio > 1.

    Root n lies in (n pi, n pi + pi/2); each is found by bracketed
    bisection down to an interval of width root_tol (or one ulp).

    Raises
    ------
    ValueError
        If ratio <= 1 or a bracket cannot be established.
    """
    if not ratio > 1.0:
        raise ValueError(f"ratio must exceed 1, got {ratio}")
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")

    def f(x):
        return math.tan(x) - ratio * x

    roots = np.empty(count)
    for n in range(count):
        lo = n * math.pi
        asym = lo + 0.5 * math.pi
        # Nudge off the endpoints: f < 0 just above n pi, f > 0 just
        # below the asymptote where tan blows up.
        lo = lo + min(1e-9, 0.25 * (asym - lo))
        hi = asym - min(1e-9, 0.1 / (ratio * asym))
        tries = 0
        while f(hi) <= 0.0:
            hi = math.nextafter(asym, lo) if hi >= asym else \
                hi + 0.5 * (asym - hi)
            tries += 1
            if tries > 80:
                raise ValueError(f"bracket failure for root {n}")
        if f(lo) >= 0.0:
            raise ValueError(f"bracket failure for root {n}")
        while hi - lo > root_tol:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if f(mid) < 0.0:
                lo = mid
            else:
                hi = mid
        roots[n] = 0.5 * (lo + hi)
    return roots


@lru_cache(maxsize=64)
def _cached_roots(ratio, count, root_tol):
    return find_series_roots(ratio, count, root_tol)


def _roots(mp):
    m = mp.material
    # Tolerance guard: at alpha = 0 the computed nu_u can land one ulp
    # above nu, which would send the root finder a near-infinite ratio.
    if m.nu_u - m.nu <= 1e-12 * (1.0 - m.nu):
        raise ValueError("analytic solution requires coupling, "
                         "nu_u > nu (alpha > 0)")
    ratio = (1.0 - m.nu) / (m.nu_u - m.nu)
    return _cached_roots(ratio, mp.series_terms, mp.root_tol)


def analytic_pressure(x, t, mp):
    """Series pressure p(x, t); vectorized over x, scalar in t."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    m = mp.material
    r = _roots(mp)
    x_arr = np.asarray(x, dtype=np.float64)
    decay = np.exp(-(r * r) * m.c_consol * t / (mp.a * mp.a))
    den = r - np.sin(r) * np.cos(r)
    coef = (np.sin(r) / den) * decay
    terms = coef[:, None] * (np.cos(np.outer(r, x_arr.ravel() / mp.a))
                             - np.cos(r)[:, None])
    scale = 2.0 * mp.force * m.b_skempton * (1.0 + m.nu_u) / (3.0 * mp.a)
    out = scale * terms.sum(axis=0)
    out = out.reshape(x_arr.shape)
    return float(out) if np.isscalar(x) or x_arr.ndim == 0 else out


def analytic_displacement(x, y, t, mp):
    """Series displacement (u_x(x, t), u_y(y, t)); vectorized over x, y."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    m = mp.material
    r = _roots(mp)
    x_arr = np.asarray(x, dtype=np.float64)
    y_arr = np.asarray(y, dtype=np.float64)
    decay = np.exp(-(r * r) * m.c_consol * t / (mp.a * mp.a))
    den = r - np.sin(r) * np.cos(r)
    s1 = float(np.sum(np.sin(r) * np.cos(r) / den * decay))
    s2 = ((np.cos(r) / den * decay)
          @ np.sin(np.outer(r, x_arr.ravel() / mp.a))).reshape(x_arr.shape)
    f, g_mod, a = mp.force, m.G, mp.a
    ux = (f * m.nu / (2.0 * g_mod * a)) * x_arr \
        - (f * m.nu_u / (g_mod * a)) * s1 * x_arr + (f / g_mod) * s2
    uy = (-f * (1.0 - m.nu) / (2.0 * g_mod * a)) * y_arr \
        + (f * (1.0 - m.nu_u) / (g_mod * a)) * s1 * y_arr
    if np.isscalar(x) or x_arr.ndim == 0:
        ux = float(ux)
    if np.isscalar(y) or y_arr.ndim == 0:
        uy = float(uy)
    return ux, uy


def mandel_cryer_profile(state, probe_x, mesh):
    """Pressure history at a point on the bottom symmetry line.

    Parameters
    ----------
    state : SpaceTimeState
    probe_x : float
        Position in [0, a] along y = 0.
    mesh : Mesh
        The mesh the state was computed on.

    Returns
    -------
    ndarray, shape (n_steps + 1,)
        Linearly interpolated pressure at the probe for every time level.
    """
    xs = mesh.nodes[:mesh.nx + 1, 0]
    if not (xs[0] <= probe_x <= xs[-1]):
        raise ValueError(f"probe_x={probe_x} outside [0, {xs[-1]}]")
    bottom = state.p[:, :mesh.nx + 1]
    return np.array([np.interp(probe_x, xs, row) for row in bottom])


@dataclass(frozen=True, eq=False)
class MandelDiscretization:
    """Assembled quarter-domain problem ready for the splitting solvers."""

    mp: MandelParams
    mesh: object
    dofmap: object
    system: object              # ConstrainedSystem
    u0: np.ndarray
    p0: np.ndarray


def discretize(mp, nx, ny):
    """Mesh, constrain, and interpolate the initial state.

    Returns
    -------
    MandelDiscretization
        system is the constrained operator set; u0, p0 are the nodal
        interpolants of the undrained initial condition.
    """
    mesh = build_rect(mp.a, mp.b, nx, ny)
    problem = mandel_problem(mp)
    dofmap = build_dof_map(mesh, problem)
    raw = assemble_system(mesh, mp.material, f_source=problem.f_source)
    system = apply_constraints(raw, dofmap, plate_force=problem.plate_force)

    p0_val, u0_fun = initial_conditions(mp)
    p0 = np.full(dofmap.n_pressure, p0_val)
    ux, uy = u0_fun(dofmap.coords[:, 0], dofmap.coords[:, 1])
    u0 = np.empty(dofmap.n_displacement)
    u0[0::2] = ux
    u0[1::2] = uy
    return MandelDiscretization(mp=mp, mesh=mesh, dofmap=dofmap,
                                system=system, u0=u0, p0=p0)
