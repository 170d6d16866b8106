"""Finite element operators for two-field Biot poroelasticity.

Displacements use quadratic Lagrange elements (P2), pressure uses linear
ones (P1), a stable pairing.  The assembled blocks are

    A  : vector P2 elasticity, 2G (eps(u), eps(v)) + lam (div u, div v),
    Bc : P1 rows by P2 columns, (div u, q),
    C  : P1 diffusion, (kappa/mu_f) (grad p, grad q),
    Mp : P1 mass, (p, q).

Biot's alpha and the inverse storage 1/beta are not folded into the
matrices; time stepping code scales them explicitly.  Essential constraints
(zero normal displacement, zero boundary pressure, and a rigid plate that
ties all normal displacement dofs of one side together) are imposed
algebraically by apply_constraints.
"""

from __future__ import annotations

import enum
import weakref
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _reference as ref
from .backend import kernels
from .mesh import BoundaryTag


@dataclass(frozen=True)
class MaterialParams:
    """Isotropic poroelastic material.

    Parameters
    ----------
    E : float
        Young's modulus, Pa.
    nu : float
        Drained Poisson ratio, in (-1, 0.5).
    alpha : float
        Biot coupling coefficient, in [0, 1]; 0 decouples the fields.
    beta : float
        Biot modulus, Pa (its inverse is the storage coefficient).
    kappa : float
        Intrinsic permeability, m^2.
    mu_f : float
        Fluid viscosity, Pa s.
    g : tuple of float
        Body force density, N/m^3.

    Derived attributes (computed, not constructor arguments): shear modulus
    G, Lame parameter lam, drained plane bulk modulus k_drained, the
    stabilization scale l_phy = alpha^2 / (G + lam) with lower bound
    l_min = l_phy / 2, Skempton coefficient b_skempton, undrained Poisson
    ratio nu_u, and consolidation coefficient c_consol.
    """

    E: float
    nu: float
    alpha: float
    beta: float
    kappa: float
    mu_f: float
    g: tuple = (0.0, 0.0)

    G: float = field(init=False)
    lam: float = field(init=False)
    k_drained: float = field(init=False)
    l_phy: float = field(init=False)
    l_min: float = field(init=False)
    b_skempton: float = field(init=False)
    nu_u: float = field(init=False)
    c_consol: float = field(init=False)

    def __post_init__(self):
        if not self.E > 0:
            raise ValueError(f"E must be positive, got {self.E}")
        if not (-1.0 < self.nu < 0.5):
            raise ValueError(f"nu must lie in (-1, 0.5), got {self.nu}")
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not (self.kappa > 0 and self.mu_f > 0):
            raise ValueError(f"kappa and mu_f must be positive, got "
                             f"kappa={self.kappa}, mu_f={self.mu_f}")
        if len(self.g) != 2:
            raise ValueError(f"g must have two components, got {self.g!r}")
        object.__setattr__(self, "g", (float(self.g[0]), float(self.g[1])))

        shear = self.E / (2.0 * (1.0 + self.nu))
        lam = self.E * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))
        k3d = self.E / (3.0 * (1.0 - 2.0 * self.nu))
        b_skem = self.alpha * self.beta / (k3d + self.alpha ** 2 * self.beta)
        bterm = b_skem * (1.0 - 2.0 * self.nu)
        nu_u = (3.0 * self.nu + bterm) / (3.0 - bterm)
        storage = 1.0 / self.beta
        c_consol = (self.kappa / self.mu_f) / (
            storage + self.alpha ** 2 / (k3d + 4.0 * shear / 3.0))

        object.__setattr__(self, "G", shear)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "k_drained", lam + shear)
        object.__setattr__(self, "l_phy",
                           self.alpha ** 2 / (shear + lam))
        object.__setattr__(self, "l_min", 0.5 * self.l_phy)
        object.__setattr__(self, "b_skempton", b_skem)
        object.__setattr__(self, "nu_u", nu_u)
        object.__setattr__(self, "c_consol", c_consol)


class FlowBC(enum.Enum):
    """Flow condition on one side: impermeable or drained (p = 0)."""

    NO_FLUX = "no-flux"
    PRESSURE = "pressure"


class MechBC(enum.Enum):
    """Mechanical condition on one side.

    NORMAL_ZERO pins the normal displacement component (a roller),
    TRACTION_FREE imposes nothing, RIGID_PLATE ties the normal components
    of every node on the side to a single master dof.
    """

    NORMAL_ZERO = "normal-zero"
    TRACTION_FREE = "traction-free"
    RIGID_PLATE = "rigid-plate"


@dataclass(frozen=True)
class SideBC:
    """Pair of flow and mechanical conditions on one boundary side."""

    flow: FlowBC
    mech: MechBC


@dataclass(frozen=True, eq=False)
class P2Info:
    """Quadratic scalar space on a triangulation.

    Scalar nodes are the mesh vertices followed by edge midpoints; edges
    are numbered by lexicographic order of their sorted vertex pairs.
    """

    tri_p2: np.ndarray       # (n_tri, 6) scalar node ids per triangle
    coords: np.ndarray       # (n_scalar, 2)
    edges: np.ndarray        # (n_edges, 2) sorted vertex pairs
    n_vertices: int
    edge_ids: dict           # sorted vertex pair -> edge number


_P2_CACHE = weakref.WeakKeyDictionary()


def p2_connectivity(mesh):
    """P2 node numbering for a mesh, cached per mesh object."""
    info = _P2_CACHE.get(mesh)
    if info is not None:
        return info
    tris = mesh.triangles
    ev = np.stack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]], axis=1)
    ev = np.sort(ev.reshape(-1, 2), axis=1)
    edges, inverse = np.unique(ev, axis=0, return_inverse=True)
    nv = mesh.nodes.shape[0]
    tri_p2 = np.hstack([tris, nv + inverse.reshape(-1, 3)])
    coords = np.vstack([mesh.nodes, mesh.nodes[edges].mean(axis=1)])
    edge_ids = {(int(e[0]), int(e[1])): i for i, e in enumerate(edges)}
    info = P2Info(tri_p2=np.ascontiguousarray(tri_p2, dtype=np.int64),
                  coords=np.ascontiguousarray(coords, dtype=np.float64),
                  edges=edges, n_vertices=nv, edge_ids=edge_ids)
    _P2_CACHE[mesh] = info
    return info


def _checked_geometry(mesh):
    xy = np.ascontiguousarray(mesh.nodes, dtype=np.float64)
    tris = np.ascontiguousarray(mesh.triangles, dtype=np.int64)
    v0 = xy[tris[:, 0]]
    d1 = xy[tris[:, 1]] - v0
    d2 = xy[tris[:, 2]] - v0
    det = d1[:, 0] * d2[:, 1] - d2[:, 0] * d1[:, 1]
    bad = np.flatnonzero(det <= 0.0)
    if bad.size:
        raise ValueError(f"degenerate or inverted triangle {int(bad[0])}")
    return xy, tris


def _to_csr(rows, cols, vals, shape):
    mat = sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()
    mat.sort_indices()
    return mat


def assemble_elasticity(mesh, params):
    """Vector P2 elasticity stiffness 2G (eps(u), eps(v)) + lam (div, div).

    Returns
    -------
    scipy.sparse.csr_matrix
        Square, symmetric, of size twice the scalar P2 node count.  Rigid
        body modes are in its kernel until constraints are applied.
    """
    xy, tris = _checked_geometry(mesh)
    info = p2_connectivity(mesh)
    rows, cols, vals = kernels.elasticity_coo(xy, tris, info.tri_p2,
                                              params.G, params.lam)
    n = 2 * info.coords.shape[0]
    return _to_csr(rows, cols, vals, (n, n))


def assemble_coupling(mesh):
    """Coupling block (div u, q): one P1 row per vertex, P2 columns."""
    xy, tris = _checked_geometry(mesh)
    info = p2_connectivity(mesh)
    rows, cols, vals = kernels.coupling_coo(xy, tris, info.tri_p2)
    shape = (info.n_vertices, 2 * info.coords.shape[0])
    return _to_csr(rows, cols, vals, shape)


def assemble_pressure_stiffness(mesh, params):
    """P1 diffusion (kappa/mu_f) (grad p, grad q)."""
    xy, tris = _checked_geometry(mesh)
    coef = params.kappa / params.mu_f
    rows, cols, vals = kernels.pressure_stiffness_coo(xy, tris, coef)
    nv = mesh.nodes.shape[0]
    return _to_csr(rows, cols, vals, (nv, nv))


def assemble_pressure_mass(mesh):
    """P1 mass matrix (p, q)."""
    xy, tris = _checked_geometry(mesh)
    rows, cols, vals = kernels.pressure_mass_coo(xy, tris)
    nv = mesh.nodes.shape[0]
    return _to_csr(rows, cols, vals, (nv, nv))


def _assemble_body_force(mesh, params):
    """Load vector of the body force density against vector P2 bases."""
    info = p2_connectivity(mesh)
    n = 2 * info.coords.shape[0]
    gx, gy = params.g
    if gx == 0.0 and gy == 0.0:
        return np.zeros(n)
    xy, tris = _checked_geometry(mesh)
    v0 = xy[tris[:, 0]]
    d1 = xy[tris[:, 1]] - v0
    d2 = xy[tris[:, 2]] - v0
    det = d1[:, 0] * d2[:, 1] - d2[:, 0] * d1[:, 1]
    # int_T N_k dx per element and basis function
    base = np.einsum("q,qk->k", ref.QUAD_WEIGHTS, ref.P2_VALS)
    load = np.zeros(n)
    for comp, val in enumerate((gx, gy)):
        if val == 0.0:
            continue
        contrib = val * det[:, None] * base[None, :]
        np.add.at(load, 2 * info.tri_p2 + comp, contrib)
    return load


def _assemble_p1_source(mesh, func, t):
    """Load vector of a scalar source against P1 bases at one time."""
    xy, tris = _checked_geometry(mesh)
    v0 = xy[tris[:, 0]]
    d1 = xy[tris[:, 1]] - v0
    d2 = xy[tris[:, 2]] - v0
    det = d1[:, 0] * d2[:, 1] - d2[:, 0] * d1[:, 1]
    # physical quadrature points, shape (n_tri, n_qp, 2)
    pts = (v0[:, None, :]
           + d1[:, None, :] * ref.QUAD_POINTS[None, :, 0, None]
           + d2[:, None, :] * ref.QUAD_POINTS[None, :, 1, None])
    fvals = func(pts[:, :, 0], pts[:, :, 1], t)
    contrib = np.einsum("q,tq,qi->ti", ref.QUAD_WEIGHTS, fvals, ref.P1_VALS)
    contrib *= det[:, None]
    load = np.zeros(mesh.nodes.shape[0])
    np.add.at(load, tris, contrib)
    return load


@dataclass(frozen=True, eq=False)
class BiotSystem:
    """Assembled, unconstrained operators of one Biot problem.

    f_load maps a time to the assembled fluid source vector; it is None
    when the source is zero.
    """

    A: sp.csr_matrix
    Bc: sp.csr_matrix
    C: sp.csr_matrix
    Mp: sp.csr_matrix
    g_load: np.ndarray
    f_load: object = None


def assemble_system(mesh, params, f_source=None):
    """Assemble all Biot blocks and load vectors for one mesh.

    Parameters
    ----------
    mesh : Mesh
    params : MaterialParams
    f_source : callable, optional
        Fluid source density f(x, y, t); accepts arrays in x and y.

    Returns
    -------
    BiotSystem
    """
    f_load = None
    if f_source is not None:
        def f_load(t, _mesh=mesh, _f=f_source):
            return _assemble_p1_source(_mesh, _f, t)
    return BiotSystem(
        A=assemble_elasticity(mesh, params),
        Bc=assemble_coupling(mesh),
        C=assemble_pressure_stiffness(mesh, params),
        Mp=assemble_pressure_mass(mesh),
        g_load=_assemble_body_force(mesh, params),
        f_load=f_load,
    )


_NORMAL_COMPONENT = {
    BoundaryTag.LEFT: 0,
    BoundaryTag.RIGHT: 0,
    BoundaryTag.BOTTOM: 1,
    BoundaryTag.TOP: 1,
}


@dataclass(frozen=True, eq=False)
class DofMap:
    """Degree-of-freedom numbering and essential constraint sets.

    Displacement dof 2*s + c is component c of scalar P2 node s; pressure
    dof i is vertex i.  fixed_u and fixed_p are dofs pinned to zero.  The
    tie group (master plus slaves) shares a single unknown, the master.
    """

    n_displacement: int
    n_pressure: int
    u_dof: np.ndarray
    p_dof: np.ndarray
    coords: np.ndarray
    tri_p2: np.ndarray
    fixed_u: np.ndarray
    fixed_p: np.ndarray
    tie_master: int
    tie_slaves: np.ndarray

    def __post_init__(self):
        tied = set(self.tie_slaves.tolist())
        if self.tie_master >= 0:
            tied.add(self.tie_master)
        overlap = tied & set(self.fixed_u.tolist())
        if overlap:
            raise ValueError(f"displacement dof {min(overlap)} is both "
                             "Dirichlet-fixed and part of a tie group")


def build_dof_map(mesh, problem):
    """Number dofs and collect constraint sets for a boundary value problem.

    Parameters
    ----------
    mesh : Mesh
    problem : object
        Must expose a mapping problem.bcs from BoundaryTag to SideBC
        covering every tag present in the mesh.

    Returns
    -------
    DofMap
    """
    info = p2_connectivity(mesh)
    nv = info.n_vertices
    n_scalar = info.coords.shape[0]

    fixed_u = set()
    fixed_p = set()
    tie = set()
    for (va, vb), tag in mesh.boundary_edges.items():
        try:
            side = problem.bcs[tag]
        except KeyError:
            raise ValueError(f"no boundary condition given for side "
                             f"{BoundaryTag(tag).name}") from None
        mid = nv + info.edge_ids[(va, vb) if va < vb else (vb, va)]
        scalar_nodes = (va, vb, mid)
        comp = _NORMAL_COMPONENT[BoundaryTag(tag)]
        if side.mech is MechBC.NORMAL_ZERO:
            fixed_u.update(2 * s + comp for s in scalar_nodes)
        elif side.mech is MechBC.RIGID_PLATE:
            tie.update(2 * s + comp for s in scalar_nodes)
        if side.flow is FlowBC.PRESSURE:
            fixed_p.update((va, vb))

    if tie:
        master = min(tie)
        slaves = np.array(sorted(tie - {master}), dtype=np.int64)
    else:
        master = -1
        slaves = np.array([], dtype=np.int64)

    u_dof = np.arange(2 * n_scalar, dtype=np.int64).reshape(-1, 2)
    return DofMap(
        n_displacement=2 * n_scalar,
        n_pressure=nv,
        u_dof=u_dof,
        p_dof=np.arange(nv, dtype=np.int64),
        coords=info.coords,
        tri_p2=info.tri_p2,
        fixed_u=np.array(sorted(fixed_u), dtype=np.int64),
        fixed_p=np.array(sorted(fixed_p), dtype=np.int64),
        tie_master=master,
        tie_slaves=slaves,
    )


@dataclass(frozen=True, eq=False)
class ConstrainedSystem:
    """Biot operators with essential constraints folded in.

    A_c is the elasticity block after tying the plate dofs and eliminating
    Dirichlet rows and columns symmetrically (eliminated diagonal entries
    are set to one, so the block stays SPD).  g_c is the matching constant
    mechanics load, including the plate force on the master dof.  Flow
    operators are constrained on demand because they depend on the time
    step and the stabilization parameter.
    """

    base: BiotSystem
    dofmap: DofMap
    plate_force: float
    A_c: sp.csr_matrix
    g_c: np.ndarray
    bct: sp.csr_matrix
    _q: sp.csr_matrix
    _qt: sp.csr_matrix

    def constrain_mech_rhs(self, rhs):
        """Fold a raw displacement-space rhs onto the constrained dofs."""
        out = self._qt @ rhs
        out[self.dofmap.fixed_u] = 0.0
        return out

    def recover_u(self, x):
        """Expand a constrained solution: slaves copy the master value."""
        return self._q @ x

    def constrain_flow_matrix(self, mat):
        """Eliminate fixed pressure dofs symmetrically, unit diagonal."""
        free = np.ones(self.dofmap.n_pressure)
        free[self.dofmap.fixed_p] = 0.0
        proj = sp.diags(free)
        out = (proj @ mat @ proj + sp.diags(1.0 - free)).tocsr()
        out.sort_indices()
        return out

    def constrain_flow_rhs(self, rhs):
        out = rhs.copy()
        out[self.dofmap.fixed_p] = 0.0
        return out


def apply_constraints(system, dofmap, plate_force=0.0):
    """Impose ties and Dirichlet conditions on an assembled system.

    Parameters
    ----------
    system : BiotSystem
    dofmap : DofMap
    plate_force : float
        Total downward load carried by the rigid plate; applied as the
        generalized force -plate_force on the tie master dof.

    Returns
    -------
    ConstrainedSystem
    """
    if plate_force != 0.0 and dofmap.tie_master < 0:
        raise ValueError("plate_force given but the problem has no tie "
                         "group to carry it")
    n_u = dofmap.n_displacement

    diag = np.ones(n_u)
    diag[dofmap.tie_slaves] = 0.0
    q = sp.coo_matrix(
        (np.concatenate([diag[diag > 0],
                         np.ones(dofmap.tie_slaves.size)]),
         (np.concatenate([np.flatnonzero(diag),
                          dofmap.tie_slaves]),
          np.concatenate([np.flatnonzero(diag),
                          np.full(dofmap.tie_slaves.size, dofmap.tie_master,
                                  dtype=np.int64)]))),
        shape=(n_u, n_u)).tocsr()
    qt = q.T.tocsr()

    free = np.ones(n_u)
    free[dofmap.fixed_u] = 0.0
    removed = 1.0 - free
    removed[dofmap.tie_slaves] = 1.0
    proj = sp.diags(free)
    a_c = (proj @ (qt @ system.A @ q) @ proj + sp.diags(removed)).tocsr()
    a_c.sort_indices()

    g_raw = system.g_load.copy()
    if dofmap.tie_master >= 0:
        g_raw[dofmap.tie_master] -= plate_force
    g_c = qt @ g_raw
    g_c[dofmap.fixed_u] = 0.0

    return ConstrainedSystem(
        base=system,
        dofmap=dofmap,
        plate_force=plate_force,
        A_c=a_c,
        g_c=g_c,
        bct=system.Bc.T.tocsr(),
        _q=q,
        _qt=qt,
    )
