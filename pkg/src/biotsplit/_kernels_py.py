"""Numpy implementations of the hot assembly and matvec kernels.

Fallback used when the compiled extension biotsplit._kernels is unavailable.
Signatures and triplet ordering match the compiled module exactly, so the two
backends are interchangeable and produce identical sparse matrices.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from . import _reference as ref

BACKEND_KIND = "numpy"


def _geometry(xy, tris):
    """Per-triangle inverse-transpose Jacobian and determinant.

    Parameters
    ----------
    xy : ndarray, shape (n_nodes, 2)
        Vertex coordinates.
    tris : ndarray, shape (n_tri, 3)
        Vertex indices, counterclockwise.

    Returns
    -------
    jinv_t : ndarray, shape (n_tri, 2, 2)
    det : ndarray, shape (n_tri,)
        Jacobian determinants (twice the signed area).
    """
    v0 = xy[tris[:, 0]]
    d1 = xy[tris[:, 1]] - v0
    d2 = xy[tris[:, 2]] - v0
    det = d1[:, 0] * d2[:, 1] - d2[:, 0] * d1[:, 1]
    jinv_t = np.empty((tris.shape[0], 2, 2))
    jinv_t[:, 0, 0] = d2[:, 1]
    jinv_t[:, 0, 1] = -d1[:, 1]
    jinv_t[:, 1, 0] = -d2[:, 0]
    jinv_t[:, 1, 1] = d1[:, 0]
    jinv_t /= det[:, None, None]
    return jinv_t, det


def _u_dofs(tri_p2):
    return (2 * tri_p2[:, :, None] + np.arange(2)).reshape(-1, 12)


def elasticity_coo(xy, tris, tri_p2, shear, lam):
    """COO triplets of the linear elasticity stiffness on P2 vectors.

    Entry (2k+a, 2l+b) of the element block is
    int_T shear*(delta_ab grad Nk . grad Nl + dNk/dx_b dNl/dx_a)
        + lam * dNk/dx_a dNl/dx_b.
    """
    jinv_t, det = _geometry(xy, tris)
    g = np.einsum("tij,qkj->tqki", jinv_t, ref.P2_GRADS)
    w = ref.QUAD_WEIGHTS
    s1 = np.einsum("q,tqki,tqli->tkl", w, g, g)
    s2 = np.einsum("q,tqka,tqlb->tkalb", w, g, g)
    ke = shear * np.einsum("tkl,ab->tkalb", s1, np.eye(2))
    ke += shear * s2.transpose(0, 1, 4, 3, 2)
    ke += lam * s2
    ke *= det[:, None, None, None, None]
    ke = ke.reshape(-1, 12, 12)
    dofs = _u_dofs(tri_p2)
    rows = np.repeat(dofs, 12, axis=1)
    cols = np.tile(dofs, (1, 12))
    return (
        rows.ravel().astype(np.int32),
        cols.ravel().astype(np.int32),
        ke.ravel(),
    )


def coupling_coo(xy, tris, tri_p2):
    """COO triplets of the coupling matrix (div u, q): P1 rows, P2 columns."""
    jinv_t, det = _geometry(xy, tris)
    g = np.einsum("tij,qkj->tqki", jinv_t, ref.P2_GRADS)
    be = np.einsum("q,qi,tqkd->tikd", ref.QUAD_WEIGHTS, ref.P1_VALS, g)
    be *= det[:, None, None, None]
    be = be.reshape(-1, 3, 12)
    udofs = _u_dofs(tri_p2)
    rows = np.repeat(tris, 12, axis=1)
    cols = np.tile(udofs, (1, 3))
    return (
        rows.ravel().astype(np.int32),
        cols.ravel().astype(np.int32),
        be.ravel(),
    )


def pressure_stiffness_coo(xy, tris, coef):
    """COO triplets of coef * (grad p, grad q) on P1."""
    jinv_t, det = _geometry(xy, tris)
    gp = np.einsum("tij,kj->tki", jinv_t, ref.P1_GRADS)
    ce = (0.5 * coef) * np.einsum("tki,tli->tkl", gp, gp) * det[:, None, None]
    rows = np.repeat(tris, 3, axis=1)
    cols = np.tile(tris, (1, 3))
    return (
        rows.ravel().astype(np.int32),
        cols.ravel().astype(np.int32),
        ce.ravel(),
    )


def pressure_mass_coo(xy, tris):
    """COO triplets of the P1 mass matrix (p, q)."""
    _, det = _geometry(xy, tris)
    me = ref.P1_MASS_REF[None] * det[:, None, None]
    rows = np.repeat(tris, 3, axis=1)
    cols = np.tile(tris, (1, 3))
    return (
        rows.ravel().astype(np.int32),
        cols.ravel().astype(np.int32),
        me.ravel(),
    )


def csr_matvec(indptr, indices, data, x):
    """y = A @ x for a CSR matrix given by its raw arrays."""
    n = indptr.shape[0] - 1
    mat = sp.csr_matrix((data, indices, indptr), shape=(n, x.shape[0]), copy=False)
    return mat @ x
