# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled assembly and matvec kernels.

Mirror of biotsplit._kernels_py: same signatures, same triplet ordering, so
sparse matrices built from either backend are identical.
"""

import numpy as np

cimport cython
cimport numpy as cnp

from . import _reference as _ref

cnp.import_array()

BACKEND_KIND = "compiled"

_QW = np.ascontiguousarray(_ref.QUAD_WEIGHTS)
_P2G = np.ascontiguousarray(_ref.P2_GRADS)
_P1V = np.ascontiguousarray(_ref.P1_VALS)
_P1G = np.ascontiguousarray(_ref.P1_GRADS)
_P1M = np.ascontiguousarray(_ref.P1_MASS_REF)

ctypedef fused idx_t:
    cnp.int32_t
    cnp.int64_t


def elasticity_coo(const double[:, ::1] xy, const cnp.int64_t[:, ::1] tris,
                   const cnp.int64_t[:, ::1] tri_p2, double shear, double lam):
    cdef:
        Py_ssize_t ntri = tris.shape[0]
        Py_ssize_t t, q, k, l, a, b, i, j, base
        double[::1] qw = _QW
        double[:, :, ::1] p2g = _P2G
        double d1x, d1y, d2x, d2y, det
        double it00, it01, it10, it11
        double w, dot
        double g[6][2]
        double ke[12][12]
        cnp.int64_t dof[12]
        cnp.ndarray rows_arr = np.empty(ntri * 144, dtype=np.int32)
        cnp.ndarray cols_arr = np.empty(ntri * 144, dtype=np.int32)
        cnp.ndarray vals_arr = np.empty(ntri * 144, dtype=np.float64)
        cnp.int32_t[::1] rows = rows_arr
        cnp.int32_t[::1] cols = cols_arr
        double[::1] vals = vals_arr

    for t in range(ntri):
        d1x = xy[tris[t, 1], 0] - xy[tris[t, 0], 0]
        d1y = xy[tris[t, 1], 1] - xy[tris[t, 0], 1]
        d2x = xy[tris[t, 2], 0] - xy[tris[t, 0], 0]
        d2y = xy[tris[t, 2], 1] - xy[tris[t, 0], 1]
        det = d1x * d2y - d2x * d1y
        it00 = d2y / det
        it01 = -d1y / det
        it10 = -d2x / det
        it11 = d1x / det

        for i in range(12):
            for j in range(12):
                ke[i][j] = 0.0

        for q in range(6):
            w = qw[q] * det
            for k in range(6):
                g[k][0] = it00 * p2g[q, k, 0] + it01 * p2g[q, k, 1]
                g[k][1] = it10 * p2g[q, k, 0] + it11 * p2g[q, k, 1]
            for k in range(6):
                for l in range(6):
                    dot = g[k][0] * g[l][0] + g[k][1] * g[l][1]
                    for a in range(2):
                        for b in range(2):
                            ke[2 * k + a][2 * l + b] += w * (
                                shear * ((dot if a == b else 0.0)
                                         + g[k][b] * g[l][a])
                                + lam * g[k][a] * g[l][b])

        for k in range(6):
            dof[2 * k] = 2 * tri_p2[t, k]
            dof[2 * k + 1] = 2 * tri_p2[t, k] + 1
        base = t * 144
        for i in range(12):
            for j in range(12):
                rows[base + 12 * i + j] = <cnp.int32_t> dof[i]
                cols[base + 12 * i + j] = <cnp.int32_t> dof[j]
                vals[base + 12 * i + j] = ke[i][j]

    return rows_arr, cols_arr, vals_arr


def coupling_coo(const double[:, ::1] xy, const cnp.int64_t[:, ::1] tris,
                 const cnp.int64_t[:, ::1] tri_p2):
    cdef:
        Py_ssize_t ntri = tris.shape[0]
        Py_ssize_t t, q, k, i, j, base
        double[::1] qw = _QW
        double[:, :, ::1] p2g = _P2G
        double[:, ::1] p1v = _P1V
        double d1x, d1y, d2x, d2y, det
        double it00, it01, it10, it11
        double w, gx, gy
        double be[3][12]
        cnp.int64_t dof[12]
        cnp.ndarray rows_arr = np.empty(ntri * 36, dtype=np.int32)
        cnp.ndarray cols_arr = np.empty(ntri * 36, dtype=np.int32)
        cnp.ndarray vals_arr = np.empty(ntri * 36, dtype=np.float64)
        cnp.int32_t[::1] rows = rows_arr
        cnp.int32_t[::1] cols = cols_arr
        double[::1] vals = vals_arr

    for t in range(ntri):
        d1x = xy[tris[t, 1], 0] - xy[tris[t, 0], 0]
        d1y = xy[tris[t, 1], 1] - xy[tris[t, 0], 1]
        d2x = xy[tris[t, 2], 0] - xy[tris[t, 0], 0]
        d2y = xy[tris[t, 2], 1] - xy[tris[t, 0], 1]
        det = d1x * d2y - d2x * d1y
        it00 = d2y / det
        it01 = -d1y / det
        it10 = -d2x / det
        it11 = d1x / det

        for i in range(3):
            for j in range(12):
                be[i][j] = 0.0

        for q in range(6):
            w = qw[q] * det
            for k in range(6):
                gx = it00 * p2g[q, k, 0] + it01 * p2g[q, k, 1]
                gy = it10 * p2g[q, k, 0] + it11 * p2g[q, k, 1]
                for i in range(3):
                    be[i][2 * k] += w * p1v[q, i] * gx
                    be[i][2 * k + 1] += w * p1v[q, i] * gy

        for k in range(6):
            dof[2 * k] = 2 * tri_p2[t, k]
            dof[2 * k + 1] = 2 * tri_p2[t, k] + 1
        base = t * 36
        for i in range(3):
            for j in range(12):
                rows[base + 12 * i + j] = <cnp.int32_t> tris[t, i]
                cols[base + 12 * i + j] = <cnp.int32_t> dof[j]
                vals[base + 12 * i + j] = be[i][j]

    return rows_arr, cols_arr, vals_arr


def pressure_stiffness_coo(const double[:, ::1] xy, const cnp.int64_t[:, ::1] tris,
                           double coef):
    cdef:
        Py_ssize_t ntri = tris.shape[0]
        Py_ssize_t t, k, i, j, base
        double[:, ::1] p1g = _P1G
        double d1x, d1y, d2x, d2y, det
        double it00, it01, it10, it11
        double w
        double gp[3][2]
        cnp.ndarray rows_arr = np.empty(ntri * 9, dtype=np.int32)
        cnp.ndarray cols_arr = np.empty(ntri * 9, dtype=np.int32)
        cnp.ndarray vals_arr = np.empty(ntri * 9, dtype=np.float64)
        cnp.int32_t[::1] rows = rows_arr
        cnp.int32_t[::1] cols = cols_arr
        double[::1] vals = vals_arr

    for t in range(ntri):
        d1x = xy[tris[t, 1], 0] - xy[tris[t, 0], 0]
        d1y = xy[tris[t, 1], 1] - xy[tris[t, 0], 1]
        d2x = xy[tris[t, 2], 0] - xy[tris[t, 0], 0]
        d2y = xy[tris[t, 2], 1] - xy[tris[t, 0], 1]
        det = d1x * d2y - d2x * d1y
        it00 = d2y / det
        it01 = -d1y / det
        it10 = -d2x / det
        it11 = d1x / det
        w = 0.5 * coef * det

        for k in range(3):
            gp[k][0] = it00 * p1g[k, 0] + it01 * p1g[k, 1]
            gp[k][1] = it10 * p1g[k, 0] + it11 * p1g[k, 1]

        base = t * 9
        for i in range(3):
            for j in range(3):
                rows[base + 3 * i + j] = <cnp.int32_t> tris[t, i]
                cols[base + 3 * i + j] = <cnp.int32_t> tris[t, j]
                vals[base + 3 * i + j] = w * (gp[i][0] * gp[j][0]
                                              + gp[i][1] * gp[j][1])

    return rows_arr, cols_arr, vals_arr


def pressure_mass_coo(const double[:, ::1] xy, const cnp.int64_t[:, ::1] tris):
    cdef:
        Py_ssize_t ntri = tris.shape[0]
        Py_ssize_t t, i, j, base
        double[:, ::1] mref = _P1M
        double d1x, d1y, d2x, d2y, det
        cnp.ndarray rows_arr = np.empty(ntri * 9, dtype=np.int32)
        cnp.ndarray cols_arr = np.empty(ntri * 9, dtype=np.int32)
        cnp.ndarray vals_arr = np.empty(ntri * 9, dtype=np.float64)
        cnp.int32_t[::1] rows = rows_arr
        cnp.int32_t[::1] cols = cols_arr
        double[::1] vals = vals_arr

    for t in range(ntri):
        d1x = xy[tris[t, 1], 0] - xy[tris[t, 0], 0]
        d1y = xy[tris[t, 1], 1] - xy[tris[t, 0], 1]
        d2x = xy[tris[t, 2], 0] - xy[tris[t, 0], 0]
        d2y = xy[tris[t, 2], 1] - xy[tris[t, 0], 1]
        det = d1x * d2y - d2x * d1y
        base = t * 9
        for i in range(3):
            for j in range(3):
                rows[base + 3 * i + j] = <cnp.int32_t> tris[t, i]
                cols[base + 3 * i + j] = <cnp.int32_t> tris[t, j]
                vals[base + 3 * i + j] = det * mref[i, j]

    return rows_arr, cols_arr, vals_arr


def csr_matvec(const idx_t[::1] indptr, const idx_t[::1] indices,
               const double[::1] data, const double[::1] x):
    cdef:
        Py_ssize_t n = indptr.shape[0] - 1
        Py_ssize_t i, jj
        double acc
        cnp.ndarray out_arr = np.empty(n, dtype=np.float64)
        double[::1] out = out_arr

    for i in range(n):
        acc = 0.0
        for jj in range(indptr[i], indptr[i + 1]):
            acc += data[jj] * x[indices[jj]]
        out[i] = acc
    return out_arr
