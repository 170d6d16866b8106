"""Reference-triangle tables shared by the compiled and numpy kernels.

Reference element: vertices (0,0), (1,0), (0,1); barycentric coordinates
(l0, l1, l2) = (1 - x - y, x, y).  Quadrature weights include the reference
measure, so they sum to 1/2.  The P2 local node order is the three vertices
followed by the midpoints of edges (0,1), (1,2), (2,0).
"""

from __future__ import annotations

import numpy as np

# Degree-4 symmetric rule, 6 points (two orbits of 3).
_RULE_DEG4 = [
    (0.108103018168070, 0.445948490915965, 0.223381589678011),
    (0.816847572980459, 0.091576213509771, 0.109951743655322),
]


def _expand_rule(rule):
    pts, wts = [], []
    for l0, rest, w in rule:
        for bary in ((l0, rest, rest), (rest, l0, rest), (rest, rest, l0)):
            pts.append((bary[1], bary[2]))
            wts.append(0.5 * w)
    return np.array(pts), np.array(wts)


QUAD_POINTS, QUAD_WEIGHTS = _expand_rule(_RULE_DEG4)


def _p2_values(l0, l1, l2):
    return np.stack(
        [
            l0 * (2.0 * l0 - 1.0),
            l1 * (2.0 * l1 - 1.0),
            l2 * (2.0 * l2 - 1.0),
            4.0 * l0 * l1,
            4.0 * l1 * l2,
            4.0 * l2 * l0,
        ],
        axis=-1,
    )


def _p2_grads(l0, l1, l2):
    # Gradients with respect to (x, y) on the reference element, using
    # grad l0 = (-1,-1), grad l1 = (1,0), grad l2 = (0,1).
    zero = np.zeros_like(l0)
    gx = np.stack(
        [
            -(4.0 * l0 - 1.0),
            4.0 * l1 - 1.0,
            zero,
            4.0 * (l0 - l1),
            4.0 * l2,
            -4.0 * l2,
        ],
        axis=-1,
    )
    gy = np.stack(
        [
            -(4.0 * l0 - 1.0),
            zero,
            4.0 * l2 - 1.0,
            -4.0 * l1,
            4.0 * l1,
            4.0 * (l0 - l2),
        ],
        axis=-1,
    )
    return np.stack([gx, gy], axis=-1)


_L1 = QUAD_POINTS[:, 0]
_L2 = QUAD_POINTS[:, 1]
_L0 = 1.0 - _L1 - _L2

P2_VALS = _p2_values(_L0, _L1, _L2)          # (6 qp, 6 basis)
P2_GRADS = _p2_grads(_L0, _L1, _L2)          # (6 qp, 6 basis, 2)
P1_VALS = np.stack([_L0, _L1, _L2], axis=-1)  # (6 qp, 3 basis)
P1_GRADS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])

# P1 mass matrix on the reference element (weights already include the 1/2).
P1_MASS_REF = np.einsum("q,qi,qj->ij", QUAD_WEIGHTS, P1_VALS, P1_VALS)
