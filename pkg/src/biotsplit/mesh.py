"""Structured triangulations of a rectangle.

Nodes are numbered row major, index j*(nx+1) + i for grid position (i, j).
Each grid cell is split along the diagonal from its lower-left to its
upper-right corner, producing two counterclockwise triangles.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class BoundaryTag(enum.IntEnum):
    """Sides of the rectangle [0, a] x [0, b]."""

    LEFT = 1
    BOTTOM = 2
    RIGHT = 3
    TOP = 4


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangulation of a rectangle.

    Attributes
    ----------
    nodes : ndarray, shape (n_nodes, 2)
        Vertex coordinates.
    triangles : ndarray, shape (n_tri, 3)
        Vertex indices, counterclockwise orientation.
    boundary_edges : dict
        Maps a sorted vertex pair (i, j) to its BoundaryTag.
    nx, ny : int
        Cells per direction of the generating grid.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: dict
    nx: int
    ny: int


def build_rect(a, b, nx, ny):
    """Triangulate [0, a] x [0, b] with an nx by ny grid of split cells.

    Parameters
    ----------
    a, b : float
        Positive side lengths.
    nx, ny : int
        Number of cells per direction, at least 1.

    Returns
    -------
    Mesh
    """
    if not (a > 0 and b > 0):
        raise ValueError(f"side lengths must be positive, got a={a}, b={b}")
    if nx != int(nx) or ny != int(ny) or nx < 1 or ny < 1:
        raise ValueError(f"cell counts must be positive integers, got "
                         f"nx={nx}, ny={ny}")
    nx, ny = int(nx), int(ny)

    xs = np.linspace(0.0, a, nx + 1)
    ys = np.linspace(0.0, b, ny + 1)
    gx, gy = np.meshgrid(xs, ys)
    nodes = np.column_stack([gx.ravel(), gy.ravel()])

    tris = np.empty((2 * nx * ny, 3), dtype=np.int64)
    cell = 0
    for j in range(ny):
        row0 = j * (nx + 1)
        for i in range(nx):
            n00 = row0 + i
            n10 = n00 + 1
            n01 = n00 + nx + 1
            n11 = n01 + 1
            tris[2 * cell] = (n00, n10, n11)
            tris[2 * cell + 1] = (n00, n11, n01)
            cell += 1

    edges = {}
    for i in range(nx):
        edges[(i, i + 1)] = BoundaryTag.BOTTOM
        top0 = ny * (nx + 1) + i
        edges[(top0, top0 + 1)] = BoundaryTag.TOP
    for j in range(ny):
        left0 = j * (nx + 1)
        edges[(left0, left0 + nx + 1)] = BoundaryTag.LEFT
        right0 = j * (nx + 1) + nx
        edges[(right0, right0 + nx + 1)] = BoundaryTag.RIGHT

    # Downstream caches key derived connectivity on mesh identity, so the
    # geometry arrays must not change after construction.
    nodes.flags.writeable = False
    tris.flags.writeable = False
    return Mesh(nodes=nodes, triangles=tris, boundary_edges=edges,
                nx=nx, ny=ny)


def boundary_nodes(mesh, tag):
    """Sorted vertex indices lying on the side with the given tag.

    Corner vertices belong to both adjacent sides.
    """
    found = set()
    for (i, j), t in mesh.boundary_edges.items():
        if t == tag:
            found.add(i)
            found.add(j)
    if not found:
        raise ValueError(f"no boundary edges tagged {tag!r}")
    return np.array(sorted(found), dtype=np.int64)
