"""Timing comparison of the compiled and pure-numpy assembly kernels.

Runs each kernel backend on the same mesh and reports per-call wall times
for the four element-matrix builders and the CSR matvec.  Usage:

    python3 benchmarks/kernel_benchmark.py [--nx N] [--repeats R]
"""

import argparse
import time

import numpy as np

from biotsplit import available_backends, build_rect
from biotsplit.assembly import p2_connectivity
from biotsplit import _kernels_py

try:
    from biotsplit import _kernels
except ImportError:
    _kernels = None


def _time_call(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def _bench_backend(kernels, mesh, info, repeats):
    nodes = mesh.nodes
    tris = mesh.triangles
    tri_p2 = info.tri_p2
    rows = {}
    rows["elasticity_coo"] = _time_call(
        kernels.elasticity_coo, (nodes, tris, tri_p2, 1.0, 1.0), repeats)
    rows["coupling_coo"] = _time_call(
        kernels.coupling_coo, (nodes, tris, tri_p2), repeats)
    rows["pressure_stiffness_coo"] = _time_call(
        kernels.pressure_stiffness_coo, (nodes, tris, 1.0), repeats)
    rows["pressure_mass_coo"] = _time_call(
        kernels.pressure_mass_coo, (nodes, tris), repeats)

    import scipy.sparse as sp
    r, c, v = kernels.pressure_stiffness_coo(nodes, tris, 1.0)
    mat = sp.coo_matrix((v, (r, c))).tocsr()
    mat.sort_indices()
    x = np.linspace(0.0, 1.0, mat.shape[1])
    rows["csr_matvec"] = _time_call(
        kernels.csr_matvec, (mat.indptr, mat.indices, mat.data, x), repeats)
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nx", type=int, default=160,
                    help="grid cells per side (default 160)")
    ap.add_argument("--repeats", type=int, default=5,
                    help="timing repeats, best taken (default 5)")
    args = ap.parse_args()

    mesh = build_rect(100.0, 10.0, args.nx, args.nx)
    info = p2_connectivity(mesh)
    print(f"mesh: {args.nx}x{args.nx} cells, {len(mesh.triangles)} triangles, "
          f"backends available: {', '.join(available_backends())}")

    numpy_rows = _bench_backend(_kernels_py, mesh, info, args.repeats)
    compiled_rows = None
    if _kernels is not None:
        compiled_rows = _bench_backend(_kernels, mesh, info, args.repeats)

    header = f"{'kernel':<24}{'numpy [ms]':>12}"
    if compiled_rows is not None:
        header += f"{'compiled [ms]':>15}{'speedup':>9}"
    print(header)
    for name, t_np in numpy_rows.items():
        line = f"{name:<24}{1e3 * t_np:>12.3f}"
        if compiled_rows is not None:
            t_c = compiled_rows[name]
            line += f"{1e3 * t_c:>15.3f}{t_np / t_c:>9.2f}"
        print(line)
    if compiled_rows is None:
        print("compiled backend not built; numpy timings only")


if __name__ == "__main__":
    main()
