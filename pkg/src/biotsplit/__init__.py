"""Fixed-stress splitting solvers for two-field Biot consolidation.

P2-P1 finite elements on structured triangulations, a classical sequential
fixed-stress split, a time-parallel variant iterating on the whole
space-time solution, and the Mandel benchmark with its analytic series
solution for validation.
"""

from .assembly import (BiotSystem, ConstrainedSystem, DofMap, FlowBC,
                       MaterialParams, MechBC, SideBC, apply_constraints,
                       assemble_coupling, assemble_elasticity,
                       assemble_pressure_mass, assemble_pressure_stiffness,
                       assemble_system, build_dof_map, p2_connectivity)
from .backend import available_backends, backend_name
from .linalg import SolverConfig, SolverFailure, SpdSolver, solve_spd, spmv
from .mandel import (MandelParams, ProblemDef, analytic_displacement,
                     analytic_pressure, discretize, find_series_roots,
                     initial_conditions, mandel_bcs, mandel_cryer_profile,
                     mandel_problem, preset, table_material)
from .mesh import BoundaryTag, Mesh, boundary_nodes, build_rect
from .splitting import (AlreadyConverged, IterationReport, SpaceTimeState,
                        SplitConfig, flow_sweep, fs_solve, mechanics_stage,
                        observed_rate, pfs_solve, theoretical_rate)

__all__ = [
    "AlreadyConverged", "BiotSystem", "BoundaryTag", "ConstrainedSystem",
    "DofMap", "FlowBC", "IterationReport", "MandelParams", "MaterialParams",
    "MechBC", "Mesh", "ProblemDef", "SideBC", "SolverConfig",
    "SolverFailure", "SpaceTimeState", "SpdSolver", "SplitConfig",
    "analytic_displacement", "analytic_pressure", "apply_constraints",
    "assemble_coupling", "assemble_elasticity", "assemble_pressure_mass",
    "assemble_pressure_stiffness", "assemble_system", "available_backends",
    "backend_name", "boundary_nodes", "build_dof_map", "build_rect",
    "discretize", "find_series_roots", "flow_sweep", "fs_solve",
    "initial_conditions", "mandel_bcs", "mandel_cryer_profile",
    "mandel_problem", "mechanics_stage", "observed_rate",
    "p2_connectivity", "pfs_solve", "preset", "solve_spd", "spmv",
    "theoretical_rate",
]

__version__ = "0.1.0"
