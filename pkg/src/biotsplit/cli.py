"""Command line front end for the consolidation benchmark runs.

Subcommands: run (one splitting run with CSV outputs), l-sweep (iteration
counts over a grid of stabilization parameters), refine-table (iteration
counts under time step and mesh refinement), bench (stage wall times per
worker count), analytic (series solution profiles).

Configuration files are flat key=value text; # starts a comment and
[section] headers are allowed but ignored (all keys share one namespace).
Floats in the CSV outputs carry 17 significant digits, and any output that
does not record wall times is byte reproducible across reruns.
"""

from __future__ import annotations

import argparse
import configparser
import re
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .backend import backend_name
from .linalg import SolverConfig
from .mandel import (PRESET_NU, BENCH_A, BENCH_B, BENCH_FORCE, MandelParams,
                     analytic_displacement, analytic_pressure, discretize,
                     mandel_cryer_profile, table_material)
from .splitting import SplitConfig, fs_solve, pfs_solve, theoretical_rate

PROBE_FRACTIONS = (0.0, 0.25, 0.5, 0.75)
DEFAULT_L_FACTORS = (0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0)
DEFAULT_TAU_LIST = (1.0, 0.5, 0.25, 0.125)
DEFAULT_H_LIST = (0.5, 0.25, 0.125, 0.0625)
DEFAULT_WORKER_COUNTS = (1, 2, 4)
DEFAULT_ANALYTIC_TIMES = (1.0, 5.0, 10.0, 20.0, 30.0)


class ConfigError(ValueError):
    """Invalid configuration file or option value."""


def _fmt(value):
    return f"{value:.16e}"


def load_config(path):
    """Parse a flat key=value file into a string mapping.

    Section headers are accepted and flattened away; parse errors carry
    the line numbers of the original file.
    """
    text = Path(path).read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",),
                                       interpolation=None)
    parser.optionxform = str
    try:
        # The dummy header lets headerless files parse; error line
        # numbers are shifted back to match the file.
        parser.read_string("[__root__]\n" + text, source=str(path))
    except configparser.Error as exc:
        msg = re.sub(r"line\s+(\d+)",
                     lambda m: f"line {int(m.group(1)) - 1}", str(exc))
        raise ConfigError(f"cannot parse {path}: {msg}") from None
    flat = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            flat[key] = value.strip()
    return flat


_INT_KEYS = {"nx", "ny", "workers", "max_iter", "series_terms"}
_FLOAT_KEYS = {"nu", "alpha", "a", "b", "force", "tau", "T", "tol"}
_STR_KEYS = {"preset", "method", "solver", "L", "out"}
_KEY_TO_FIELD = {"T": "t_end", "L": "stab_l"}


@dataclass
class RunConfig:
    """Resolved options of one benchmark invocation.

    stab_l is the stabilization choice: "phys", "min", or a float literal.
    nu and alpha, when set, override the preset material.
    """

    preset: str = "fig3"
    nu: float = None
    alpha: float = None
    a: float = BENCH_A
    b: float = BENCH_B
    force: float = BENCH_FORCE
    nx: int = 40
    ny: int = 40
    tau: float = 1.0
    t_end: float = 32.0
    method: str = "pfs"
    solver: str = "direct-cholesky"
    stab_l: str = "phys"
    workers: int = 1
    out: str = "out"
    max_iter: int = 500
    tol: float = 1e-8
    series_terms: int = 200

    @classmethod
    def from_mapping(cls, mapping):
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, raw in mapping.items():
            name = _KEY_TO_FIELD.get(key, key)
            if name not in known:
                raise ConfigError(f"unknown configuration key {key!r}")
            if key in _INT_KEYS:
                try:
                    kwargs[name] = int(raw)
                except ValueError:
                    raise ConfigError(f"{key} must be an integer, got "
                                      f"{raw!r}") from None
            elif key in _FLOAT_KEYS:
                try:
                    kwargs[name] = float(raw)
                except ValueError:
                    raise ConfigError(f"{key} must be a number, got "
                                      f"{raw!r}") from None
            else:
                kwargs[name] = str(raw)
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def validate(self):
        if self.preset not in PRESET_NU:
            raise ConfigError(f"unknown preset {self.preset!r}; expected "
                              f"one of {sorted(PRESET_NU)}")
        if self.method not in ("fs", "pfs"):
            raise ConfigError(f"method must be fs or pfs, got "
                              f"{self.method!r}")
        if self.solver not in ("direct-cholesky", "cg-jacobi"):
            raise ConfigError(f"solver must be direct-cholesky or "
                              f"cg-jacobi, got {self.solver!r}")
        if self.nx < 1 or self.ny < 1:
            raise ConfigError(f"nx and ny must be positive, got "
                              f"nx={self.nx}, ny={self.ny}")
        if self.tau <= 0 or self.t_end <= 0:
            raise ConfigError(f"tau and T must be positive, got "
                              f"tau={self.tau}, T={self.t_end}")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got "
                              f"{self.workers}")
        self.n_steps()
        self.resolve_l(self.material())

    def n_steps(self):
        ratio = self.t_end / self.tau
        n = round(ratio)
        if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, ratio):
            raise ConfigError(f"T={self.t_end} is not an integer multiple "
                              f"of tau={self.tau}")
        return int(n)

    def material(self):
        nu = self.nu if self.nu is not None else PRESET_NU[self.preset]
        alpha = self.alpha if self.alpha is not None else 1.0
        try:
            return table_material(nu, alpha)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def mandel_params(self):
        return MandelParams(a=self.a, b=self.b, force=self.force,
                            material=self.material(),
                            series_terms=self.series_terms)

    def resolve_l(self, material):
        if self.stab_l == "phys":
            return material.l_phy
        if self.stab_l == "min":
            return material.l_min
        try:
            value = float(self.stab_l)
        except ValueError:
            raise ConfigError(f"L must be 'phys', 'min', or a number, got "
                              f"{self.stab_l!r}") from None
        if value < 0:
            raise ConfigError(f"L must be nonnegative, got {value}")
        return value

    def split_config(self, L, workers=None):
        return SplitConfig(L=L, tol=self.tol, max_iter=self.max_iter,
                           worker_count=self.workers
                           if workers is None else workers)

    def solver_config(self):
        return SolverConfig(method=self.solver)


def _solve(config, disc, method, L, workers=None):
    driver = pfs_solve if method == "pfs" else fs_solve
    return driver(disc.system, disc.mp.material, config.split_config(L, workers),
                  config.n_steps(), config.tau, (disc.u0, disc.p0),
                  solver_config=config.solver_config())


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def _iteration_metric(report):
    """Comparable work measure: global sweeps (pfs) or mean per step (fs)."""
    if report.method == "pfs":
        return float(report.iterations)
    return float(report.mean_step_iterations)


def run(config):
    """One splitting run; writes solution, iteration, and timing CSVs.

    Returns
    -------
    (SpaceTimeState, IterationReport, dict)
        The dict maps output names to their paths.
    """
    mp = config.mandel_params()
    disc = discretize(mp, config.nx, config.ny)
    material = mp.material
    L = config.resolve_l(material)
    state, report = _solve(config, disc, config.method, L)

    outdir = Path(config.out)
    outdir.mkdir(parents=True, exist_ok=True)
    n_steps = config.n_steps()
    times = np.arange(n_steps + 1) * config.tau

    probes = [frac * mp.a for frac in PROBE_FRACTIONS]
    profiles = [mandel_cryer_profile(state, px, disc.mesh) for px in probes]
    plate = state.u[:, disc.dofmap.tie_master]

    header = ["t", "plate_uy"] + [f"p_frac{frac:.2f}"
                                  for frac in PROBE_FRACTIONS]
    rows = []
    for n in range(n_steps + 1):
        row = [_fmt(times[n]), _fmt(plate[n])]
        row.extend(_fmt(prof[n]) for prof in profiles)
        rows.append(row)
    _write_csv(outdir / "solution.csv", header, rows)

    rate_bound = theoretical_rate(material, L)
    if report.method == "pfs":
        header = ["iteration", "increment_sq_sum", "observed_rate",
                  "theoretical_rate", "criterion"]
        rows = []
        for i in range(report.iterations):
            observed = (_fmt(report.observed_rates[i - 1])
                        if i >= 1 and i - 1 < len(report.observed_rates)
                        else "")
            rows.append([str(i + 1), _fmt(report.increment_sq_sums[i]),
                         observed, _fmt(rate_bound),
                         _fmt(report.crit_values[i])])
    else:
        header = ["step", "iterations", "final_criterion"]
        rows = [[str(n + 1), str(count), _fmt(report.crit_values[n])]
                for n, count in enumerate(report.per_step_iterations)]
    _write_csv(outdir / "iterations.csv", header, rows)

    header = ["index", "flow_time", "mech_time"]
    rows = [[str(i + 1), _fmt(ft), _fmt(mt)]
            for i, (ft, mt) in enumerate(zip(report.flow_times,
                                             report.mech_times))]
    _write_csv(outdir / "timings.csv", header, rows)

    summary = {
        "method": config.method,
        "preset": config.preset,
        "nu": _fmt(material.nu),
        "alpha": _fmt(material.alpha),
        "L": _fmt(L),
        "l_phy": _fmt(material.l_phy),
        "l_min": _fmt(material.l_min),
        "theoretical_rate": _fmt(rate_bound),
        "iterations": str(report.iterations),
        "mean_step_iterations":
            "" if report.mean_step_iterations is None
            else _fmt(report.mean_step_iterations),
        "converged": str(report.converged).lower(),
        "n_steps": str(n_steps),
        "tau": _fmt(config.tau),
        "nx": str(config.nx),
        "ny": str(config.ny),
        "workers": str(config.workers),
        "solver": config.solver,
        "backend": backend_name,
        "p0": _fmt(disc.p0[0]),
        "plate_uy_final": _fmt(plate[-1]),
    }
    (outdir / "summary.txt").write_text(
        "".join(f"{k}={v}\n" for k, v in summary.items()))

    paths = {name: outdir / f"{name}.csv"
             for name in ("solution", "iterations", "timings")}
    paths["summary"] = outdir / "summary.txt"
    return state, report, paths


def l_sweep(config, grid=None):
    """Iteration counts of both methods over a stabilization grid.

    Parameters
    ----------
    grid : sequence of float, optional
        Stabilization values; defaults to l_phy times DEFAULT_L_FACTORS.

    Returns
    -------
    list of dict
        One row per (method, L) with the iteration metric and a
        convergence flag.  Also written to l_sweep.csv.
    """
    mp = config.mandel_params()
    material = mp.material
    if grid is None:
        grid = [factor * material.l_phy for factor in DEFAULT_L_FACTORS]
    disc = discretize(mp, config.nx, config.ny)

    rows = []
    for method in ("fs", "pfs"):
        for L in grid:
            _, report = _solve(config, disc, method, L)
            rows.append({
                "method": method,
                "L": float(L),
                "iterations": _iteration_metric(report),
                "converged": report.converged,
            })

    outdir = Path(config.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_csv(outdir / "l_sweep.csv",
               ["method", "L", "iterations", "converged"],
               [[r["method"], _fmt(r["L"]), _fmt(r["iterations"]),
                 str(r["converged"]).lower()] for r in rows])
    return rows


def refinement_table(config, tau_list=None, h_list=None):
    """Iteration counts under time step and mesh refinement.

    The first block fixes the mesh (the benchmark h = 0.25 grid) and
    sweeps the time step on the most incompressible preset; the second
    fixes the time step and refines the mesh (element height h, aspect
    ratio preserved) on the next one.

    Returns
    -------
    list of dict
        Rows with block, refinement value, and iteration metrics of both
        methods.  Also written to refine_table.csv.
    """
    tau_list = list(tau_list) if tau_list is not None \
        else list(DEFAULT_TAU_LIST)
    h_list = list(h_list) if h_list is not None else list(DEFAULT_H_LIST)

    rows = []

    tau_block_n = round(BENCH_B / 0.25)
    tau_cfg = replace(config, preset="nu0.49999", nu=None,
                      nx=tau_block_n, ny=tau_block_n)
    mp = tau_cfg.mandel_params()
    disc = discretize(mp, tau_cfg.nx, tau_cfg.ny)
    L = tau_cfg.resolve_l(mp.material)
    for tau in tau_list:
        cfg = replace(tau_cfg, tau=tau)
        cfg.n_steps()
        _, rep_pfs = _solve(cfg, disc, "pfs", L)
        _, rep_fs = _solve(cfg, disc, "fs", L)
        rows.append({
            "block": "tau", "value": float(tau),
            "pfs_iterations": float(rep_pfs.iterations),
            "fs_mean": float(rep_fs.mean_step_iterations),
            "converged": rep_pfs.converged and rep_fs.converged,
        })

    h_cfg = replace(config, preset="nu0.499", nu=None)
    for h in h_list:
        n = round(h_cfg.b / h)
        if n < 1 or abs(h_cfg.b / h - n) > 1e-9:
            raise ConfigError(f"element height {h} does not divide "
                              f"b={h_cfg.b}")
        cfg = replace(h_cfg, nx=int(n), ny=int(n))
        mp = cfg.mandel_params()
        disc = discretize(mp, cfg.nx, cfg.ny)
        L = cfg.resolve_l(mp.material)
        _, rep_pfs = _solve(cfg, disc, "pfs", L)
        _, rep_fs = _solve(cfg, disc, "fs", L)
        rows.append({
            "block": "h", "value": float(h),
            "pfs_iterations": float(rep_pfs.iterations),
            "fs_mean": float(rep_fs.mean_step_iterations),
            "converged": rep_pfs.converged and rep_fs.converged,
        })

    outdir = Path(config.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_csv(outdir / "refine_table.csv",
               ["block", "value", "pfs_iterations", "fs_mean", "converged"],
               [[r["block"], _fmt(r["value"]), _fmt(r["pfs_iterations"]),
                 _fmt(r["fs_mean"]), str(r["converged"]).lower()]
                for r in rows])
    return rows


def bench(config, worker_counts=None):
    """Stage wall times of the time-parallel method per worker count.

    A sequential run is recorded as the baseline.  Timing columns vary
    between reruns; every other column is deterministic.

    Returns
    -------
    list of dict
        Also written to bench.csv.
    """
    if worker_counts is None:
        worker_counts = list(DEFAULT_WORKER_COUNTS)
    mp = config.mandel_params()
    disc = discretize(mp, config.nx, config.ny)
    L = config.resolve_l(mp.material)

    def record(method, workers, report, state):
        flow = float(sum(report.flow_times))
        mech = float(sum(report.mech_times))
        total = flow + mech
        return {
            "method": method,
            "workers": workers,
            "iterations": _iteration_metric(report),
            "converged": report.converged,
            "flow_time": flow,
            "mech_time": mech,
            "total_time": total,
            "flow_share": flow / total if total > 0 else 0.0,
            "mech_share": mech / total if total > 0 else 0.0,
            "plate_uy_final": float(state.u[-1, disc.dofmap.tie_master]),
        }

    rows = []
    state, report = _solve(config, disc, "fs", L, workers=1)
    rows.append(record("fs", 1, report, state))
    for wc in worker_counts:
        state, report = _solve(config, disc, "pfs", L, workers=int(wc))
        rows.append(record("pfs", int(wc), report, state))

    outdir = Path(config.out)
    outdir.mkdir(parents=True, exist_ok=True)
    header = ["method", "workers", "iterations", "converged", "flow_time",
              "mech_time", "total_time", "flow_share", "mech_share",
              "plate_uy_final"]
    _write_csv(outdir / "bench.csv", header,
               [[r["method"], str(r["workers"]), _fmt(r["iterations"]),
                 str(r["converged"]).lower(), _fmt(r["flow_time"]),
                 _fmt(r["mech_time"]), _fmt(r["total_time"]),
                 _fmt(r["flow_share"]), _fmt(r["mech_share"]),
                 _fmt(r["plate_uy_final"])] for r in rows])
    return rows


def analytic_profiles(config, times=None):
    """Series solution profiles, for plotting against computed runs."""
    if times is None:
        times = list(DEFAULT_ANALYTIC_TIMES)
    mp = config.mandel_params()
    xs = np.linspace(0.0, mp.a, 101)

    p_rows = []
    u_rows = []
    for t in times:
        pressures = analytic_pressure(xs, t, mp)
        ux, _ = analytic_displacement(xs, 0.0, t, mp)
        _, uy_plate = analytic_displacement(0.0, mp.b, t, mp)
        for j, x in enumerate(xs):
            p_rows.append([_fmt(t), _fmt(x), _fmt(pressures[j])])
            u_rows.append([_fmt(t), _fmt(x), _fmt(ux[j]), _fmt(uy_plate)])

    outdir = Path(config.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_csv(outdir / "analytic_pressure.csv", ["t", "x", "p"], p_rows)
    _write_csv(outdir / "analytic_displacement.csv",
               ["t", "x", "u_x", "u_y_plate"], u_rows)
    return [outdir / "analytic_pressure.csv",
            outdir / "analytic_displacement.csv"]


def _parse_float_list(text, flag):
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"{flag} expects comma separated numbers, got "
                          f"{text!r}") from None
    if not values:
        raise ConfigError(f"{flag} must not be empty")
    return values


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="biotsplit",
        description="Fixed-stress splitting benchmarks for Biot "
                    "consolidation on the Mandel problem.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", metavar="PATH",
                       help="key=value configuration file")
        p.add_argument("--method", choices=("fs", "pfs"),
                       help="splitting method override")
        p.add_argument("--L", dest="stab_l", metavar="VALUE|phys|min",
                       help="stabilization parameter override")
        p.add_argument("--workers", type=int, metavar="N",
                       help="mechanics stage thread count override")
        p.add_argument("--out", metavar="DIR",
                       help="output directory override")
        p.add_argument("--preset", choices=sorted(PRESET_NU),
                       help="material preset override")

    add_common(sub.add_parser("run", help="one splitting run"))

    p_sweep = sub.add_parser("l-sweep",
                             help="iteration counts over a grid of L")
    add_common(p_sweep)
    p_sweep.add_argument("--grid-factors", metavar="F1,F2,...",
                         help="multiples of l_phy to sweep")

    p_ref = sub.add_parser("refine-table",
                           help="iteration counts under refinement")
    add_common(p_ref)
    p_ref.add_argument("--tau-list", metavar="T1,T2,...",
                       help="time steps for the tau block")
    p_ref.add_argument("--h-list", metavar="H1,H2,...",
                       help="element heights for the mesh block")

    p_bench = sub.add_parser("bench", help="stage wall times per workers")
    add_common(p_bench)
    p_bench.add_argument("--worker-counts", metavar="N1,N2,...",
                         help="thread counts to benchmark")

    p_ana = sub.add_parser("analytic", help="series solution profiles")
    add_common(p_ana)
    p_ana.add_argument("--times", metavar="T1,T2,...",
                       help="evaluation times")

    return parser


def _config_from_args(args):
    mapping = load_config(args.config) if args.config else {}
    config = RunConfig.from_mapping(mapping)
    for name in ("method", "stab_l", "workers", "out", "preset"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(config, name, value)
    config.validate()
    return config


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        config = _config_from_args(args)
        if args.command == "run":
            _, report, _ = run(config)
            return 0 if report.converged else 1
        if args.command == "l-sweep":
            grid = None
            if args.grid_factors:
                factors = _parse_float_list(args.grid_factors,
                                            "--grid-factors")
                material = config.material()
                grid = [f * material.l_phy for f in factors]
            rows = l_sweep(config, grid)
            return 0 if all(r["converged"] for r in rows) else 1
        if args.command == "refine-table":
            tau_list = (_parse_float_list(args.tau_list, "--tau-list")
                        if args.tau_list else None)
            h_list = (_parse_float_list(args.h_list, "--h-list")
                      if args.h_list else None)
            rows = refinement_table(config, tau_list, h_list)
            return 0 if all(r["converged"] for r in rows) else 1
        if args.command == "bench":
            counts = ([int(c) for c in
                       _parse_float_list(args.worker_counts,
                                         "--worker-counts")]
                      if args.worker_counts else None)
            rows = bench(config, counts)
            return 0 if all(r["converged"] for r in rows) else 1
        if args.command == "analytic":
            times = (_parse_float_list(args.times, "--times")
                     if args.times else None)
            analytic_profiles(config, times)
            return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
