"""Batch command-line interface.

Subcommands: solve, k-scan, variational, inequality-suite, approx-demo,
truncation-demo, stability-probe, cross-check.  Every run writes JSON (and
CSV where tabular) reports into the output directory; identical arguments and
seed produce byte-identical JSON.  Exit codes: 0 success / all checks pass,
1 usage or configuration error, 2 an inequality violation or a failed
assertion.

A JSON config file can preload any flag (--config); explicit flags win.  The
environment variable MA_LAB_THREADS caps the worker count of parameter
sweeps.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import families as fam
from . import harness as hz
from . import planar as pl
from . import reporting as rep
from . import solvers as sv
from .radial import (RadialGrid, RadialPotential, dv_weights, energy_p,
                     quadratic_potential, random_potential)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VIOLATION = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _workers(n_tasks: int) -> int:
    cap = os.environ.get("MA_LAB_THREADS")
    if cap:
        try:
            return max(1, min(int(cap), n_tasks))
        except ValueError:
            raise _UsageError(f"MA_LAB_THREADS must be an integer, got {cap!r}")
    return max(1, min(4, os.cpu_count() or 1, n_tasks))


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise _UsageError(f"expected a comma-separated float list, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise _UsageError(f"expected a comma-separated int list, got {text!r}")


def build_parser() -> _Parser:
    p = _Parser(prog="ma-lab", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", help="JSON file preloading flag values")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", default="ma_lab_out", help="output directory")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--n", type=int, default=1)
        sp.add_argument("--t-min", type=float, default=-20.0)
        sp.add_argument("--radial-nodes", type=int, default=4001)
        sp.add_argument("--resolution", type=int, default=128)

    sp = sub.add_parser("solve", help="damped fixed-point solve")
    common(sp)
    sp.add_argument("--geometry", default="radial", choices=["radial", "planar-disk"])
    sp.add_argument("--k", type=float, default=1.0)
    sp.add_argument("--eta", type=float, default=0.5)
    sp.add_argument("--tol", type=float, default=None)
    sp.add_argument("--max-iter", type=int, default=5000)

    sp = sub.add_parser("k-scan", help="fixed-point runs across k values")
    common(sp)
    sp.add_argument("--geometry", default="radial", choices=["radial", "planar-disk"])
    sp.add_argument("--k-list", default="0.5,1.0,1.5,1.9")
    sp.add_argument("--eta", type=float, default=0.5)
    sp.add_argument("--tol", type=float, default=None)
    sp.add_argument("--max-iter", type=int, default=5000)

    sp = sub.add_parser("variational", help="projected descent on the energy functional (k = 1)")
    common(sp)
    sp.add_argument("--geometry", default="radial", choices=["radial", "planar-disk"])
    sp.add_argument("--tol", type=float, default=1e-5)
    sp.add_argument("--max-iter", type=int, default=500)

    sp = sub.add_parser("inequality-suite", help="property checks for the inequalities")
    common(sp)
    sp.add_argument("--suite", default="all",
                    choices=["holder-p1", "holder-p2", "mass-holder", "subadditivity",
                             "exp-energy", "exp-mass", "m1-estimate", "l1-note", "all"])
    sp.add_argument("--samples", type=int, default=200)
    sp.add_argument("--n-list", default="1,2,3")

    sp = sub.add_parser("approx-demo", help="mollify-and-solve route to a circle measure")
    common(sp)
    sp.add_argument("--radius", type=float, default=0.5)
    sp.add_argument("--mass", type=float, default=1.0)
    sp.add_argument("--eps-list", default="0.2,0.1,0.05,0.025")

    sp = sub.add_parser("truncation-demo", help="solve with truncated unbounded densities")
    common(sp)
    sp.add_argument("--j-list", default="1,2,4,8,16")

    sp = sub.add_parser("stability-probe", help="solution stability in the density")
    common(sp)

    sp = sub.add_parser("cross-check", help="fixed point vs variational, radial vs planar")
    common(sp)
    sp.add_argument("--n-list", default="1,2")
    return p


def _apply_config_file(args: argparse.Namespace, parser: _Parser, argv: list[str]) -> None:
    if not args.config:
        return
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise _UsageError(f"cannot read config file: {exc}")
    if not isinstance(loaded, dict):
        raise _UsageError("config file must hold a JSON object")
    explicit = {a.lstrip("-").replace("-", "_").split("=")[0] for a in argv if a.startswith("--")}
    for key, value in loaded.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise _UsageError(f"config file sets unknown option {key!r}")
        if attr not in explicit:
            setattr(args, attr, value)


# ---------------------------------------------------------------------------
# Subcommand bodies.  Each returns (exit_code, payload_dict).


def _cmd_solve(args):
    cfg = sv.FixedPointConfig(n=args.n, k=args.k, geometry=args.geometry, eta=args.eta,
                              tol=args.tol, max_iter=args.max_iter, t_min=args.t_min,
                              radial_nodes=args.radial_nodes, resolution=args.resolution)
    u, trace = sv.fixed_point_solve(cfg)
    grid_hash = u.grid.grid_hash
    payload = rep.report_payload("solve", cfg.echo(), trace.summary(),
                                 seed=args.seed, grid_hash=grid_hash)
    rep.write_json(os.path.join(args.out, "solve_report.json"), payload)
    rep.write_csv(os.path.join(args.out, "solve_trace.csv"),
                  ("iteration", "residual_sup", "residual_l1", "mass", "energy",
                   "F", "step"),
                  trace.csv_rows())
    return (EXIT_OK if trace.converged else EXIT_VIOLATION), payload


def _cmd_k_scan(args):
    ks = _floats(args.k_list)
    base = sv.FixedPointConfig(n=args.n, k=max(ks), geometry=args.geometry, eta=args.eta,
                               tol=args.tol, max_iter=args.max_iter, t_min=args.t_min,
                               radial_nodes=args.radial_nodes, resolution=args.resolution)
    rows = sv.k_scan(args.n, ks, base, max_workers=_workers(len(ks)))
    payload = rep.report_payload("k-scan", base.echo() | {"k_list": ks}, rows, seed=args.seed)
    rep.write_json(os.path.join(args.out, "k_scan_report.json"), payload)
    rep.write_csv(os.path.join(args.out, "k_scan.csv"),
                  ("k", "status", "iterations", "final_mass", "energy", "sup_u"),
                  [(r["k"], r["status"], r["iterations"], r["final_mass"],
                    r["energy"], r["sup_u"]) for r in rows])
    failed = [r for r in rows if r["below_threshold"] and r["status"] != sv.STATUS_CONVERGED]
    return (EXIT_VIOLATION if failed else EXIT_OK), payload


def _cmd_variational(args):
    if args.geometry != "radial":
        raise _UsageError("the variational route is radial-only")
    cfg = sv.VariationalConfig(n=args.n, t_min=args.t_min, radial_nodes=args.radial_nodes,
                               tol=args.tol, max_iter=args.max_iter)
    u, trace = sv.variational_solve(cfg)
    payload = rep.report_payload("variational", cfg.echo(), trace.summary(),
                                 seed=args.seed, grid_hash=u.grid.grid_hash)
    rep.write_json(os.path.join(args.out, "variational_report.json"), payload)
    rep.write_csv(os.path.join(args.out, "variational_trace.csv"),
                  ("iteration", "residual_sup", "residual_l1", "mass", "energy",
                   "F", "step"),
                  trace.csv_rows())
    ok = trace.converged and all(b <= a + 1e-14 for a, b in
                                 zip(trace.functional, trace.functional[1:]))
    return (EXIT_OK if ok else EXIT_VIOLATION), payload


def _suite_reports(args):
    n_list = _ints(args.n_list)
    samples, seed = args.samples, args.seed
    chosen = args.suite
    reports = []

    def want(name):
        return chosen in (name, "all")

    if want("holder-p1"):
        for n in n_list:
            grid = RadialGrid.make(n, args.t_min, min(args.radial_nodes, 2001))
            tuples = hz.sample_tuples(grid, samples, n + 1, seed)
            reports.append(hz.check_energy_holder(tuples, n, 1.0, seed=seed))
        pairs = _planar_pairs(50, seed, resolution=min(args.resolution, 64))
        reports.append(hz.check_energy_holder_planar(pairs, seed=seed))
    if want("holder-p2"):
        for n in n_list:
            grid = RadialGrid.make(n, args.t_min, min(args.radial_nodes, 2001))
            tuples = hz.sample_tuples(grid, samples, n + 1, seed)
            reports.append(hz.check_energy_holder(tuples, n, 2.0, seed=seed))
    if want("mass-holder"):
        for n in [n for n in n_list if n >= 2]:
            grid = RadialGrid.make(n, args.t_min, min(args.radial_nodes, 2001))
            tuples = hz.sample_tuples(grid, samples, n + 1, seed)
            reports.append(hz.check_mass_holder(tuples, n, seed=seed))
    if want("subadditivity"):
        for n in n_list:
            grid = RadialGrid.make(n, args.t_min, min(args.radial_nodes, 2001))
            pairs = hz.sample_tuples(grid, samples, 2, seed)
            for mode in ("mass", "energy"):
                reports.append(hz.check_subadditivity(pairs, n, mode, seed=seed))
    if want("exp-energy"):
        reports.append(hz.check_exp_energy(1, 0.6, seed=seed))
        reports.append(hz.check_exp_energy(1, 0.1, seed=seed))   # exploration
    if want("exp-mass"):
        reports.append(hz.check_exp_mass(1, 0.9, seed=seed))
    if want("m1-estimate"):
        grid = RadialGrid.make(1, args.t_min, min(args.radial_nodes, 2001))
        from .radial import ma_measure
        mu = ma_measure(quadratic_potential(grid, 1.0))
        val = hz.estimate_M1_constant(mu, sample_count=min(samples, 200), seed=seed)
        reports.append(hz.InequalityReport(
            inequality_id="m1-estimate-n1-smooth", seed=seed,
            samples=min(samples, 200), worst_ratio=val, argmax="running-max",
            violations=0 if np.isfinite(val) else 1, tolerance=0.0,
            empirical_constant=val))
    if want("l1-note"):
        grid_w = RadialGrid.make(1, args.t_min, min(args.radial_nodes, 2001))
        w = quadratic_potential(grid_w, 1.0)
        probe = hz.l1_convergence_probe((1, 10, 100), w, n=1, t_min=args.t_min,
                                        num_nodes=min(args.radial_nodes, 2001))
        ok = probe.energies_exact and probe.dv_decreasing and probe.dmw_decreasing
        reports.append(hz.InequalityReport(
            inequality_id="l1-note-unit-energy-family", seed=seed,
            samples=len(probe.rows), worst_ratio=probe.rows[-1].int_dv,
            argmax=f"j={probe.rows[-1].j:g}", violations=0 if ok else 1,
            tolerance=1e-10, notes=probe.to_json_dict()))
    return reports


def _planar_pairs(count, seed, resolution):
    """Seeded pairs of disk potentials: solves of random smooth bump densities."""
    grid = pl.PlanarGrid(resolution)
    rng = np.random.default_rng(seed)
    x = grid.X[grid.ii, grid.jj]
    y = grid.Y[grid.ii, grid.jj]
    pairs = []
    for _ in range(count):
        us = []
        for _ in range(2):
            f = np.zeros(grid.num_interior)
            for _ in range(rng.integers(1, 4)):
                cx, cy = rng.uniform(-0.6, 0.6, size=2)
                width = rng.uniform(0.1, 0.5)
                amp = rng.uniform(0.5, 3.0)
                f += amp * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / width ** 2)
            us.append(pl.poisson_solve(pl.PlanarDensity(grid, f)))
        pairs.append(tuple(us))
    return pairs


def _cmd_inequality_suite(args):
    reports = _suite_reports(args)
    results = [r.to_json_dict() for r in reports]
    payload = rep.report_payload(
        "inequality-suite",
        {"suite": args.suite, "samples": args.samples, "n_list": args.n_list,
         "t_min": args.t_min, "radial_nodes": args.radial_nodes,
         "resolution": args.resolution},
        results, seed=args.seed)
    rep.write_json(os.path.join(args.out, "inequality_report.json"), payload)
    rep.write_csv(os.path.join(args.out, "inequality_report.csv"),
                  ("id", "samples", "worst_ratio", "violations", "empirical_constant"),
                  [(r.inequality_id, r.samples, r.worst_ratio, r.violations,
                    r.empirical_constant if r.empirical_constant is not None else float("nan"))
                   for r in reports])
    bad = [r for r in reports if not r.passed]
    return (EXIT_VIOLATION if bad else EXIT_OK), payload


def _cmd_approx_demo(args):
    grid = pl.PlanarGrid(args.resolution)
    mu = pl.PlanarDensity(grid, np.zeros(grid.num_interior),
                          circle_atoms=((args.radius, args.mass),))
    eps_list = _floats(args.eps_list)
    result = sv.approximation_scheme(mu, eps_list)
    payload = rep.report_payload(
        "approx-demo",
        {"radius": args.radius, "mass": args.mass, "eps_list": eps_list,
         "resolution": args.resolution},
        result.to_json_dict(), seed=args.seed, grid_hash=grid.grid_hash)
    rep.write_json(os.path.join(args.out, "approx_demo_report.json"), payload)
    rep.write_csv(os.path.join(args.out, "approx_demo.csv"),
                  ("eps", "mass", "energy", "sup_error_vs_direct", "envelope_sup_error"),
                  [(s.eps, s.mass, s.energy, s.sup_error_vs_direct, s.envelope_sup_error)
                   for s in result.stages])
    ok = result.energies_nondecreasing and result.envelope_errors_decreasing
    return (EXIT_OK if ok else EXIT_VIOLATION), payload


def _cmd_truncation_demo(args):
    grid = pl.PlanarGrid(args.resolution)
    r = np.maximum(grid.radius(), grid.h / 2.0)
    f = pl.PlanarDensity(grid, 1.0 / r)
    result = sv.truncation_scheme(f, _floats(args.j_list))
    masses_increasing = all(b >= a - 1e-12 for a, b in
                            zip(result.masses, result.masses[1:]))
    body = result.to_json_dict() | {"masses_increasing": masses_increasing}
    payload = rep.report_payload(
        "truncation-demo", {"j_list": _floats(args.j_list), "resolution": args.resolution},
        body, seed=args.seed, grid_hash=grid.grid_hash)
    rep.write_json(os.path.join(args.out, "truncation_demo_report.json"), payload)
    ok = result.pointwise_nonincreasing and masses_increasing
    return (EXIT_OK if ok else EXIT_VIOLATION), payload


def _cmd_stability_probe(args):
    grid = pl.PlanarGrid(args.resolution)
    x = grid.X[grid.ii, grid.jj]
    y = grid.Y[grid.ii, grid.jj]
    rho1 = pl.PlanarDensity(grid, np.full(grid.num_interior, 2.0))
    bump = np.exp(-((x - 0.2) ** 2 + y ** 2) / 0.09)
    rho2 = pl.PlanarDensity(grid, rho1.f + bump)
    result = hz.stability_probe(rho1, rho2)
    payload = rep.report_payload(
        "stability-probe", {"resolution": args.resolution},
        result.to_json_dict(), seed=args.seed, grid_hash=grid.grid_hash)
    rep.write_json(os.path.join(args.out, "stability_probe_report.json"), payload)
    ok = result.fitted_exponent is not None and result.fitted_exponent >= 0.9
    return (EXIT_OK if ok else EXIT_VIOLATION), payload


def _cmd_cross_check(args):
    rows = []
    ok = True
    for n in _ints(args.n_list):
        fp_cfg = sv.FixedPointConfig(n=n, k=1.0, t_min=args.t_min,
                                     radial_nodes=args.radial_nodes)
        u_fp, tr_fp = sv.fixed_point_solve(fp_cfg)
        var_cfg = sv.VariationalConfig(n=n, t_min=args.t_min,
                                       radial_nodes=args.radial_nodes)
        u_var, tr_var = sv.variational_solve(var_cfg)
        gap = float(np.max(np.abs(u_fp.chi - u_var.chi)))
        agree = tr_fp.converged and tr_var.converged and gap <= 1e-3
        ok = ok and agree
        rows.append({"n": n, "fixed_point_status": tr_fp.status,
                     "variational_status": tr_var.status, "sup_gap": gap,
                     "agree_within_1e-3": agree})
    # radial vs planar quadrature consistency on the smooth oracle (n = 1)
    grid_r = RadialGrid.make(1, args.t_min, args.radial_nodes)
    grid_p = pl.PlanarGrid(args.resolution)
    u_r = quadratic_potential(grid_r, 1.0)
    u_p = pl.radial_to_planar(u_r, grid_p)
    e_r = energy_p(u_r, 1.0)
    e_p = pl.energy_planar(u_p, 1.0)
    consistent = abs(e_r - e_p) <= 0.02
    ok = ok and consistent
    rows.append({"n": 1, "radial_energy": e_r, "planar_energy": e_p,
                 "consistent": consistent})
    payload = rep.report_payload(
        "cross-check", {"n_list": args.n_list, "t_min": args.t_min,
                        "radial_nodes": args.radial_nodes,
                        "resolution": args.resolution},
        rows, seed=args.seed)
    rep.write_json(os.path.join(args.out, "cross_check_report.json"), payload)
    return (EXIT_OK if ok else EXIT_VIOLATION), payload


_COMMANDS = {
    "solve": _cmd_solve,
    "k-scan": _cmd_k_scan,
    "variational": _cmd_variational,
    "inequality-suite": _cmd_inequality_suite,
    "approx-demo": _cmd_approx_demo,
    "truncation-demo": _cmd_truncation_demo,
    "stability-probe": _cmd_stability_probe,
    "cross-check": _cmd_cross_check,
}


def run(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_config_file(args, parser, argv)
        code, payload = _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"ma-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError, OSError) as exc:
        print(f"ma-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    status = {EXIT_OK: "ok", EXIT_VIOLATION: "violations"}[code]
    print(f"ma-lab {args.command}: {status} (reports in {args.out})")
    return code


def main() -> None:                  # console-script entry point
    sys.exit(run())


if __name__ == "__main__":           # pragma: no cover
    main()
