"""Command-line surface: every subcommand emits machine-readable output.

JSON results embed the resolved run configuration, so any output can be
reproduced from itself. Exit codes: 0 success, 1 numerical/domain failure
(with a diagnostic JSON on stdout), 2 usage error. Floats serialize via
shortest round-trip repr (up to 17 significant digits), which is lossless.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .ecp import (QuadratureGrid, boltzmann_covariant, boltzmann_eta,
                  boltzmann_sphere, partition_function, seeley_density,
                  sphere_route_partition)
from .geometry import GeometryError, point_geometry
from .metrics import BUILTIN_NAMES, MetricError, builtin, parse_metric
from .montecarlo import mc_boltzmann, mc_two_point, mc_vertex_expectation
from .propagator import PeriodicPropagator
from .verify import run_suite
from .wick import EngineError, RouteError, vertex_catalog

_FAILURE_TYPES = (MetricError, GeometryError, EngineError, RouteError, ValueError)


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("CURVEPATH_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _parse_point(text: str | None) -> np.ndarray:
    if text is None:
        raise MetricError("--point is required for this route")
    try:
        return np.array([float(x) for x in text.split(",") if x.strip() != ""])
    except ValueError:
        raise MetricError(f"cannot parse point {text!r}") from None


def _parse_params(text: str | None) -> dict:
    if not text:
        return {}
    out = {}
    for piece in text.split(","):
        key, sep, value = piece.partition("=")
        if not sep or not key:
            raise MetricError(f"cannot parse parameter assignment {piece!r}")
        out[key.strip()] = float(value)
    return out


def _resolve_metric(args):
    if getattr(args, "metric", None):
        with open(args.metric, "r", encoding="utf-8") as fh:
            return parse_metric(fh.read())
    if getattr(args, "builtin", None):
        name, _, dim = args.builtin.partition(":")
        if not dim:
            raise MetricError("--builtin needs the form name:D, e.g. sphere:2")
        return builtin(name, int(dim), _parse_params(getattr(args, "params", None)))
    raise MetricError("a metric is required: --metric FILE or --builtin name:D")


def _config_echo(args) -> dict:
    skip = {"func"}
    out = {"version": __version__}
    out.update({k: v for k, v in vars(args).items() if k not in skip and v is not None})
    return out


def _emit(payload: dict, args) -> None:
    payload = dict(payload)
    payload["config"] = _config_echo(args)
    json.dump(payload, sys.stdout, indent=2, allow_nan=False)
    sys.stdout.write("\n")


def cmd_geometry(args) -> int:
    spec = _resolve_metric(args)
    geom = point_geometry(spec, _parse_point(args.point))
    _emit({
        "schema": "curvepath/geometry-v1",
        "name": spec.name,
        "dim": spec.dim,
        "q0": geom.q0.tolist(),
        "g": geom.g.tolist(),
        "g_inv": geom.g_inv.tolist(),
        "sqrt_g": geom.sqrt_g,
        "Gamma": geom.Gamma.tolist(),
        "Ricci": geom.Ricci.tolist(),
        "R": geom.R,
        "T": geom.T.tolist(),
        "V": geom.V.tolist(),
        "divV": geom.divV,
        "trace_T": float(np.einsum("st,st->", geom.g_inv, geom.T)),
    }, args)
    return 0


def cmd_propagator(args) -> int:
    p = PeriodicPropagator(args.beta, args.M)
    table = p.equal_time_table()
    _emit({
        "schema": "curvepath/propagator-v1",
        "beta": args.beta,
        "M": args.M,
        "tau": args.tau,
        "taup": args.taup,
        "green_closed": p.green_closed(args.tau, args.taup),
        "green_modes": p.green_modes(args.tau, args.taup),
        "green0": table["green0"].as_dict(),
        "green0_truncated": table["green0_truncated"],
        "ddgreen0": table["ddgreen0"].as_dict(),
        "delta_measure0": table["delta_measure0"].as_dict(),
    }, args)
    return 0


def _run_route(args):
    if args.route == "sphere":
        if args.D is None:
            raise RouteError("--route sphere needs --D")
        return boltzmann_sphere(args.D, args.beta, args.M)
    spec = _resolve_metric(args)
    geom = point_geometry(spec, _parse_point(args.point))
    if args.route == "covariant":
        return boltzmann_covariant(geom, args.beta, args.M)
    if args.route == "eta":
        return boltzmann_eta(geom, args.beta, args.M,
                             include_fp=not args.no_fp,
                             with_mode_series=args.mode_series)
    raise RouteError(f"unknown route {args.route!r}")


def cmd_ecp(args) -> int:
    report = _run_route(args)
    payload = {"schema": "curvepath/expansion-report-v1"}
    payload.update(report.as_dict())
    if args.seeley:
        spec = _resolve_metric(args) if args.route != "sphere" else builtin("sphere", args.D)
        point = _parse_point(args.point) if args.route != "sphere" else np.zeros(args.D)
        geom = point_geometry(spec, point)
        payload["seeley_path_integral"] = seeley_density(geom, args.beta, "path_integral")
        payload["seeley_dewitt"] = seeley_density(geom, args.beta, "dewitt_seeley")
    _emit(payload, args)
    return 0


def cmd_sweep(args) -> int:
    spec = _resolve_metric(args)
    points = [_parse_point(p) for p in args.points.split(";") if p.strip()]
    routes = args.routes.split(",")

    def work(item):
        q0, route = item
        geom = point_geometry(spec, q0)
        if route == "covariant":
            rep = boltzmann_covariant(geom, args.beta, args.M)
        elif route == "eta":
            rep = boltzmann_eta(geom, args.beta, args.M, include_fp=not args.no_fp)
        else:
            raise RouteError(f"sweep supports covariant and eta routes, not {route!r}")
        return q0, route, rep

    jobs = [(q0, route) for q0 in points for route in routes]
    with ThreadPoolExecutor(max_workers=_threads(args)) as pool:
        results = list(pool.map(work, jobs))
    D = spec.dim
    header = ",".join(f"q{i + 1}" for i in range(D))
    sys.stdout.write(f"{header},beta,route,B_coefficient,discrepancy\n")
    for q0, route, rep in results:
        coords = ",".join(repr(float(c)) for c in q0)
        sys.stdout.write(f"{coords},{args.beta!r},{route},"
                         f"{rep.B_coefficient!r},{rep.discrepancy!r}\n")
    return 0


def cmd_mc(args) -> int:
    if args.route == "sphere":
        D = args.D or 2
        geom = point_geometry(builtin("sphere", D), np.zeros(D))
    else:
        spec = _resolve_metric(args)
        geom = point_geometry(spec, _parse_point(args.point))
    on_batch = None
    if args.csv:
        sys.stdout.write("n,mean,stderr\n")

        def on_batch(count, mean, stderr):
            sys.stdout.write(f"{count},{mean!r},{stderr!r}\n")
    est = mc_boltzmann(args.route, geom, args.beta, args.M, args.samples, args.seed,
                       on_batch=on_batch)
    if args.csv:
        return 0
    payload = {"schema": "curvepath/mc-v1", "route": args.route}
    payload.update(est.as_dict())
    payload["B_reference"] = 1.0 - geom.R * args.beta / 24.0
    _emit(payload, args)
    return 0


def cmd_partition(args) -> int:
    if args.sphere_D is not None:
        z = sphere_route_partition(args.sphere_D, args.beta, args.M)
        _emit({"schema": "curvepath/partition-v1", "Z": z, "kind": "sphere-route"}, args)
        return 0
    spec = _resolve_metric(args)
    if args.polar is not None:
        grid = QuadratureGrid(kind="polar", rmax=args.polar, n=args.nodes)
    elif spec.name == "sphere" and spec.dim == 2:
        grid = QuadratureGrid(kind="sphere-polar", n=args.nodes)
    else:
        bounds = tuple((lo, hi) for lo, hi in
                       (tuple(map(float, b.split(":"))) for b in args.bounds.split(";")))
        grid = QuadratureGrid(kind="box", bounds=bounds, n=args.nodes)
    z = partition_function(spec, args.beta, grid)
    _emit({"schema": "curvepath/partition-v1", "Z": z, "kind": grid.kind}, args)
    return 0


def cmd_verify(args) -> int:
    rows = run_suite(args.suite)
    failed = 0
    for name, ok, detail in rows:
        status = "PASS" if ok else "FAIL"
        line = f"[{status}] {name}"
        if detail:
            line += f"  ({detail})"
        sys.stdout.write(line + "\n")
        failed += 0 if ok else 1
    sys.stdout.write(f"{len(rows) - failed}/{len(rows)} checks passed\n")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="curvepath",
                                 description="two-loop effective classical potential "
                                             "of a particle in curved space")
    ap.add_argument("--version", action="version", version=f"curvepath {__version__}")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    def add_metric_opts(p, point_required=True):
        p.add_argument("--metric", help="metric file (JSON)")
        p.add_argument("--builtin", help=f"builtin chart name:D, names: {BUILTIN_NAMES}")
        p.add_argument("--params", help="builtin parameters, e.g. a=0.3,b=-0.1")
        p.add_argument("--point", required=point_required, default=None,
                       help="evaluation point q1,q2,...")

    g = sub.add_parser("geometry", help="tensor bundle at a point")
    add_metric_opts(g)
    g.set_defaults(func=cmd_geometry)

    pr = sub.add_parser("propagator", help="periodic kernel values")
    pr.add_argument("--beta", type=float, required=True)
    pr.add_argument("--M", type=int, required=True)
    pr.add_argument("--tau", type=float, default=0.0)
    pr.add_argument("--taup", type=float, default=0.0)
    pr.set_defaults(func=cmd_propagator)

    e = sub.add_parser("ecp", help="Boltzmann factor by one route")
    e.add_argument("--route", required=True, choices=("covariant", "eta", "sphere"))
    add_metric_opts(e, point_required=False)
    e.add_argument("--beta", type=float, required=True)
    e.add_argument("--M", type=int, default=64)
    e.add_argument("--D", type=int, help="dimension for the sphere route")
    e.add_argument("--no-fp", action="store_true", dest="no_fp",
                   help="drop the Faddeev-Popov term (eta route)")
    e.add_argument("--mode-series", action="store_true", dest="mode_series",
                   help="attach the sharp-cutoff diagnostic series (eta route)")
    e.add_argument("--seeley", action="store_true",
                   help="attach both short-time density conventions")
    e.set_defaults(func=cmd_ecp)

    sw = sub.add_parser("sweep", help="CSV of B coefficients over points")
    add_metric_opts(sw, point_required=False)
    sw.add_argument("--points", required=True, help="semicolon-separated points")
    sw.add_argument("--routes", default="covariant")
    sw.add_argument("--beta", type=float, required=True)
    sw.add_argument("--M", type=int, default=64)
    sw.add_argument("--no-fp", action="store_true", dest="no_fp")
    sw.add_argument("--threads", type=int)
    sw.set_defaults(func=cmd_sweep)

    m = sub.add_parser("mc", help="Monte Carlo cross-check")
    m.add_argument("--route", required=True, choices=("covariant", "eta", "sphere"))
    add_metric_opts(m, point_required=False)
    m.add_argument("--D", type=int)
    m.add_argument("--beta", type=float, required=True)
    m.add_argument("--M", type=int, required=True)
    m.add_argument("--samples", type=int, required=True)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--csv", action="store_true",
                   help="stream per-batch partial results as CSV")
    m.set_defaults(func=cmd_mc)

    pa = sub.add_parser("partition", help="configuration-space quadrature")
    add_metric_opts(pa, point_required=False)
    pa.add_argument("--beta", type=float, required=True)
    pa.add_argument("--M", type=int, default=16)
    pa.add_argument("--sphere-D", type=int, dest="sphere_D",
                    help="closed-form sphere-route partition function")
    pa.add_argument("--bounds", help="box bounds lo:hi;lo:hi;...")
    pa.add_argument("--polar", type=float, help="polar grid with this radial extent")
    pa.add_argument("--nodes", type=int, default=32)
    pa.set_defaults(func=cmd_partition)

    v = sub.add_parser("verify", help="run invariant suites")
    v.add_argument("suite", nargs="?", default="all")
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except _FAILURE_TYPES as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stdout)
        sys.stdout.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
