"""Command-line front end: ``spectra {spectrum,criteria,sweep,heatkernel,resolvent}``.

Exit codes: 0 success, 2 invalid input (nothing computed), 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .criteria import (
    applicable_criteria,
    cassini_condition,
    gerschgorin_condition,
)
from .geometry import (
    Configuration,
    ConfigurationError,
    Geometry,
    Kind,
    config_to_dict,
    heat_kernel,
    heat_kernel_diag_lower_h2,
    heat_kernel_upper_h2,
    load_config,
    require_valid,
)
from .principal import krein_correction, resolvent_kernel
from .specfun import DomainError, QuadratureError
from .spectrum import SpectrumError, count_bound_states, find_bound_states, _branches

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3
SWEEP_AXES = ("d", "mu", "kappa", "m", "nu")


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# argument handling


def _floats(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _problem_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--geometry", choices=[k.value for k in Kind])
    p.add_argument("--kappa", type=float)
    p.add_argument("--m", type=float, help="particle mass (relativistic geometries)")
    p.add_argument("--mu", type=_floats, help="binding parameters, comma-separated")
    p.add_argument("--n", type=int, help="number of centers; replicates a single --mu value")
    dist = p.add_mutually_exclusive_group()
    dist.add_argument("--dist-line", "--d", dest="dist_line", type=float,
                      help="equal spacing of collinear centers")
    dist.add_argument("--dist-matrix", help="CSV file with the full distance matrix")
    p.add_argument("--config", help="JSON file {mu, dist, geometry}")
    p.add_argument("--tol", type=float, help="root bracket width (default 1e-12 x scale)")


def _output_args(p: argparse.ArgumentParser, default="json") -> None:
    p.add_argument("--format", choices=("json", "csv"), default=default)
    p.add_argument("--output", "-o", help="write here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectra",
        description="Bound states of point interactions on flat and hyperbolic spaces.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="bound states of one configuration")
    _problem_args(p)
    _output_args(p)

    p = sub.add_parser("criteria", help="evaluate every applicable bound-state criterion")
    _problem_args(p)
    p.add_argument("--verify", action="store_true", help="also compute the exact count")
    p.add_argument("--criterion", help="report only this criterion id")
    _output_args(p)

    p = sub.add_parser("sweep", help="count and criteria along a parameter axis")
    _problem_args(p)
    p.add_argument("--axis", choices=SWEEP_AXES, required=True)
    p.add_argument("--range", dest="range_", required=True, metavar="START:STOP:STEPS")
    p.add_argument("--scale", choices=("lin", "log"), default="lin")
    _output_args(p, default="csv")

    p = sub.add_parser("heatkernel", help="heat kernel K_t at distance d")
    p.add_argument("--geometry", choices=[k.value for k in Kind], required=True)
    p.add_argument("--kappa", type=float)
    p.add_argument("--m", type=float)
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    _output_args(p)

    p = sub.add_parser("resolvent", help="free resolvent kernel, or its Krein correction")
    _problem_args(p)
    p.add_argument("--nu", type=float, required=True)
    p.add_argument("--x-dists", type=_floats, help="d(x, a_i) for the Krein correction")
    p.add_argument("--y-dists", type=_floats, help="d(y, a_i) for the Krein correction")
    _output_args(p)
    # single-kernel mode reuses --d as the distance between the two points
    return parser


def _geometry(args) -> Geometry:
    if args.geometry is None:
        raise UsageError("--geometry is required (or pass --config)")
    return Geometry(Kind(args.geometry), kappa=args.kappa, m=args.m)


def _read_matrix(path: str) -> np.ndarray:
    try:
        with open(path, newline="") as fh:
            rows = [[float(x) for x in row] for row in csv.reader(fh) if row]
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read distance matrix {path!r}: {exc}")
    if not rows or any(len(r) != len(rows) for r in rows):
        raise UsageError(f"distance matrix in {path!r} is not square")
    return np.array(rows)


def problem_from_args(args) -> tuple[Geometry, Configuration]:
    """Geometry and a validated configuration from the command line."""
    if args.config:
        try:
            geom, cfg = load_config(args.config)
        except (OSError, KeyError, json.JSONDecodeError, TypeError) as exc:
            raise UsageError(f"bad config file {args.config!r}: {exc}")
        if args.kappa is not None or args.m is not None:
            geom = geom.with_params(kappa=args.kappa, m=args.m)
    else:
        geom = _geometry(args)
        if args.mu is None:
            raise UsageError("--mu is required (or pass --config)")
        mu = list(args.mu)
        if args.n is not None:
            if args.n < 1:
                raise UsageError("--n must be >= 1")
            if len(mu) == 1:
                mu = mu * args.n
            elif len(mu) != args.n:
                raise UsageError(f"--n {args.n} does not match {len(mu)} values of --mu")
        if args.dist_matrix:
            cfg = Configuration(tuple(mu), _read_matrix(args.dist_matrix))
        elif len(mu) == 1:
            cfg = Configuration.single(mu[0])
        elif args.dist_line is not None:
            cfg = Configuration.collinear(mu, args.dist_line)
        else:
            raise UsageError("several centers need --dist-line/--d, --dist-matrix or --config")
    require_valid(cfg, geom)
    return geom, cfg


def _parse_range(text: str, scale: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"range must be START:STOP:STEPS, got {text!r}")
    try:
        start, stop = float(parts[0]), float(parts[1])
        steps = int(parts[2])
    except ValueError:
        raise UsageError(f"range must be START:STOP:STEPS, got {text!r}")
    if steps < 1:
        raise UsageError("range needs at least one step")
    if scale == "log":
        if not (start > 0 and stop > 0):
            raise UsageError("log range needs positive endpoints")
        return np.geomspace(start, stop, steps)
    return np.linspace(start, stop, steps)


def _threads() -> int:
    raw = os.environ.get("SPECTRA_THREADS")
    if raw is None or raw == "":
        return max(1, min(8, os.cpu_count() or 1))
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"SPECTRA_THREADS must be a positive integer, got {raw!r}")
    if n < 1:
        raise UsageError(f"SPECTRA_THREADS must be a positive integer, got {raw!r}")
    return n


# ---------------------------------------------------------------------------
# serialization


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_num(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


# ---------------------------------------------------------------------------
# commands


def run_spectrum(args) -> int:
    geom, cfg = problem_from_args(args)
    states = find_bound_states(geom, cfg, tol=args.tol)
    count = count_bound_states(geom, cfg, tol=args.tol)
    if args.format == "csv":
        key = "E" if geom.relativistic else "nu"
        rows = [(s.nu, s.energy, s.multiplicity, s.normalization, s.det_ratio) for s in states]
        _emit(_csv([key, "energy", "multiplicity", "normalization", "det_ratio"], rows),
              args.output)
        return EXIT_OK
    out = config_to_dict(geom, cfg)
    out["count"] = count
    out["states"] = []
    for s in states:
        d = s.to_dict()
        d["branches"] = list(s.branches)
        d["null_dim"] = s.null_dim
        d["det_ratio"] = s.det_ratio
        out["states"].append(d)
    _emit(_json(out), args.output)
    return EXIT_OK


def run_criteria(args) -> int:
    geom, cfg = problem_from_args(args)
    reports = applicable_criteria(geom, cfg)
    if args.criterion:
        reports = [r for r in reports if r.criterion_id == args.criterion]
        if not reports:
            raise UsageError(f"criterion {args.criterion!r} does not apply to "
                             f"{geom.kind.value} with N = {cfg.n}")
    exact = count_bound_states(geom, cfg, tol=args.tol) if args.verify else None
    if args.format == "csv":
        header = ["criterion_id", "lhs", "rhs", "relation", "satisfied", "witness",
                  "predicted_count"]
        rows = [(r.criterion_id, r.lhs, r.rhs, r.relation, r.satisfied, r.witness,
                 r.predicted_count) for r in reports]
        if exact is not None:
            header.append("exact_count")
            rows = [row + (exact,) for row in rows]
        _emit(_csv(header, rows), args.output)
        return EXIT_OK
    out = config_to_dict(geom, cfg)
    out["criteria"] = [r.to_dict() for r in reports]
    if exact is not None:
        out["exact_count"] = exact
        # a satisfied criterion predicts the count; an unsatisfied one predicts nothing
        # except the flat two-center dichotomy
        out["agreement"] = all(r.predicted_count == exact for r in reports
                               if r.predicted_count is not None)
    _emit(_json(out), args.output)
    return EXIT_OK


def _static_ids(geom: Geometry, n: int) -> list[str]:
    ids = ["gerschgorin"]
    if n >= 2:
        ids.append("cassini")
        kind = geom.kind
        if kind in (Kind.FLAT2, Kind.FLAT3) and n == 2:
            ids.append("flat_two_center")
        extra = {Kind.H3: "h3", Kind.H2: "h2", Kind.REL_FLAT2: "rel_flat2",
                 Kind.REL_H2: "rel_h2"}.get(kind)
        if extra:
            ids.append(extra)
    return ids


def _vary(geom: Geometry, cfg: Configuration, axis: str, value: float):
    if axis == "kappa":
        if not geom.hyperbolic:
            raise UsageError(f"axis kappa needs a hyperbolic geometry, got {geom.kind.value}")
        return geom.with_params(kappa=value), cfg
    if axis == "m":
        if not geom.relativistic:
            raise UsageError(f"axis m needs a relativistic geometry, got {geom.kind.value}")
        return geom.with_params(m=value), cfg
    if axis == "mu":
        return geom, cfg.with_mu([value] * cfg.n)
    if axis == "d":
        if cfg.n < 2:
            raise UsageError("axis d needs at least two centers")
        # rescale so the closest pair sits at distance value
        return geom, Configuration(cfg.mu, cfg.dist * (value / cfg.min_distance()))
    raise AssertionError(axis)


def _sweep_row(geom, cfg, axis, value, ids, tol, base_states=None):
    if axis == "nu":
        # counts states deeper than the swept parameter; matrix tests at that parameter
        eb = _branches(geom, cfg, value)
        if geom.relativistic:
            floor = _branches(geom, cfg, -geom.m + (tol or 1e-12 * geom.m))
            count = int(np.sum(eb.values < 0) - np.sum(floor.values < 0))
        else:
            count = int(np.sum(eb.values < 0))
        verdicts = {"gerschgorin": gerschgorin_condition(geom, cfg, value).satisfied}
        if cfg.n >= 2:
            verdicts["cassini"] = cassini_condition(geom, cfg, value).satisfied
        for r in base_states[1]:
            verdicts.setdefault(r.criterion_id, r.satisfied)
        states = base_states[0]
    else:
        g, c = _vary(geom, cfg, axis, value)
        require_valid(c, g)
        states = find_bound_states(g, c, tol=tol)
        count = count_bound_states(g, c, tol=tol)
        verdicts = {r.criterion_id: r.satisfied for r in applicable_criteria(g, c)}
    if geom.relativistic:
        top = min(s.energy for s in states) if states else None
    else:
        top = max(s.nu for s in states) if states else None
    return [value, count, top] + [verdicts.get(i) for i in ids]


def run_sweep(args) -> int:
    geom, cfg = problem_from_args(args)
    grid = _parse_range(args.range_, args.scale)
    if args.axis == "nu":
        lo, hi = (-geom.m, geom.m) if geom.relativistic else (0.0, math.inf)
        if np.any(grid <= lo) or np.any(grid >= hi):
            raise UsageError("nu axis values must lie in the spectral window "
                             "(nu > 0, or -m < E < m)")
    for v in grid:
        # validate every point before computing anything
        if args.axis != "nu":
            g, c = _vary(geom, cfg, args.axis, float(v))
            require_valid(c, g)
    ids = _static_ids(geom, cfg.n)
    base = None
    if args.axis == "nu":
        base = (find_bound_states(geom, cfg, tol=args.tol),
                [r for r in applicable_criteria(geom, cfg)
                 if r.criterion_id not in ("gerschgorin", "cassini")])
    workers = _threads()
    work = lambda v: _sweep_row(geom, cfg, args.axis, float(v), ids, args.tol, base)
    if workers == 1:
        rows = [work(v) for v in grid]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(work, grid))
    top = "e_ground" if geom.relativistic else "nu_max"
    header = ["param", "count", top] + ids
    if args.format == "csv":
        _emit(_csv(header, rows), args.output)
    else:
        out = {"axis": args.axis, "geometry": geom.to_dict(), "columns": header,
               "rows": [dict(zip(header, r)) for r in rows]}
        _emit(_json(out), args.output)
    return EXIT_OK


def run_heatkernel(args) -> int:
    geom = _geometry(args)
    space = geom.spatial()
    value = heat_kernel(space, args.d, args.t)
    out = {"geometry": space.to_dict(), "d": args.d, "t": args.t, "value": value.value,
           "method": value.method}
    if space.kind is Kind.H2:
        out["upper_bound"] = heat_kernel_upper_h2(args.d, args.t, space.kappa)
        if args.d == 0:
            out["diag_lower_bound"] = heat_kernel_diag_lower_h2(args.t, space.kappa)
    if args.format == "csv":
        keys = list(out)[1:]
        _emit(_csv(keys, [[out[k] for k in keys]]), args.output)
    else:
        _emit(_json(out), args.output)
    return EXIT_OK


def run_resolvent(args) -> int:
    if args.x_dists is None and args.y_dists is None:
        geom = _geometry(args)
        if args.dist_line is None:
            raise UsageError("resolvent needs --d (distance between the two points)")
        out = {"geometry": geom.to_dict(), "d": args.dist_line, "nu": args.nu,
               "value": resolvent_kernel(geom, args.dist_line, args.nu)}
    else:
        if args.x_dists is None or args.y_dists is None:
            raise UsageError("the Krein correction needs both --x-dists and --y-dists")
        geom, cfg = problem_from_args(args)
        corr = krein_correction(geom, cfg, args.nu, args.x_dists, args.y_dists)
        out = config_to_dict(geom, cfg)
        out.update(nu=args.nu, correction=corr.value, pole_proximity=corr.pole_proximity,
                   near_pole=corr.near_pole)
    if args.format == "csv":
        keys = [k for k in out if not isinstance(out[k], (dict, list))]
        _emit(_csv(keys, [[out[k] for k in keys]]), args.output)
    else:
        _emit(_json(out), args.output)
    return EXIT_OK


COMMANDS = {
    "spectrum": run_spectrum,
    "criteria": run_criteria,
    "sweep": run_sweep,
    "heatkernel": run_heatkernel,
    "resolvent": run_resolvent,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports its own usage errors with code 2
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (SpectrumError, QuadratureError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"spectra: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ConfigurationError as exc:
        print("spectra: invalid configuration:", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        return EXIT_INVALID
    except (UsageError, DomainError, ValueError) as exc:
        print(f"spectra: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
