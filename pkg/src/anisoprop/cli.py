"""Command-line front end: ``anisoprop {spectrum,trajectory,action,kernel,evolve,verify}``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__, checks
from .action import CROSS_FACTOR, action_boundary, action_closed, write_coefficients_csv
from .classical import Endpoints, modes_from_initial, solve_modes, write_trajectory_csv
from .errors import CausticError, GridError
from .evolve import (
    CatState1DSpec,
    Grid2D,
    cat_state,
    gaussian,
    observables,
    propagate,
    write_field_binary,
    write_field_csv,
)
from .model import OscillatorConfig
from .propagator import Gauge, kernel, write_kernel_grid
from .spectrum import KAPPA, write_levels_csv

FLAGSHIP_DICT = {"omega1": 2.0, "omega2": 2.0, "omega0": 3.0, "m": 1.0, "hbar": 1.0}


@dataclass
class RunManifest:
    command: str
    config: dict
    outputs: list = field(default_factory=list)
    calibration: dict = field(default_factory=lambda: {"kappa": KAPPA, "cross_factor": CROSS_FACTOR})
    version: str = __version__
    arguments: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def write(self, out_dir: Path) -> Path:
        path = out_dir / f"manifest_{self.command}.json"
        self.outputs.append(str(path))
        path.write_text(json.dumps(asdict(self), indent=2, default=repr))
        return path


def _load_config(path):
    if path is None:
        return OscillatorConfig.from_dict(FLAGSHIP_DICT)
    return OscillatorConfig.from_json(path)


def _times(spec):
    """``t0:t1:n`` for a linspace, otherwise a comma-separated list."""
    if ":" in spec:
        t0, t1, n = spec.split(":")
        return np.linspace(float(t0), float(t1), int(n))
    return np.array([float(v) for v in spec.split(",")])


def _cmd_spectrum(args, config, out, manifest):
    path = out / "levels.csv"
    write_levels_csv(path, config, args.count, args.kappa)
    manifest.outputs.append(str(path))


def _cmd_trajectory(args, config, out, manifest):
    if args.endpoints:
        ep = Endpoints(*args.endpoints)
        mc = solve_modes(ep, config)
        times = _times(args.times) if args.times else np.linspace(0.0, ep.T, 101)
    elif args.initial:
        mc = modes_from_initial(*args.initial, config)
        times = _times(args.times or "0:10:201")
    else:
        raise SystemExit("trajectory needs --endpoints or --initial")
    path = out / "trajectory.csv"
    write_trajectory_csv(path, mc, config, times)
    manifest.outputs.append(str(path))


def _cmd_action(args, config, out, manifest):
    if args.endpoints:
        ep = Endpoints(*args.endpoints)
        result = {"closed": action_closed(ep, config), "boundary": action_boundary(ep, config)}
        path = out / "action.json"
        path.write_text(json.dumps(result, indent=2))
        manifest.outputs.append(str(path))
        print(json.dumps(result))
    if args.coefficients:
        path = out / "coefficients.csv"
        write_coefficients_csv(path, config, _times(args.coefficients))
        manifest.outputs.append(str(path))


def _cmd_kernel(args, config, out, manifest):
    gauge = Gauge(args.gauge)
    x1, y1 = args.source
    if args.point:
        value = kernel(Endpoints(x1, y1, *args.point, args.t), config, gauge).value
        print(f"{value.real!r} {value.imag!r}")
        path = out / "kernel_point.json"
        path.write_text(json.dumps({"re": value.real, "im": value.imag, "t": args.t, "gauge": gauge.value}))
        manifest.outputs.append(str(path))
        return
    x0, x1_, nx, y0, y1_, ny = args.grid
    xs = np.linspace(x0, x1_, int(nx))
    ys = np.linspace(y0, y1_, int(ny))
    path = out / f"kernel.{args.format}"
    write_kernel_grid(path, config, args.t, x1, y1, xs, ys, gauge)
    manifest.outputs.append(str(path))


def _initial_state(args, config):
    grid = Grid2D.square(args.grid_points, args.half_width)
    if args.state == "gaussian":
        return gaussian(grid, args.x0, args.y0, args.px, args.py, args.sigma, args.sigma, config.hbar)
    return cat_state(grid, CatState1DSpec(args.a0, args.sigma2), args.sigma_y)


def _cmd_evolve(args, config, out, manifest):
    psi0 = _initial_state(args, config)
    rows = []
    for i, t in enumerate(_times(args.times)):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            psi = propagate(psi0, config, float(t))
        manifest.warnings.extend(f"t={t!r}: {w.message}" for w in caught)
        stem = out / f"field_{i:04d}"
        if args.format == "binary":
            path = stem.with_suffix(".bin")
            write_field_binary(path, psi)
        else:
            path = stem.with_suffix(".csv")
            write_field_csv(path, psi)
        manifest.outputs.append(str(path))
        obs = observables(psi, reference=psi0, hbar=config.hbar)
        rows.append([float(t), obs["norm"], obs["mean_x"], obs["mean_y"], obs["mean_x2"], obs["mean_y2"],
                     obs["autocorrelation"], psi.escaped])
    path = out / "observables.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("t", "norm", "mean_x", "mean_y", "mean_x2", "mean_y2", "autocorrelation", "escaped"))
        for r in rows:
            writer.writerow([repr(v) for v in r[:-1]] + [int(r[-1])])
    manifest.outputs.append(str(path))


def _cmd_verify(args, config, out, manifest):
    criteria = None if args.suite == "all" else checks.SUITES[args.suite]
    results = checks.run_checks(criteria, seed=args.seed, artifact_dir=out)
    for r in results:
        print(r.line())
    path = out / f"verify_{args.suite}.json"
    path.write_text(json.dumps([r.to_dict() for r in results], indent=2, default=repr))
    manifest.outputs.append(str(path))
    calib = out / "calibration.json"
    if calib.exists():
        manifest.outputs.append(str(calib))
    return 0 if all(r.passed for r in results) else 1


COMMANDS = {
    "spectrum": _cmd_spectrum,
    "trajectory": _cmd_trajectory,
    "action": _cmd_action,
    "kernel": _cmd_kernel,
    "evolve": _cmd_evolve,
    "verify": _cmd_verify,
}


def _add_global_flags(parser, defaults):
    # flags are accepted before or after the subcommand; on the subcommand they
    # default to SUPPRESS so an unset flag does not clobber one given earlier
    d = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
    parser.add_argument("--config", default=d(None),
                        help="JSON file with omega1, omega2, omega0, m, hbar (default: flagship)")
    parser.add_argument("--out", default=d("."), help="output directory, created if missing (default: .)")
    parser.add_argument("--threads", type=int, default=d(None), help="cap BLAS/OpenMP threads")
    parser.add_argument("--seed", type=int, default=d(0), help="seed for randomized verification draws (default: 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="anisoprop", description=__doc__)
    _add_global_flags(parser, defaults=True)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def _sub(sub, name, help):
        p = sub.add_parser(name, help=help)
        _add_global_flags(p, defaults=False)
        return p

    p = _sub(sub, "spectrum", help="lowest K levels as CSV")
    p.add_argument("--count", "-K", type=int, default=10)
    p.add_argument("--kappa", type=float, default=KAPPA)

    p = _sub(sub, "trajectory", help="classical path as CSV")
    p.add_argument("--endpoints", type=float, nargs=5, metavar=("X1", "Y1", "X2", "Y2", "T"))
    p.add_argument("--initial", type=float, nargs=4, metavar=("X", "Y", "VX", "VY"))
    p.add_argument("--times", help="t0:t1:n or comma list")

    p = _sub(sub, "action", help="classical action and coefficient traces")
    p.add_argument("--endpoints", type=float, nargs=5, metavar=("X1", "Y1", "X2", "Y2", "T"))
    p.add_argument("--coefficients", metavar="TIMES", help="write a1..f2, D at t0:t1:n or a comma list")

    p = _sub(sub, "kernel", help="propagator at a point or on a grid")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--source", type=float, nargs=2, default=(0.0, 0.0), metavar=("X1", "Y1"))
    target = p.add_mutually_exclusive_group(required=True)
    target.add_argument("--point", type=float, nargs=2, metavar=("X2", "Y2"))
    target.add_argument("--grid", type=float, nargs=6, metavar=("XMIN", "XMAX", "NX", "YMIN", "YMAX", "NY"))
    p.add_argument("--gauge", choices=[g.value for g in Gauge], default=Gauge.SYMMETRIC.value)
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = _sub(sub, "evolve", help="propagate a Gaussian or cat state")
    p.add_argument("--state", choices=("gaussian", "cat"), default="gaussian")
    p.add_argument("--times", default="0,0.3", help="t0:t1:n or comma list")
    p.add_argument("--grid-points", type=int, default=128)
    p.add_argument("--half-width", type=float, default=6.0)
    p.add_argument("--x0", type=float, default=0.0)
    p.add_argument("--y0", type=float, default=0.0)
    p.add_argument("--px", type=float, default=0.0)
    p.add_argument("--py", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--a0", type=float, default=3.0)
    p.add_argument("--sigma2", type=float, default=0.125)
    p.add_argument("--sigma-y", type=float, default=math.sqrt(0.125))
    p.add_argument("--format", choices=("csv", "binary"), default="binary")

    p = _sub(sub, "verify", help="run acceptance checks")
    p.add_argument("suite", nargs="?", default="all", choices=("all", *checks.SUITES))
    return parser


def _format_caustic(exc: CausticError) -> str:
    lines = [f"error: {exc}"]
    if exc.caustic_times:
        lines.append("conjugate times nearby: " + ", ".join(f"{t:.12g}" for t in exc.caustic_times))
        if exc.t is not None:
            edges = [0.0, *exc.caustic_times]
            gaps = [(a, b) for a, b in zip(edges, edges[1:]) if b - a > 1e-9]
            near = [g for g in gaps if abs(g[0] - exc.t) < 1e-6 or abs(g[1] - exc.t) < 1e-6]
            if near:
                lines.append("safe windows: " + ", ".join(f"({a:.12g}, {b:.12g})" for a, b in near))
    return "\n".join(lines)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _load_config(args.config)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    arguments = {k: v for k, v in vars(args).items() if k != "command"}
    manifest = RunManifest(args.command, config.to_dict(), arguments=arguments)
    limits = threadpool_limits(limits=args.threads) if args.threads else None
    try:
        status = COMMANDS[args.command](args, config, out, manifest) or 0
    except CausticError as exc:
        print(_format_caustic(exc), file=sys.stderr)
        return 3
    except (GridError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    finally:
        if limits is not None:
            limits.restore_original_limits()
    manifest.write(out)
    return status


if __name__ == "__main__":
    sys.exit(main())
