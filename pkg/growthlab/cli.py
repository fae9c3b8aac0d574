"""Command-line front end.

::

    growthlab simulate --N 10 --reps 3 --seed 7
    growthlab moments --N 3 --numeric-mode rational
    growthlab limits --t-grid 0,0.5,1 --t-ref 0.3
    growthlab diffusion --paths 2 --method euler
    growthlab verify --suite martingales --N 100 --reps 10000 --seed 7

Tables are written as CSV (default) or JSON, reports of ``verify`` as a
JSON array.  Exit status: 0 on success, 1 when a check fails, 2 on a usage
error.
"""

import argparse
import csv
from dataclasses import dataclass, field
from fractions import Fraction
import json
import os
import sys

import numpy as np
from tqdm import tqdm

from growthlab import __version__
from growthlab.asymptotics import DIFFUSION_METHODS, cov_kernel, phi, psi, simulate_limit_diffusion
from growthlab.constants import DEFAULT_SEED, DEFAULT_T_REF, sampler_names
from growthlab.model import (
    run_replicates,
    silent_progress,
    simulate_insertion,
    simulate_pool,
    simulate_urn,
)
from growthlab.moments import MODES, moment_table
from growthlab.state import ModelParams, SeedSpec, Trajectory, n_pairs
from growthlab.urn import SAMPLING_METHODS
from growthlab.verify import SUITES, SuiteConfig, Thresholds, all_passed, run_suite

COMMANDS = ("simulate", "moments", "limits", "diffusion", "verify")
FORMATS = ("csv", "json")
SEED_ENV = "GROWTHLAB_SEED"
DEFAULT_GRID = tuple(i / 10 for i in range(11))


def _parse_grid(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of times: {text!r}")


def _parse_threshold(text):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"threshold {key!r} needs a number, got {value!r}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--N", type=int, help="number of vertices")
    common.add_argument("--reps", type=int, help="number of replicates")
    common.add_argument(
        "--seed", type=int, help=f"master seed (default ${SEED_ENV} or {DEFAULT_SEED})"
    )
    common.add_argument(
        "--t-grid", "--t", dest="t_grid", type=_parse_grid, help="comma-separated times"
    )
    common.add_argument("--format", choices=FORMATS, help="output format")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--threads", type=int, default=1, help="worker threads, 0 for all cores")
    common.add_argument("--progress", action="store_true", help="show progress bars on stderr")

    parser = argparse.ArgumentParser(
        prog="growthlab",
        description="Random graph growth by uniform sampling from a growing pool.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", parents=[common], help="simulate trajectories")
    simulate.add_argument("--sampler", choices=sorted(sampler_names), default="urn")
    simulate.add_argument("--method", choices=SAMPLING_METHODS, help="increment sampler of 'urn'")
    simulate.add_argument("--track-edges", action="store_true", help="record edge occupancies")

    moments = sub.add_parser("moments", parents=[common], help="exact mean and variance table")
    moments.add_argument("--numeric-mode", choices=MODES, default="float")

    limits = sub.add_parser("limits", parents=[common], help="limit curves phi, psi and covariance")
    limits.add_argument("--t-ref", type=float, default=DEFAULT_T_REF)

    diffusion = sub.add_parser("diffusion", parents=[common], help="paths of the limit diffusion")
    diffusion.add_argument("--paths", type=int, default=1)
    diffusion.add_argument("--method", choices=DIFFUSION_METHODS, default="exact")

    verify = sub.add_parser("verify", parents=[common], help="run verification suites")
    verify.add_argument(
        "--suite", default="all", help=f"comma-separated subset of {sorted(SUITES)}"
    )
    verify.add_argument("--threshold", type=_parse_threshold, action="append", default=[])
    verify.add_argument("--m", type=int, help="terminal lag of the last-stage suites")
    verify.add_argument("--paths", type=int, help="paths of the diffusion suite")
    return parser


@dataclass
class RunConfig:
    """Validated settings of one CLI invocation."""

    command: str
    N: int = None
    reps: int = None
    seed: int = DEFAULT_SEED
    t_grid: tuple = DEFAULT_GRID
    output_path: str = None
    format: str = "csv"
    suite: tuple = ("all",)
    numeric_mode: str = "float"
    threads: int = 1
    progress: bool = False
    track_edges: bool = False
    sampler: str = "urn"
    method: str = None
    t_ref: float = DEFAULT_T_REF
    m: int = None
    paths: int = None
    thresholds: Thresholds = field(default_factory=Thresholds)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}, expected one of {COMMANDS}")
        if self.N is not None and self.N < 2:
            raise ValueError(f"--N must be >= 2, got {self.N}")
        if self.command in ("simulate", "moments") and self.N is None:
            raise ValueError(f"{self.command} needs --N")
        if self.reps is not None and self.reps < 1:
            raise ValueError(f"--reps must be >= 1, got {self.reps}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        grid = np.asarray(self.t_grid, dtype=np.float64)
        if not len(grid) or np.any(grid < 0) or np.any(grid > 1) or np.any(np.diff(grid) <= 0):
            raise ValueError("--t-grid must be strictly increasing times in [0, 1]")
        if self.threads < 0:
            raise ValueError(f"--threads must be >= 0, got {self.threads}")
        if self.track_edges and self.sampler != "pool":
            raise ValueError("--track-edges needs --sampler pool")
        if self.method is not None and self.command == "simulate" and self.sampler != "urn":
            raise ValueError("--method applies to --sampler urn only")
        if not 0 <= self.t_ref < 1:
            raise ValueError(f"--t-ref must lie in [0, 1), got {self.t_ref}")
        unknown = [name for name in self.suite if name != "all" and name not in SUITES]
        if unknown:
            raise ValueError(f"unknown suites {unknown}, expected some of {sorted(SUITES)}")

    @classmethod
    def from_args(cls, args, environ=None):
        """Build from parsed arguments, taking the seed from ``--seed``,
        then ``$GROWTHLAB_SEED``, then the default."""
        environ = os.environ if environ is None else environ
        seed = args.seed
        if seed is None and environ.get(SEED_ENV):
            try:
                seed = int(environ[SEED_ENV])
            except ValueError:
                raise ValueError(f"${SEED_ENV} must be an integer, got {environ[SEED_ENV]!r}")
        thresholds = Thresholds().override(**dict(getattr(args, "threshold", [])))
        suite = tuple(s.strip() for s in getattr(args, "suite", "all").split(",") if s.strip())
        fmt = args.format or ("json" if args.command == "verify" else "csv")
        return cls(
            command=args.command,
            N=args.N,
            reps=args.reps,
            seed=DEFAULT_SEED if seed is None else seed,
            t_grid=args.t_grid if args.t_grid is not None else DEFAULT_GRID,
            output_path=args.out,
            format=fmt,
            suite=suite or ("all",),
            numeric_mode=getattr(args, "numeric_mode", "float"),
            threads=args.threads,
            progress=args.progress,
            track_edges=getattr(args, "track_edges", False),
            sampler=getattr(args, "sampler", "urn"),
            method=getattr(args, "method", None),
            t_ref=getattr(args, "t_ref", DEFAULT_T_REF),
            m=getattr(args, "m", None),
            paths=getattr(args, "paths", None),
            thresholds=thresholds,
        )


def _number(value):
    """Locale-free text of a number; integral floats lose their ``.0`` and
    signed zeros their sign."""
    if isinstance(value, (Fraction, int, np.integer)):
        return str(value)
    value = float(value)
    if value == 0:
        return "0"
    text = repr(value)
    return text[:-2] if text.endswith(".0") else text


def _write_table(config, header, rows, stream):
    if config.format == "json":
        payload = [dict(zip(header, (_json_number(v) for v in row))) for row in rows]
        _write_json(payload, stream)
        return
    writer = csv.writer(stream, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_number(v) for v in row])


def _json_number(value):
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    return float(value)


def _write_json(payload, stream):
    stream.write(json.dumps(payload, sort_keys=True, indent=2))
    stream.write("\n")


def _trajectories(config, progress):
    params = ModelParams(config.N)
    seed = SeedSpec(config.seed)
    reps = config.reps or 1
    if config.sampler == "pool":
        return run_replicates(
            simulate_pool, params, reps, seed, config.threads, progress,
            track_edges=config.track_edges,
        )
    if config.sampler == "insertion":
        runs = run_replicates(simulate_insertion, params, reps, seed, config.threads, progress)
        return [Trajectory.from_composition(params, comp) for comp in runs]
    return run_replicates(
        simulate_urn, params, reps, seed, config.threads, progress,
        method=config.method or "sequential",
    )


def _simulate(config, stream, progress):
    runs = _trajectories(config, progress)
    if config.format == "json":
        payload = []
        for r, run in enumerate(runs):
            item = {"replicate": r, "x": run.x.tolist(), "delta_last": int(run.delta_last)}
            if run.edge_times is not None:
                item["edges"] = [
                    [int(e["i"]), int(e["j"]), int(e["event"]), float(e["hour"])]
                    for e in run.edge_times
                ]
            payload.append(item)
        _write_json(payload, stream)
        return 0
    rows = []
    for r, run in enumerate(runs):
        increments = run.increments()
        rows += [(r, n, run.X(n), increments[n - 1]) for n in range(1, run.N + 1)]
        # summary row: the complete graph after the last increment
        rows.append((r, run.N + 1, n_pairs(run.N), run.delta_last))
    _write_table(config, ("replicate", "n", "X_n", "delta_X"), rows, stream)
    return 0


def _moments(config, stream, progress):
    table = moment_table(config.N, config.numeric_mode)
    _write_table(config, ("n", "mu", "sigma2"), table.rows(), stream)
    return 0


def _limits(config, stream, progress):
    rows = []
    for t in config.t_grid:
        s, u = sorted((t, config.t_ref))
        rows.append((t, phi(t), psi(t), cov_kernel(s, u)))
    _write_table(config, ("t", "phi", "psi", "cov_t_ref"), rows, stream)
    return 0


def _diffusion(config, stream, progress):
    grid = config.t_grid if config.t_grid[0] == 0 else (0.0,) + tuple(config.t_grid)
    path = simulate_limit_diffusion(
        grid, SeedSpec(config.seed), config.method or "exact", n_paths=config.paths or 1
    )
    if config.format == "json":
        _write_json({"grid": path.grid.tolist(), "paths": path.y.tolist()}, stream)
        return 0
    rows = [(p, t, path.y[p, i]) for p in range(path.n_paths) for i, t in enumerate(path.grid)]
    _write_table(config, ("path", "t", "Y"), rows, stream)
    return 0


def _verify(config, stream, progress):
    suite_config = SuiteConfig(
        seed=SeedSpec(config.seed),
        N=config.N,
        reps=config.reps,
        m=config.m,
        paths=config.paths,
        t_grid=config.t_grid if config.t_grid != DEFAULT_GRID else None,
        thresholds=config.thresholds,
        threads=config.threads,
        progress=progress,
    )
    reports = run_suite(config.suite, suite_config)
    if config.format == "json":
        _write_json([report.to_dict() for report in reports], stream)
    else:
        header = ("name", "test", "statistic", "p_value", "sample_size", "passed")
        rows = [
            (r.name, r.test, r.statistic, "" if r.p_value is None else r.p_value,
             r.sample_size, r.passed)
            for r in reports
        ]
        writer = csv.writer(stream, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, (str, bool)) else _number(v) for v in row])
    return 0 if all_passed(reports) else 1


RUNNERS = {
    "simulate": _simulate,
    "moments": _moments,
    "limits": _limits,
    "diffusion": _diffusion,
    "verify": _verify,
}


def run(config, stream=None):
    """Execute one command and return its exit status.

    Output goes to ``config.output_path`` when set, else to ``stream``
    (default stdout).
    """
    progress = tqdm if config.progress else silent_progress
    if config.output_path:
        with open(config.output_path, "w", newline="", encoding="utf-8") as fh:
            return RUNNERS[config.command](config, fh, progress)
    return RUNNERS[config.command](config, stream or sys.stdout, progress)


def main(argv=None, environ=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = RunConfig.from_args(args, environ)
    except ValueError as exc:
        parser.error(str(exc))
    try:
        return run(config)
    except ValueError as exc:
        parser.error(str(exc))
