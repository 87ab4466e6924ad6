"""Command-line entry point: ``meanfield {validate,simulate,meanfield,bounds,converge}``.

Exit codes: 0 success, 2 configuration or model error, 3 I/O error,
4 simulation or numerical failure, 5 bound violation.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import report as fmt
from .bounds import theorem_envelope
from .errors import (
    BoundViolated,
    ConfigError,
    MeanFieldError,
    ModelError,
    NegativeRate,
    NonFinite,
    OffLattice,
    ParseError,
    SimulationError,
)
from .model import builtin, load_model, parse_params
from .ode import meanfield_trajectory, reference_moment_trajectory
from .sim import run_ensemble
from .study import RunConfig, default_resolution, emit_report, ensure_bound_holds, run_convergence_study

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_RUNTIME, EXIT_BOUND = 0, 2, 3, 4, 5

log = logging.getLogger("meanfield")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _seed(text):
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="meanfield", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def model_args(p):
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--model", help="path to a JSON model file")
        src.add_argument("--builtin", help="sis, bipartite_si or pure_death")
        p.add_argument("--param", nargs="+", action="extend", default=[], metavar="NAME=VALUE")

    def run_args(p, multi_n=False):
        p.add_argument("--n", type=_int_list, required=True,
                       help="comma-separated system sizes" if multi_n else "system size")
        p.add_argument("--x0", type=_float_list, required=True, help="initial density, comma-separated")
        p.add_argument("--t-end", type=float, default=5.0)
        p.add_argument("--grid", type=int, default=51, help="number of output times")
        p.add_argument("--out", default=".")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("validate", help="parse and check a model")
    model_args(p)

    p = sub.add_parser("simulate", help="run one ensemble and write its moments")
    model_args(p)
    run_args(p)
    p.add_argument("--replicas", type=int, default=1000)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("meanfield", help="integrate the mean-field ODE")
    model_args(p)
    p.add_argument("--x0", type=_float_list, required=True)
    p.add_argument("--t-end", type=float, default=5.0)
    p.add_argument("--grid", type=int, default=51)
    p.add_argument("--ode-step", type=float, default=1e-3)
    p.add_argument("--out", default=".")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("bounds", help="compute the constants of the error envelope")
    model_args(p)
    p.add_argument("--n", type=_int_list, required=True)
    p.add_argument("--x0", type=_float_list, required=True)
    p.add_argument("--t-end", type=float, default=5.0)
    p.add_argument("--grid", type=int, default=51)
    p.add_argument("--bounds-grid", type=int, default=None)
    p.add_argument("--out", default=".")

    p = sub.add_parser("converge", help="full convergence study over a list of n")
    model_args(p)
    run_args(p, multi_n=True)
    p.add_argument("--replicas", type=int, default=2000)
    p.add_argument("--ode-step", type=float, default=1e-3)
    p.add_argument("--bounds-grid", type=int, default=None)
    p.add_argument("--seed", type=_seed, default=None)
    p.add_argument("--threads", type=int, default=1)
    return parser


def _config(args, **overrides) -> RunConfig:
    values = dict(
        n_list=tuple(getattr(args, "n", None) or ()),
        x0=tuple(args.x0),
        builtin_name=args.builtin,
        params=parse_params(args.param),
        model_path=args.model,
        t_end=args.t_end,
        grid_points=args.grid,
        out_dir=args.out,
    )
    for name, attr in (("replicas", "replicas"), ("ode_step", "ode_step"), ("seed", "seed"),
                       ("bounds_resolution", "bounds_grid"), ("workers", "threads")):
        if hasattr(args, attr):
            values[name] = getattr(args, attr)
    values.update(overrides)
    return RunConfig(**values)


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_validate(args):
    if args.builtin is not None:
        model = builtin(args.builtin, parse_params(args.param))
    else:
        model = load_model(Path(args.model).read_text(encoding="utf-8"))
    print(f"ok: k={model.k}, {len(model.jumps)} jumps, params={dict(model.params)}")
    return EXIT_OK


def cmd_simulate(args):
    if len(args.n) != 1:
        raise ConfigError("simulate takes a single n")
    cfg = _config(args)
    model = cfg.load()
    stats = run_ensemble(model, cfg.n_list[0], cfg.x0, cfg.grid, cfg.replicas, cfg.seed, workers=cfg.workers)
    out = _out_dir(cfg.out_dir)
    if args.format == "csv":
        fmt.write_text(out / "trajectory.csv", fmt.trajectory_csv(stats))
    else:
        fmt.write_text(out / "trajectory.json", fmt.trajectory_json(stats))
    return EXIT_OK


def cmd_meanfield(args):
    cfg = _config(args, n_list=(1,))
    model = cfg.load()
    sol = reference_moment_trajectory(meanfield_trajectory(model, cfg.x0, cfg.t_end, cfg.ode_step, cfg.grid))
    header = ["t", *[f"x{i + 1}" for i in range(model.k)], "sumsq"]
    rows = [[t, *s] for t, s in zip(sol.times, sol.states)]
    out = _out_dir(cfg.out_dir)
    if args.format == "csv":
        fmt.write_text(out / "meanfield.csv", fmt.csv_text(header, rows))
    else:
        fmt.write_text(out / "meanfield.json", fmt.json_text({"columns": header, "rows": rows}))
    return EXIT_OK


def cmd_bounds(args):
    cfg = _config(args)
    model = cfg.load()
    resolution = cfg.bounds_resolution or default_resolution(model.k)
    reports = {}
    for n in cfg.n_list:
        bound, rep = theorem_envelope(model, n, cfg.x0, cfg.grid, resolution)
        reports[str(n)] = {**rep.as_dict(), "moment_bound_end": float(bound[-1])}
    out = _out_dir(cfg.out_dir)
    fmt.write_text(out / "bounds.json", fmt.json_text({"model": cfg.model_label(), "params": dict(model.params),
                                                      "bounds": reports}))
    return EXIT_OK


def cmd_converge(args):
    if args.seed is None:
        raise ConfigError("converge requires --seed")
    cfg = _config(args)
    report = run_convergence_study(cfg)
    emit_report(report, args.format, cfg.out_dir)
    for r in report.rows:
        log.info("n=%d sup_mse=%.6g margin=%.6g", r.n, r.sup_mse, r.envelope_margin)
    if report.slope is not None:
        log.info("log-log slope of sup mse: %.4f", report.slope)
    ensure_bound_holds(report)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "meanfield": cmd_meanfield,
    "bounds": cmd_bounds,
    "converge": cmd_converge,
}


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, BoundViolated):
        return EXIT_BOUND
    if isinstance(exc, (ConfigError, ParseError, OffLattice)):
        return EXIT_CONFIG
    if isinstance(exc, (SimulationError, NegativeRate, NonFinite)):
        return EXIT_RUNTIME
    if isinstance(exc, ModelError):
        return EXIT_CONFIG
    if isinstance(exc, OSError):
        return EXIT_IO
    if isinstance(exc, MeanFieldError):
        return EXIT_RUNTIME
    return EXIT_CONFIG


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (MeanFieldError, OSError, ValueError) as exc:
        code = exit_code_for(exc)
        print(f"meanfield {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
