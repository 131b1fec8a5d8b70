"""Command-line entry points: run, preset, verify and convergence."""
from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import dump_config, parse_config, write_config
from .errors import InvalidConfigError, InvalidRequestError, NonconvergenceError, PorofemError
from .output import time_tag, write_csv, write_profile_csv, write_vtk_series
from .problems import HOUR, PROBLEMS, get_preset, run_preset
from .verification import spatial_convergence, verify_terzaghi

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_NONCONVERGED = 3

log = logging.getLogger("porofem")


def _load(problem, path):
    if path:
        return parse_config(path, problem=problem).preset
    if problem is None:
        raise InvalidConfigError("give --problem or --config")
    return get_preset(problem)


def write_run_outputs(problem, result, out_dir):
    """All files of a run: echoed config, profiles, VTK snapshots, per-step series."""
    os.makedirs(out_dir, exist_ok=True)
    preset = problem.preset
    paths = [os.path.join(out_dir, "config.ini")]
    write_config(preset, paths[0])
    for t in [0.0] + list(result.times):
        path = os.path.join(out_dir, f"profile_t{time_tag(t)}s.csv")
        paths.append(write_profile_csv(problem, result, t, path))
    paths += write_vtk_series(problem, [result.initial] + list(result.snapshots), out_dir)
    keys = sorted({k for s in result.steps for k in s if k not in ("t", "step")})
    if keys:
        rows = [[s["t"]] + [float(s[k]) for k in keys] for s in result.steps]
        path = os.path.join(out_dir, "steps.csv")
        units = {"center_uy": "m", "p_norm": "Pa", "bottom_w_y": "m/s", "outflow_consistent": "m^2/s"}
        write_csv(path, ["t"] + keys, ["s"] + [units.get(k, "-") for k in keys], rows,
                  comment=f"{preset.problem} per-step diagnostics")
        paths.append(path)
    return paths


def cmd_run(args):
    preset = _load(args.problem, args.config)
    problem, result = run_preset(preset, workers=args.workers)
    paths = write_run_outputs(problem, result, args.out)
    print(f"{preset.problem}: {len(result.steps)} steps, {len(paths)} files in {args.out}")
    return EXIT_OK


def cmd_preset(args):
    preset = get_preset(args.problem)
    if args.out == "-":
        sys.stdout.write(dump_config(preset))
    else:
        write_config(preset, args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_verify(args):
    preset = _load("mp1", args.config)
    check = verify_terzaghi(preset, workers=args.workers)
    print("\n".join(check.lines()))
    return EXIT_OK if check.passed else EXIT_VERIFY_FAILED


def cmd_convergence(args):
    if args.problem != "mp1":
        raise InvalidConfigError("convergence studies are available for mp1 only")
    if args.levels < 2:
        raise InvalidConfigError("--levels must be at least 2")
    preset = _load("mp1", args.config)
    study = spatial_convergence(preset, levels=args.levels, h0=args.h0, dt=args.dt * HOUR, workers=args.workers)
    print("h [m]: " + ", ".join(f"{h:g}" for h in study.h))
    for t in sorted(study.errors):
        errs = ", ".join(f"{e:.4e}" for e in study.errors[t])
        print(f"t = {t / HOUR:6g} hr  errors {errs}  order {study.orders[t]:.3f}"
              f"  (exact-series order {study.continuous_orders[t]:.3f})")
    print(f"minimum order {study.min_order:.3f}: {'PASS' if study.passed else 'FAIL'}")
    return EXIT_OK if study.passed else EXIT_VERIFY_FAILED


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="porofem", description=__doc__)
    p.add_argument("--workers", type=int, default=1, help="assembly worker threads (default 1)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run a model problem and write CSV/VTK output")
    r.add_argument("--problem", choices=PROBLEMS)
    r.add_argument("--config", help="INI file overriding the preset")
    r.add_argument("--out", required=True, help="output directory")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("preset", help="write the default configuration of a problem")
    s.add_argument("--problem", choices=PROBLEMS, required=True)
    s.add_argument("--out", default="-", help="output file ('-' for stdout)")
    s.set_defaults(func=cmd_preset)

    v = sub.add_parser("verify", help="verification against analytical solutions")
    v.add_argument("target", choices=("terzaghi",))
    v.add_argument("--config", help="INI file for the mp1 run")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("convergence", help="mesh refinement study")
    c.add_argument("--problem", choices=PROBLEMS, default="mp1")
    c.add_argument("--levels", type=int, default=3)
    c.add_argument("--h0", type=float, default=0.04, help="coarsest element size [m]")
    c.add_argument("--dt", type=float, default=0.01, help="time step [hr]")
    c.add_argument("--config", help="INI file for the mp1 run")
    c.set_defaults(func=cmd_convergence)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.workers < 1:
        print("porofem: error: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except InvalidConfigError as exc:
        print("porofem: invalid configuration", file=sys.stderr)
        for e in exc.errors:
            print(f"  {e}", file=sys.stderr)
        return EXIT_CONFIG
    except InvalidRequestError as exc:
        print(f"porofem: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonconvergenceError as exc:
        print(f"porofem: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except PorofemError as exc:
        print(f"porofem: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except OSError as exc:
        print(f"porofem: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
