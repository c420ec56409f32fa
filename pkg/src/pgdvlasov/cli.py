"""Command-line front end.

Examples::

    pgdvlasov run --scenario landau1d --nx 64 --nv 64 --nt 4000 --eps 1e-14 --out runs/landau64
    pgdvlasov run --config runs/landau64/run_config.txt --dry-run
    pgdvlasov sweep --scenario landau1d --grid scenario.n_x=32,64 --grid solver.epsilon=1e-14,1e-16 --jobs 2

Exit status: 0 on success, 2 on a configuration error, 3 when a time step
fails (the failing step index is logged), 1 on other errors.
"""

from __future__ import annotations

import argparse
import logging
import sys

from pgdvlasov.config import ConfigError, build_config, format_config, parse_pairs
from pgdvlasov import config as config_module

log = logging.getLogger("pgdvlasov")

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_STEP = 0, 1, 2, 3

# flag -> config key
_FLAG_KEYS = {
    "scenario": "scenario.name",
    "nx": "scenario.n_x",
    "nv": "scenario.n_v",
    "nt": "scenario.n_steps",
    "tf": "scenario.t_f",
    "dt": "scenario.dt",
    "eps": "solver.epsilon",
    "eta": "solver.eta",
    "seed": "solver.seed",
    "out": "output.dir",
    "snapshot_stride": "output.snapshot_stride",
    "reference": "output.reference",
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file (flags override it)")
    p.add_argument("--scenario", help="landau1d | twostream1d | landau2d  [scenario.name]")
    p.add_argument("--nx", help="space points per axis  [scenario.n_x]")
    p.add_argument("--nv", help="velocity points per axis  [scenario.n_v]")
    p.add_argument("--nt", help="number of time steps  [scenario.n_steps]")
    p.add_argument("--dt", help="time step, alternative to --nt  [scenario.dt]")
    p.add_argument("--tf", help="final time  [scenario.t_f]")
    p.add_argument("--eps", help="greedy tolerance epsilon  [solver.epsilon]")
    p.add_argument("--eta", help="ALS stagnation tolerance  [solver.eta]")
    p.add_argument("--seed", help="ALS initialisation seed  [solver.seed]")
    p.add_argument("--out", help="output directory  [output.dir]")
    p.add_argument("--snapshot-stride", help="steps between snapshots, 0 = none  [output.snapshot_stride]")
    p.add_argument("--reference", help="reference run directory for eps_f  [output.reference]")
    p.add_argument("--save-reference", action="store_true",
                   help="write snapshots usable as a later --reference  [output.save_reference]")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="set any configuration key (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pgdvlasov",
        description="Low-rank Vlasov-Poisson runs with Verlet-PGD time stepping.",
        epilog="Configuration keys:\n" + config_module.__doc__.split("::", 1)[1].split("Unknown", 1)[0],
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one configuration")
    _add_common(p_run)
    p_run.add_argument("--dry-run", action="store_true",
                       help="validate and print the resolved configuration, write nothing")
    p_run.add_argument("--progress", type=int, default=500, help="log every N steps with -v")
    p_sw = sub.add_parser("sweep", help="run a Cartesian grid of configurations")
    _add_common(p_sw)
    p_sw.add_argument("--grid", action="append", default=[], metavar="KEY=V1,V2,...",
                      help="parameter axis (repeatable)")
    p_sw.add_argument("--jobs", type=int, default=1, help="concurrent runs")
    p_sw.add_argument("--dry-run", action="store_true", help="list the combinations, run nothing")
    return parser


def _collect_pairs(args) -> list:
    pairs = []
    if args.config:
        with open(args.config) as fh:
            pairs.extend(parse_pairs(fh.read(), args.config))
    for flag, key in _FLAG_KEYS.items():
        val = getattr(args, flag, None)
        if val is not None:
            pairs.append((key, str(val), None))
    if args.dt is not None and args.nt is None:
        # a --dt flag replaces a step count coming from the file
        pairs = [p for p in pairs if p[0] != "scenario.n_steps"]
    if args.nt is not None and args.dt is None:
        pairs = [p for p in pairs if p[0] != "scenario.dt"]
    if args.save_reference:
        pairs.append(("output.save_reference", "true", None))
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        pairs.append((k.strip(), v.strip(), None))
    return pairs


def _parse_grid(items) -> dict:
    grid = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--grid expects KEY=V1,V2,..., got {item!r}")
        k, vals = item.split("=", 1)
        values = [v.strip() for v in vals.split(",") if v.strip()]
        if not values:
            raise ConfigError("empty value list", k.strip())
        grid[k.strip()] = values
    return grid


def cmd_run(args) -> int:
    from pgdvlasov.runner import execute

    cfg = build_config(_collect_pairs(args))
    if args.dry_run:
        sys.stdout.write(format_config(cfg))
        return EXIT_OK
    res = execute(cfg, write=True, progress_every=args.progress if args.verbose else 0)
    if not res.ok:
        log.error("run failed at step %s; partial outputs in %s", res.failed_step, cfg.output.directory)
        log.error("%s", res.error)
        return EXIT_STEP
    s = res.summary
    print(f"eps_m={s.eps_m:.3e} eps_p={s.eps_p:.3e} eps_h={s.eps_h:.3e}"
          + ("" if s.eps_f is None else f" eps_f={s.eps_f:.3e}"))
    if res.fit is not None:
        print(f"gamma_fit={res.fit.gamma_fit:.4f} ({res.fit.peaks_used} peaks)")
    print(f"outputs in {cfg.output.directory} ({res.wall_time:.1f}s)")
    return EXIT_OK


def cmd_sweep(args) -> int:
    from pgdvlasov.runner import expand_grid, sweep

    base = _collect_pairs(args)
    grid = _parse_grid(args.grid)
    out_dir = args.out or "sweep"
    base = [p for p in base if p[0] != "output.dir"]
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1", "jobs")
    if args.dry_run:
        for text in expand_grid(base, grid, out_dir):
            sys.stdout.write(text + "\n")
        return EXIT_OK
    rows = sweep(base, grid, out_dir, jobs=args.jobs)
    for row in rows:
        print(",".join(str(v) for v in row.values()))
    print(f"summary in {out_dir}/sweep_summary.csv")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "run":
            return cmd_run(args)
        return cmd_sweep(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
