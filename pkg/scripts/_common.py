"""Shared helpers for the experiment scripts."""

import argparse
import logging

from pgdvlasov.config import build_config
from pgdvlasov.runner import execute


def parser(description, out):
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--out", default=out, help="output directory")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a configuration key")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def run(pairs, args):
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    pairs = list(pairs) + [("output.dir", args.out, None)]
    pairs += [tuple(s.split("=", 1)) + (None,) for s in args.set]
    cfg = build_config(pairs)
    res = execute(cfg, progress_every=100 if args.verbose else 0)
    s = res.summary
    if s is not None:
        print(f"eps_m={s.eps_m:.3e} eps_p={s.eps_p:.3e} eps_h={s.eps_h:.3e}"
              + ("" if s.eps_f is None else f" eps_f={s.eps_f:.3e}"))
    print(f"final rank={res.rank_rows[-1][1]}  wall={res.wall_time:.1f}s  outputs in {args.out}")
    return res
