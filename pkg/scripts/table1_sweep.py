"""Conservation and eps_f sweep over grid size and greedy tolerance.

First writes a 64-point reference (skipped when it already exists), then
sweeps N in {32, 64} and epsilon in {1e-10, 1e-14, 1e-16} against it.
Results land in <out>/sweep_summary.csv.
"""

import argparse
import os

from pgdvlasov.config import build_config
from pgdvlasov.runner import execute, sweep

BASE = [
    ("scenario.name", "landau1d", None),
    ("scenario.n_steps", "4000", None),
]

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="runs/table1")
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args()
    ref = os.path.join(args.out, "reference")
    if not os.path.exists(os.path.join(ref, "snapshots", "index.csv")):
        execute(build_config(BASE + [
            ("scenario.n_x", "64", None), ("scenario.n_v", "64", None),
            ("solver.epsilon", "1e-14", None), ("output.save_reference", "true", None),
            ("output.dir", ref, None),
        ]))
    grid = {"solver.epsilon": ["1e-10", "1e-14", "1e-16"]}
    for n in ("32", "64"):
        base = BASE + [
            ("scenario.n_x", n, None), ("scenario.n_v", n, None),
            ("output.reference", ref, None),
        ]
        for row in sweep(base, grid, os.path.join(args.out, f"n{n}"), jobs=args.jobs):
            print(row)
