"""Two-dimensional Landau damping smoke run at (16^2, 32^2) up to t = 5."""

from _common import parser, run

PAIRS = [
    ("scenario.name", "landau2d", None),
    ("solver.epsilon", "1e-10", None),
]

if __name__ == "__main__":
    args = parser(__doc__, "runs/landau2d").parse_args()
    res = run(PAIRS, args)
    ee = [r.electric_energy for r in res.records]
    print(f"electric energy: {ee[0]:.3e} -> {ee[-1]:.3e}")
