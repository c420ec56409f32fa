"""Linear Landau damping at 64 x 64, 4000 steps, epsilon 1e-14.

Writes diagnostics, ranks and the decay fit; the measured rate should sit
near 0.153.
"""

from _common import parser, run

PAIRS = [
    ("scenario.name", "landau1d", None),
    ("scenario.n_x", "64", None),
    ("scenario.n_v", "64", None),
    ("scenario.n_steps", "4000", None),
    ("solver.epsilon", "1e-14", None),
    ("output.save_reference", "true", None),
]

if __name__ == "__main__":
    args = parser(__doc__, "runs/landau64").parse_args()
    res = run(PAIRS, args)
    if res.fit is not None:
        print(f"gamma_fit={res.fit.gamma_fit:.4f} from {res.fit.peaks_used} peaks")
