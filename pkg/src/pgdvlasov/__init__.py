"""Low-rank Vlasov-Poisson solver built on greedy separated representations."""

from pgdvlasov.grid import (
    Boundary,
    Grid1D,
    PhaseGrid,
    assemble_phase_grid,
    build_grid,
    centered_difference,
    uniform_phase_grid,
)
from pgdvlasov.tensor import (
    Metric,
    SeparatedFunction,
    TensorizedOperator,
    apply,
    concat,
    inner_h,
    norm_h,
    read_snapshot,
    riesz_function,
    scale,
    to_riesz,
    write_snapshot,
)
from pgdvlasov.pgd import (
    ALSBreakdown,
    GreedyReport,
    SolverTolerances,
    als_rank1,
    kappa_bound,
    pgd_fp,
    pod,
)
from pgdvlasov.field import FieldState, compute_fields, density, solve_poisson
from pgdvlasov.stepper import StepConfig, StepError, StepInfo, run, verlet_step

__all__ = [
    "ALSBreakdown",
    "Boundary",
    "FieldState",
    "GreedyReport",
    "Grid1D",
    "Metric",
    "PhaseGrid",
    "SeparatedFunction",
    "SolverTolerances",
    "StepConfig",
    "StepError",
    "StepInfo",
    "TensorizedOperator",
    "als_rank1",
    "apply",
    "assemble_phase_grid",
    "build_grid",
    "centered_difference",
    "compute_fields",
    "concat",
    "density",
    "inner_h",
    "kappa_bound",
    "norm_h",
    "pgd_fp",
    "pod",
    "read_snapshot",
    "riesz_function",
    "run",
    "scale",
    "solve_poisson",
    "to_riesz",
    "uniform_phase_grid",
    "verlet_step",
    "write_snapshot",
]
