"""Verlet-PGD time stepping.

One step advances ``f^(m)`` to ``f^(m+1)`` through three substeps:

(a) implicit force half-step, explicit transport half-step on the right:
    ``(I + P1) f13 = (I - h v.grad_x) f``       solved by fixed-point PGD
(b) implicit transport half-step:
    ``(I + h v.grad_x) f23 = f13``              solved by fixed-point PGD
(c) explicit force half-step with the field of ``f23``:
    ``f1 = (I + Q) f23``                        evaluated, then POD-compressed

with ``h = dt / 2``. Every intermediate is recompressed by POD.

The sign of the force operators ``P1`` and ``Q`` depends on
``force_convention``. ``"physical"`` (default) discretises
``d_t f + v.grad_x f - E.grad_v f = 0``, i.e. ``P1 = -h E.grad_v`` and
``Q = +h E.grad_v``. ``"boxed"`` uses the opposite signs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from pgdvlasov.field import FieldState, compute_fields, force_matrices
from pgdvlasov.grid import PhaseGrid
from pgdvlasov.pgd import SolverTolerances, kappa_bound, pgd_fp, pod
from pgdvlasov.tensor import (
    SeparatedFunction,
    TensorizedOperator,
    apply,
    concat,
    riesz_function,
    to_riesz,
)

log = logging.getLogger(__name__)

FORCE_CONVENTIONS = ("physical", "boxed")


class StepError(RuntimeError):
    """A substep solve failed to converge."""

    def __init__(self, message, step=None, substep=None, contraction=None):
        super().__init__(message)
        self.step = step
        self.substep = substep
        self.contraction = contraction


@dataclass(frozen=True)
class StepConfig:
    """Time step and solver settings.

    ``dt`` may be zero or negative here (degenerate and backward steps are
    useful checks); run configurations enforce ``dt > 0``.
    """

    dt: float
    tol: SolverTolerances = field(default_factory=SolverTolerances)
    recompress: bool = True
    force_convention: str = "physical"

    def __post_init__(self):
        if not np.isfinite(self.dt):
            raise ValueError(f"dt must be finite, got {self.dt}")
        if self.force_convention not in FORCE_CONVENTIONS:
            raise ValueError(
                f"force_convention must be one of {FORCE_CONVENTIONS}, "
                f"got {self.force_convention!r}"
            )

    @property
    def force_sign(self) -> float:
        """Sign of the implicit force operator ``P1``."""
        return -1.0 if self.force_convention == "physical" else 1.0


@dataclass
class StepInfo:
    ranks: tuple = ()
    fp_iterations: tuple = ()
    pod_iterations: tuple = ()
    als_unconverged: int = 0


def force_operator(e_field, grid: PhaseGrid, coeff: float) -> TensorizedOperator:
    """Mass-weighted ``coeff * sum_a F_x(E_a) (x) D_{a,v}``."""
    return TensorizedOperator(
        [(coeff * fx, dv) for fx, dv in zip(force_matrices(e_field, grid), grid.deriv_v)]
    )


def transport_operator(grid: PhaseGrid, coeff: float) -> TensorizedOperator:
    """Mass-weighted ``coeff * sum_a D_{a,x} (x) V_{a,v}``."""
    return TensorizedOperator(
        [(coeff * dx, vv) for dx, vv in zip(grid.deriv_x, grid.vel_mult)]
    )


def _mass_plus(op: TensorizedOperator, grid: PhaseGrid) -> TensorizedOperator:
    return TensorizedOperator([(grid.mass_x, grid.mass_v)] + list(op.terms))


def _contraction(op: TensorizedOperator, grid) -> float:
    return 3 * op.num_terms * kappa_bound(op, grid)


def _solve(op_load, rhs, g0, grid, cfg, label, info):
    atilde = to_riesz(op_load, grid)
    f, rep = pgd_fp(atilde, rhs, g0, grid, cfg.tol)
    info.als_unconverged += rep.als_unconverged
    if not rep.converged:
        c = _contraction(atilde, grid)
        raise StepError(
            f"substep {label}: fixed-point PGD did not reach "
            f"{rep.threshold:.1e} within {cfg.tol.max_rank} iterations "
            f"(last residual {rep.final_injective_residual:.3e}, 3*M*kappa = {c:.3f}); "
            "the time step must be small enough for the fixed point to contract, "
            "reduce dt or loosen epsilon",
            substep=label,
            contraction=c,
        )
    return f, rep.iterations


def _compress(f, grid, cfg, info):
    if not cfg.recompress:
        return f, 0
    g, rep = pod(f, None, grid, cfg.tol)
    info.als_unconverged += rep.als_unconverged
    if not rep.converged:
        log.warning("POD recompression hit max_rank=%d", cfg.tol.max_rank)
    return g, rep.iterations


def verlet_step(
    f: SeparatedFunction,
    grid: PhaseGrid,
    cfg: StepConfig,
    fields: FieldState | None = None,
    freeze_field: bool = False,
):
    """Advance one step. Returns ``(f_next, fields_m, fields_23, StepInfo)``.

    ``fields`` may carry the already computed fields of ``f``. With
    ``freeze_field`` the last substep reuses ``fields`` instead of
    recomputing the field from the intermediate state (a linear step with
    a prescribed field, useful for checks).
    """
    h = 0.5 * cfg.dt
    sgn = cfg.force_sign
    info = StepInfo()
    if fields is None:
        fields = compute_fields(f, grid)

    # (a)
    p1 = force_operator(fields.e_field, grid, sgn * h)
    g = apply(_mass_plus(transport_operator(grid, -h), grid), f)
    fbar, it_a = _solve(p1, riesz_function(g, grid), f, grid, cfg, "a", info)
    f13, pod_a = _compress(fbar, grid, cfg, info)

    # (b)
    p2 = transport_operator(grid, h)
    fbar, it_b = _solve(p2, f13, f13, grid, cfg, "b", info)
    f23, pod_b = _compress(fbar, grid, cfg, info)

    # (c)
    fields23 = fields if freeze_field else compute_fields(f23, grid)
    q = to_riesz(force_operator(fields23.e_field, grid, -sgn * h), grid)
    f1, pod_c = _compress(concat(f23, apply(q, f23)), grid, cfg, info)

    info.ranks = (f13.rank, f23.rank, f1.rank)
    info.fp_iterations = (it_a, it_b)
    info.pod_iterations = (pod_a, pod_b, pod_c)
    return f1, fields, fields23, info


def run(
    f0: SeparatedFunction,
    grid: PhaseGrid,
    cfg: StepConfig,
    n_steps: int,
    observer=None,
    start_step: int = 0,
):
    """Iterate :func:`verlet_step` ``n_steps`` times.

    ``observer(t, f, fields, info)`` is called after every step with the
    fields of the new state. Times are ``(start_step + m) * dt`` so a run
    resumed from a snapshot reproduces the uninterrupted one exactly.
    Raises :class:`StepError` (with ``.step`` set) on a failed substep.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    f = f0
    fields = compute_fields(f, grid)
    for m in range(start_step, start_step + n_steps):
        try:
            f, _, _, info = verlet_step(f, grid, cfg, fields)
        except StepError as exc:
            exc.step = m + 1
            raise
        fields = compute_fields(f, grid)
        if observer is not None:
            observer((m + 1) * cfg.dt, f, fields, info)
    return f


def dense_step(f: np.ndarray, grid: PhaseGrid, cfg: StepConfig) -> np.ndarray:
    """Same three substeps with sparse direct solves on the full grid.

    Reference path for small grids; ``f`` is the dense ``n_x x n_v`` array.
    Operates in Riesz form, so it only shares the grid stencils with
    :func:`verlet_step`.
    """
    h = 0.5 * cfg.dt
    sgn = cfg.force_sign
    nx, nv = grid.n_x, grid.n_v
    eye = sp.identity(nx * nv, format="csc")

    def riesz_kron(a, b):
        return sp.kron(a, b, format="csc")

    def field_of(arr):
        return compute_fields(SeparatedFunction(arr, np.eye(nv)), grid).e_field

    transport = sum(
        riesz_kron(cx, sp.diags(grid.v_nodes[:, a]))
        for a, cx in enumerate(grid.stencil_x)
    )

    def force(e):
        return sum(riesz_kron(sp.diags(ea), cv) for ea, cv in zip(e, grid.stencil_v))

    from scipy.sparse.linalg import spsolve

    vec = f.ravel()
    f13 = spsolve((eye + sgn * h * force(field_of(f))).tocsc(), vec - h * (transport @ vec))
    f23 = spsolve((eye + h * transport).tocsc(), f13)
    e23 = field_of(f23.reshape(nx, nv))
    f1 = f23 - sgn * h * (force(e23) @ f23)
    return f1.reshape(nx, nv)
