"""Greedy rank-one solvers: ALS, PGD / POD compression and fixed-point PGD.

All three minimise ``|| R - r (x) s ||_H`` for some residual ``R`` held in
separated form, with the quadratic part equal to the H inner product
(diagonal mass matrices). With diagonal masses each half-step of ALS is a
closed-form weighted projection.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from pgdvlasov._io import atomic_write_text
from pgdvlasov.tensor import (
    SeparatedFunction,
    TensorizedOperator,
    apply,
    concat,
    norm_h,
    scale,
)

log = logging.getLogger(__name__)

_MAX_RESTARTS = 5
_DEGENERATE = 1e-28


class ALSBreakdown(RuntimeError):
    """ALS hit a vanishing denominator repeatedly on a nonzero target."""


@dataclass(frozen=True)
class SolverTolerances:
    """Stopping rules shared by the greedy loops and the inner ALS.

    ``rounding_floor`` is relative: the greedy threshold never drops below
    ``rounding_floor * ||b||_H`` and the ALS threshold never below
    ``rounding_floor * ||r (x) s||_H``, since neither quantity can be
    resolved past double-precision cancellation.
    """

    epsilon: float = 1e-14
    eta: float = 1e-14
    max_rank: int = 200
    max_als_iters: int = 50
    seed: int = 0
    rounding_floor: float = 16 * np.finfo(float).eps

    def __post_init__(self):
        if not (self.epsilon > 0 and self.eta > 0):
            raise ValueError("epsilon and eta must be positive")
        if self.max_rank < 1 or self.max_als_iters < 1:
            raise ValueError("max_rank and max_als_iters must be >= 1")
        if self.rounding_floor < 0:
            raise ValueError("rounding_floor must be non-negative")


@dataclass
class GreedyReport:
    """Per-solve record of a greedy loop (POD or fixed-point PGD).

    ``residual_history[i]`` is ``||r_{i+1} (x) s_{i+1}||_H``, which equals the
    injective norm of the residual before iteration ``i + 1`` when ALS
    converges to the dominant pair.
    """

    iterations: int = 0
    final_injective_residual: float = math.inf
    residual_history: list = field(default_factory=list)
    rank_history: list = field(default_factory=list)
    als_iterations: list = field(default_factory=list)
    als_unconverged: int = 0
    converged: bool = False
    threshold: float = 0.0

    def record(self, product_norm, rank, als_iters, als_ok):
        self.iterations += 1
        self.final_injective_residual = product_norm
        self.residual_history.append(product_norm)
        self.rank_history.append(rank)
        self.als_iterations.append(als_iters)
        self.als_unconverged += not als_ok


FixedPointReport = GreedyReport


def write_trace(report: GreedyReport, path) -> None:
    """CSV trace of a solve: iteration, injective residual, rank."""
    lines = ["iteration,injective_residual,rank"]
    for i, (res, rank) in enumerate(zip(report.residual_history, report.rank_history), 1):
        lines.append(f"{i},{res!r},{rank}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def _pin(s, free):
    if free is not None:
        s[~free] = 0.0
    return s


def _als(X, V, grid, tol: SolverTolerances, rng):
    """ALS on the target ``X @ V.T``.

    Returns ``(r, s, iterations, converged)`` with ``s`` of unit weighted
    norm. The last half-step always updates ``r`` from the final ``s``, so
    ``r`` is the exact minimiser for that ``s``; this makes the Galerkin
    orthogonality ``<R - r(x)s, r(x)s>_H = 0`` hold even when the
    stagnation test is not met.
    """
    wx, wv = grid.wx, grid.wv
    free = getattr(grid, "v_free", None)
    nx, nv = X.shape[0], V.shape[0]

    if X.shape[1] == 0:
        s = _pin(rng.uniform(-1.0, 1.0, nv), free)
        return np.zeros(nx), s / max(math.sqrt(s @ (wv * s)), 1e-300), 0, True

    # the velocity update stays in span(V); pinning is a no-op when V vanishes there
    pin_updates = free is not None and bool(np.any(V[~free]))
    gx = X.T @ (wx[:, None] * X)
    gv = V.T @ (wv[:, None] * V)
    # Gram-based, so only trusted as a scale for the degeneracy test
    target_sq = max(float(np.sum(gx * gv)), 0.0)
    tiny = _DEGENERATE * target_sq
    wvV = wv[:, None] * V

    for _attempt in range(_MAX_RESTARTS + 1):
        s = _pin(rng.uniform(-1.0, 1.0, nv), free)
        ns = math.sqrt(s @ (wv * s))
        if ns == 0.0:
            continue
        s /= ns
        r = X @ (s @ wvV)
        degenerate = False
        for it in range(1, tol.max_als_iters + 1):
            wr = wx * r
            rr = r @ wr
            if rr <= tiny:
                if rr == 0.0 or target_sq == 0.0:
                    return np.zeros(nx), s, it, True
                degenerate = True
                break
            s_new = V @ (wr @ X) / rr
            if pin_updates:
                s_new[~free] = 0.0
            ns = math.sqrt(s_new @ (wv * s_new))
            if ns == 0.0:
                degenerate = True
                break
            s_new /= ns
            r_new = X @ (s_new @ wvV)
            # (r_new (x) s_new - r (x) s) = dr (x) s_new + r (x) ds, expanded stably
            dr = r_new - r
            ds = s_new - s
            wds = wv * ds
            diff_sq = dr @ (wx * dr) + rr * (ds @ wds) + 2.0 * (dr @ wr) * (s_new @ wds)
            r, s = r_new, s_new
            prod = math.sqrt(r @ (wx * r))
            if math.sqrt(max(diff_sq, 0.0)) < max(tol.eta, tol.rounding_floor * prod):
                return r, s, it, True
        if not degenerate:
            return r, s, tol.max_als_iters, False
    raise ALSBreakdown(
        f"ALS denominator vanished after {_MAX_RESTARTS} restarts "
        f"(target norm^2 = {target_sq:.3e})"
    )


def als_rank1(target: SeparatedFunction, grid, tol: SolverTolerances, rng=None):
    """Best rank-one approximation ``r (x) s`` of ``target`` in the H norm.

    The scale ambiguity is fixed by giving ``s`` unit ``I_v`` norm, so
    ``||r (x) s||_H == ||r||_{I_x}``. A zero target yields ``r = 0``.
    """
    if rng is None:
        rng = np.random.default_rng(tol.seed)
    r, s, _, _ = _als(target.x_factors, target.v_factors, grid, tol, rng)
    return r, s


def _append(f: SeparatedFunction, r, s) -> SeparatedFunction:
    return SeparatedFunction._wrap(
        np.column_stack([f.x_factors, r]), np.column_stack([f.v_factors, s])
    )


def _threshold(b, grid, tol):
    floor = tol.rounding_floor * norm_h(b, grid) if tol.rounding_floor else 0.0
    return max(tol.epsilon, floor)


def pod(b: SeparatedFunction, g0: SeparatedFunction | None, grid, tol: SolverTolerances):
    """Greedy PGD-epsilon for the identity quadratic part, starting at ``g0``.

    With ``g0`` = None (zero) the result is the truncated POD of ``b``: the
    product norms come out as the weighted singular values in non-increasing
    order. The pair that falls below the threshold is not appended.

    Returns ``(f, GreedyReport)``.
    """
    f = SeparatedFunction.zeros(b.n_x, b.n_v) if g0 is None else g0
    rng = np.random.default_rng(tol.seed)
    report = GreedyReport(threshold=_threshold(b, grid, tol))
    for _ in range(tol.max_rank):
        X = np.column_stack([b.x_factors, -f.x_factors])
        V = np.column_stack([b.v_factors, f.v_factors])
        r, s, its, ok = _als(X, V, grid, tol, rng)
        prod = math.sqrt(r @ (grid.wx * r))
        report.record(prod, f.rank, its, ok)
        if prod < report.threshold:
            report.converged = True
            break
        f = _append(f, r, s)
        report.rank_history[-1] = f.rank
    if not report.converged:
        log.warning(
            "POD stopped at max_rank=%d with product norm %.3e > %.3e",
            tol.max_rank, report.final_injective_residual, report.threshold,
        )
    return f, report


def pgd_fp(
    Atilde: TensorizedOperator,
    b: SeparatedFunction,
    g0: SeparatedFunction | None,
    grid,
    tol: SolverTolerances,
):
    """Fixed-point PGD-epsilon for ``(I + Atilde) f = b``.

    ``Atilde`` and ``b`` are in Riesz form (already multiplied by the inverse
    mass matrices). Each iteration fits one rank-one term to the lagged
    residual ``R_n = b - f_n - Atilde f_n``; the loop stops once the fitted
    term, i.e. the injective norm of ``R_n``, drops below the threshold.

    Returns ``(f, GreedyReport)``. Convergence is only guaranteed when
    ``3 * M * kappa < 1`` (see :func:`kappa_bound`).
    """
    f = SeparatedFunction.zeros(b.n_x, b.n_v) if g0 is None else g0
    af = apply(Atilde, f)
    rng = np.random.default_rng(tol.seed)
    report = GreedyReport(threshold=_threshold(b, grid, tol))
    sub_tol = None
    for _ in range(tol.max_rank):
        residual = concat(b, scale(f, -1.0), scale(af, -1.0))
        if residual.rank > 4 * max(b.rank, f.rank):
            if sub_tol is None:
                sub_tol = replace(tol, epsilon=tol.epsilon / 10)
            residual, _ = pod(residual, None, grid, sub_tol)
        r, s, its, ok = _als(residual.x_factors, residual.v_factors, grid, tol, rng)
        prod = math.sqrt(r @ (grid.wx * r))
        report.record(prod, f.rank, its, ok)
        if prod < report.threshold:
            report.converged = True
            break
        term = SeparatedFunction._wrap(r[:, None], s[:, None])
        f = _append(f, r, s)
        af = concat(af, apply(Atilde, term))
        report.rank_history[-1] = f.rank
    return f, report


def _weighted_norm(a, w, iters, rng):
    """Power-iteration estimate of ``||W^{1/2} A W^{-1/2}||_2``."""
    n = a.shape[0]
    sq = np.sqrt(w)
    x = rng.uniform(-1.0, 1.0, n)
    x /= np.linalg.norm(x)
    sigma = 0.0
    for _ in range(iters):
        y = sq * np.asarray(a @ (x / sq)).ravel()
        z = (1.0 / sq) * np.asarray(a.T @ (sq * y)).ravel()
        nz = np.linalg.norm(z)
        if nz == 0.0:
            return 0.0
        sigma = math.sqrt(nz)
        x = z / nz
    return sigma


def kappa_bound(Atilde: TensorizedOperator, grid, iters: int = 50, seed: int = 0) -> float:
    """Estimate ``max_mu ||A_x^mu (x) A_v^mu||`` in the H operator norm.

    Uses the norm-product property of Kronecker terms and 50 seeded power
    iterations per factor. The estimate converges to the norm from below.
    """
    rng = np.random.default_rng(seed)
    best = 0.0
    for ax, av in Atilde.terms:
        nx_ = _weighted_norm(ax, grid.wx, iters, rng)
        nv_ = _weighted_norm(av, grid.wv, iters, rng)
        best = max(best, nx_ * nv_)
    return best


def check_contraction(Atilde: TensorizedOperator, grid, label: str = "") -> float:
    """Log a warning when ``3 M kappa >= 1``; returns ``3 M kappa``."""
    value = 3 * Atilde.num_terms * kappa_bound(Atilde, grid)
    if value >= 1.0:
        log.warning(
            "%s3*M*kappa = %.3f >= 1: fixed-point PGD may not converge; reduce dt",
            f"{label}: " if label else "", value,
        )
    return value
