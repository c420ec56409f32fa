"""Moments, conservation errors and the electric-energy decay fit."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import find_peaks

from pgdvlasov._io import atomic_write_text
from pgdvlasov.field import FieldState
from pgdvlasov.grid import PhaseGrid
from pgdvlasov.tensor import SeparatedFunction, concat, norm_h, scale


class InvalidFit(ValueError):
    """Too few energy peaks to fit a decay rate."""


class NormalizationError(ValueError):
    """A reference quantity used for normalisation vanishes."""


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass: float
    momentum: tuple
    kinetic: float
    potential_term: float
    hamiltonian: float
    electric_energy: float
    rank: int
    mass_defect: float = 0.0


@dataclass(frozen=True)
class ErrorSummary:
    eps_m: float
    eps_p: float
    eps_h: float
    eps_f: float | None = None


@dataclass(frozen=True)
class DecayFitResult:
    gamma_fit: float
    peaks_used: int
    fit_rms: float
    peak_times: tuple = ()
    intercept: float = 0.0


def observe(t: float, f: SeparatedFunction, fields: FieldState, grid: PhaseGrid) -> DiagnosticsRecord:
    """Moments of ``f`` plus field energies, in ``O(n (N_x + N_v) + N_x)``."""
    if f.n_x != grid.n_x or f.n_v != grid.n_v:
        raise ValueError(
            f"function of shape ({f.n_x}, {f.n_v}) on grid ({grid.n_x}, {grid.n_v})"
        )
    if fields.rho.shape != (grid.n_x,):
        raise ValueError("field state does not match the grid")
    wx, wv, v = grid.wx, grid.wv, grid.v_nodes
    xm = wx @ f.x_factors
    mass = float(xm @ (wv @ f.v_factors))
    momentum = tuple(float(xm @ ((wv * v[:, a]) @ f.v_factors)) for a in range(grid.dim))
    kinetic = float(xm @ ((wv * 0.5 * np.sum(v**2, axis=1)) @ f.v_factors))
    potential = 0.5 * float(wx @ (fields.phi * fields.rho))
    e_energy = 0.5 * float(sum(wx @ (e * e) for e in fields.e_field))
    return DiagnosticsRecord(
        t=float(t),
        mass=mass,
        momentum=momentum,
        kinetic=kinetic,
        potential_term=potential,
        hamiltonian=kinetic - potential,
        electric_energy=e_energy,
        rank=f.rank,
        mass_defect=fields.mass_defect,
    )


def _l2_in_time(t, y, t_f):
    # trapezoid integral of y^2 on [0, t_f]
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    mask = t <= t_f * (1 + 1e-12)
    return math.sqrt(max(float(np.trapezoid(y[mask] ** 2, t[mask])), 0.0))


def error_summary(series, t_f: float | None = None, ref_errors=None) -> ErrorSummary:
    """Time-averaged relative conservation errors of a recorded run.

    ``series`` must start at ``t = 0``. ``ref_errors`` optionally holds
    ``(times, relative_sq_errors)`` with ``||f_ref - f||^2 / ||f_ref||^2``
    at matching times (see :func:`relative_sq_error`); only then is
    ``eps_f`` filled in.
    """
    series = list(series)
    if len(series) < 2:
        raise ValueError("need at least two records")
    if series[0].t != 0.0:
        raise ValueError(f"series must start at t = 0, starts at {series[0].t}")
    if t_f is None:
        t_f = series[-1].t
    if not t_f > 0:
        raise ValueError("t_f must be positive")
    r0 = series[0]
    t = [r.t for r in series]
    big_m = r0.mass
    if big_m == 0.0:
        raise NormalizationError("initial mass is zero")
    if r0.hamiltonian == 0.0:
        raise NormalizationError("initial Hamiltonian is zero")
    big_p = math.sqrt(2 * big_m * r0.kinetic)
    if big_p == 0.0:
        raise NormalizationError("momentum scale sqrt(2 M K) is zero")

    dm = [r.mass - big_m for r in series]
    dp = [math.hypot(*np.subtract(r.momentum, r0.momentum)) for r in series]
    dh = [r.hamiltonian - r0.hamiltonian for r in series]
    eps_m = _l2_in_time(t, dm, t_f) / (abs(big_m) * t_f)
    eps_p = _l2_in_time(t, dp, t_f) / (big_p * t_f)
    eps_h = _l2_in_time(t, dh, t_f) / (abs(r0.hamiltonian) * t_f)
    eps_f = None
    if ref_errors is not None:
        rt, rel = (np.asarray(a, float) for a in ref_errors)
        eps_f = eps_f_from_samples(rt, rel, t_f)
    return ErrorSummary(eps_m, eps_p, eps_h, eps_f)


def eps_f_from_samples(times, rel_sq, t_f) -> float:
    """``(1/t_f) (int_0^t_f rel_sq dt)^{1/2}`` by the trapezoid rule."""
    times = np.asarray(times, float)
    rel_sq = np.asarray(rel_sq, float)
    if times.size < 2:
        raise ValueError("need at least two reference samples")
    mask = times <= t_f * (1 + 1e-12)
    return math.sqrt(max(float(np.trapezoid(rel_sq[mask], times[mask])), 0.0)) / t_f


def relative_sq_error(f: SeparatedFunction, f_ref: SeparatedFunction, grid) -> float:
    """``||f_ref - f||_H^2 / ||f_ref||_H^2`` without materialising either."""
    ref_sq = norm_h(f_ref, grid) ** 2
    if ref_sq == 0.0:
        raise NormalizationError("reference function is zero")
    return norm_h(concat(f, scale(f_ref, -1.0)), grid) ** 2 / ref_sq


def resample(f: SeparatedFunction, src: PhaseGrid, dst: PhaseGrid) -> SeparatedFunction:
    """Interpolate each factor of ``f`` from ``src`` to ``dst`` (1D grids).

    Periodic cubic splines in x, natural cubic splines in v. Nodes of
    ``dst`` outside the velocity range of ``src`` get zero.
    """
    if src.dim != 1 or dst.dim != 1:
        raise ValueError("resampling is implemented for 1D-1D grids only")
    if src.n_x == dst.n_x and src.n_v == dst.n_v:
        if np.allclose(src.x_nodes, dst.x_nodes) and np.allclose(src.v_nodes, dst.v_nodes):
            return f
    gx = src.x_grids[0]
    xs = np.append(gx.nodes, gx.upper)
    xf = np.vstack([f.x_factors, f.x_factors[:1]])
    xt = (dst.x_nodes[:, 0] - gx.lower) % gx.length + gx.lower
    new_x = CubicSpline(xs, xf, axis=0, bc_type="periodic")(xt)
    vs = src.v_nodes[:, 0]
    vt = dst.v_nodes[:, 0]
    new_v = CubicSpline(vs, f.v_factors, axis=0, bc_type="natural")(vt)
    new_v[(vt < vs[0]) | (vt > vs[-1])] = 0.0
    return SeparatedFunction(new_x, new_v)


def fit_decay(times, electric_energy, t_min: float = 1.0, prominence: float = 1e-3) -> DecayFitResult:
    """Fit the exponential envelope of an oscillating energy series.

    Peaks of ``log E`` after ``t_min`` with the given prominence are refined
    by a three-point parabola and fitted by a least-squares line;
    ``gamma_fit = -slope / 2`` is the amplitude decay rate. A series with no
    variation returns ``gamma_fit = 0``.
    """
    t = np.asarray(times, float)
    e = np.asarray(electric_energy, float)
    if t.shape != e.shape or t.ndim != 1:
        raise ValueError("times and energies must be 1D arrays of equal length")
    if np.any(e <= 0):
        raise ValueError("electric energy must be positive to take logs")
    y = np.log(e)
    if np.ptp(y) <= 1e-12 * max(1.0, np.max(np.abs(y))):
        return DecayFitResult(gamma_fit=0.0, peaks_used=0, fit_rms=0.0)
    sel = t > t_min
    ts, ys = t[sel], y[sel]
    idx, _ = find_peaks(ys, prominence=prominence)
    idx = idx[(idx > 0) & (idx < ys.size - 1)]
    if idx.size < 3:
        raise InvalidFit(f"found {idx.size} peaks after t = {t_min}, need at least 3")
    pt, py = [], []
    for i in idx:
        y0, y1, y2 = ys[i - 1], ys[i], ys[i + 1]
        denom = y0 - 2 * y1 + y2
        shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
        h = 0.5 * (ts[i + 1] - ts[i - 1])
        pt.append(ts[i] + shift * h)
        py.append(y1 - 0.25 * (y0 - y2) * shift)
    pt, py = np.array(pt), np.array(py)
    slope, intercept = np.polyfit(pt, py, 1)
    rms = float(np.sqrt(np.mean((py - (slope * pt + intercept)) ** 2)))
    return DecayFitResult(
        gamma_fit=float(-slope / 2), peaks_used=int(pt.size), fit_rms=rms,
        peak_times=tuple(float(a) for a in pt), intercept=float(intercept),
    )


def csv_header(dim: int) -> list:
    cols = ["t", "mass"] + [f"p_{a + 1}" for a in range(dim)]
    return cols + ["kinetic", "potential_term", "hamiltonian", "electric_energy", "rank", "mass_defect"]


def format_row(rec: DiagnosticsRecord) -> str:
    vals = [rec.t, rec.mass, *rec.momentum, rec.kinetic, rec.potential_term,
            rec.hamiltonian, rec.electric_energy]
    return ",".join([*(repr(float(a)) for a in vals), str(rec.rank), repr(float(rec.mass_defect))])


def format_csv(series) -> str:
    series = list(series)
    dim = len(series[0].momentum) if series else 1
    buf = io.StringIO()
    buf.write(",".join(csv_header(dim)) + "\n")
    for rec in series:
        buf.write(format_row(rec) + "\n")
    return buf.getvalue()


def write_csv(path, series) -> None:
    atomic_write_text(path, format_csv(series))


def read_csv(path) -> list:
    """Parse a file written by :func:`write_csv` back into records."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [ln.strip().split(",") for ln in fh if ln.strip()]
    dim = sum(1 for c in header if c.startswith("p_"))
    out = []
    for row in rows:
        vals = [float(a) for a in row]
        out.append(DiagnosticsRecord(
            t=vals[0], mass=vals[1], momentum=tuple(vals[2:2 + dim]),
            kinetic=vals[2 + dim], potential_term=vals[3 + dim],
            hamiltonian=vals[4 + dim], electric_energy=vals[5 + dim],
            rank=int(vals[6 + dim]), mass_defect=vals[7 + dim],
        ))
    return out
