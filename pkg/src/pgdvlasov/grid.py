"""Uniform phase-space grids and the discrete operator matrices.

Every matrix is assembled in weighted-collocation form: mass matrices are
diagonal quadrature weights, and derivative / multiplication matrices are the
plain stencils left-multiplied by the mass matrix. Multi-axis grids are
flattened row-major with axis order (x1, x2) / (v1, v2).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
import scipy.sparse as sp


class Boundary(str, enum.Enum):
    PERIODIC = "periodic"
    DIRICHLET = "dirichlet"


@dataclass(frozen=True)
class Grid1D:
    """Uniform 1D grid with quadrature weights.

    Periodic grids exclude the duplicated right endpoint and use the uniform
    rule; homogeneous-Dirichlet grids include both endpoints and use the
    trapezoid rule.
    """

    lower: float
    upper: float
    count: int
    boundary: Boundary
    spacing: float = field(init=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.count < 4:
            raise ValueError(f"grid needs at least 4 points, got {self.count}")
        if not self.upper > self.lower:
            raise ValueError(f"empty interval [{self.lower}, {self.upper}]")
        boundary = Boundary(self.boundary)
        object.__setattr__(self, "boundary", boundary)
        length = self.upper - self.lower
        if boundary is Boundary.PERIODIC:
            h = length / self.count
            w = np.full(self.count, h)
        else:
            h = length / (self.count - 1)
            w = np.full(self.count, h)
            w[0] = w[-1] = h / 2
        w.flags.writeable = False
        object.__setattr__(self, "spacing", h)
        object.__setattr__(self, "weights", w)

    @property
    def nodes(self) -> np.ndarray:
        return self.lower + self.spacing * np.arange(self.count)

    @property
    def length(self) -> float:
        return self.upper - self.lower


def build_grid(lower: float, upper: float, count: int, boundary) -> Grid1D:
    return Grid1D(float(lower), float(upper), int(count), Boundary(boundary))


def centered_difference(grid: Grid1D) -> sp.csr_matrix:
    """Second-order centered first-derivative stencil (unweighted).

    Periodic grids wrap around; Dirichlet grids use zero ghost values and
    have their two boundary rows zeroed.
    """
    n, h = grid.count, grid.spacing
    c = 1.0 / (2.0 * h)
    rows = np.arange(n)
    if grid.boundary is Boundary.PERIODIC:
        data = np.concatenate([np.full(n, c), np.full(n, -c)])
        i = np.concatenate([rows, rows])
        j = np.concatenate([(rows + 1) % n, (rows - 1) % n])
    else:
        inner = rows[1:-1]
        data = np.concatenate([np.full(n - 2, c), np.full(n - 2, -c)])
        i = np.concatenate([inner, inner])
        j = np.concatenate([inner + 1, inner - 1])
    return sp.csr_matrix((data, (i, j)), shape=(n, n))


def fourier_difference(grid: Grid1D) -> np.ndarray:
    """Dense spectral differentiation matrix on a periodic grid.

    The Nyquist mode is dropped for even counts, which keeps the matrix real
    and skew-symmetric.
    """
    if grid.boundary is not Boundary.PERIODIC:
        raise ValueError("spectral differentiation needs a periodic grid")
    n = grid.count
    k = 2 * np.pi * np.fft.fftfreq(n, d=grid.spacing)
    if n % 2 == 0:
        k[n // 2] = 0.0
    eye = np.eye(n)
    return np.real(np.fft.ifft(1j * k[:, None] * np.fft.fft(eye, axis=0), axis=0))


def _kron_all(mats):
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), mats)


def _axis_operator(op, sizes, axis):
    mats = [sp.identity(n, format="csr") for n in sizes]
    mats[axis] = sp.csr_matrix(op)
    return _kron_all(mats)


def _tensor_weights(grids):
    return reduce(np.kron, [g.weights for g in grids])


def _tensor_nodes(grids):
    mesh = np.meshgrid(*[g.nodes for g in grids], indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class PhaseGrid:
    """Paired space / velocity grids with all discrete operators.

    Attributes ending in ``_x`` act on space factors (length ``n_x``), those
    ending in ``_v`` on velocity factors (length ``n_v``). ``stencil_x`` and
    ``stencil_v`` are the unweighted difference matrices, so that
    ``deriv_x[a] == mass_x @ stencil_x[a]``.
    """

    x_grids: tuple
    v_grids: tuple
    x_derivative: str
    wx: np.ndarray = field(repr=False)
    wv: np.ndarray = field(repr=False)
    x_nodes: np.ndarray = field(repr=False)
    v_nodes: np.ndarray = field(repr=False)
    v_free: np.ndarray = field(repr=False)
    stencil_x: tuple = field(repr=False)
    stencil_v: tuple = field(repr=False)
    deriv_x: tuple = field(repr=False)
    deriv_v: tuple = field(repr=False)
    vel_mult: tuple = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.x_grids)

    @property
    def n_x(self) -> int:
        return self.wx.size

    @property
    def n_v(self) -> int:
        return self.wv.size

    @property
    def x_shape(self) -> tuple:
        return tuple(g.count for g in self.x_grids)

    @property
    def v_shape(self) -> tuple:
        return tuple(g.count for g in self.v_grids)

    @property
    def mass_x(self) -> sp.dia_matrix:
        return sp.diags(self.wx)

    @property
    def mass_v(self) -> sp.dia_matrix:
        return sp.diags(self.wv)


def assemble_phase_grid(x_grids, v_grids, x_derivative: str = "fd") -> PhaseGrid:
    """Build a :class:`PhaseGrid` from per-axis grids.

    ``x_derivative`` is ``"fd"`` (centered differences) or ``"spectral"``
    (dense Fourier differentiation, periodic axes only).
    """
    x_grids, v_grids = tuple(x_grids), tuple(v_grids)
    if len(x_grids) != len(v_grids) or not x_grids:
        raise ValueError(
            f"dimension mismatch: {len(x_grids)} space axes vs {len(v_grids)} velocity axes"
        )
    if any(g.boundary is not Boundary.PERIODIC for g in x_grids):
        raise ValueError("space axes must be periodic")
    if any(g.boundary is not Boundary.DIRICHLET for g in v_grids):
        raise ValueError("velocity axes must be Dirichlet")
    if x_derivative not in ("fd", "spectral"):
        raise ValueError(f"unknown x_derivative {x_derivative!r}")

    wx = _tensor_weights(x_grids)
    wv = _tensor_weights(v_grids)
    x_nodes = _tensor_nodes(x_grids)
    v_nodes = _tensor_nodes(v_grids)
    xs = [g.count for g in x_grids]
    vs = [g.count for g in v_grids]

    free = reduce(
        np.logical_and.outer,
        [np.r_[False, np.ones(g.count - 2, bool), False] for g in v_grids],
    ).ravel()

    mx, mv = sp.diags(wx), sp.diags(wv)
    stencil_x, stencil_v, deriv_x, deriv_v, vel_mult = [], [], [], [], []
    for a, (gx, gv) in enumerate(zip(x_grids, v_grids)):
        if x_derivative == "spectral":
            cx = _axis_operator(fourier_difference(gx), xs, a)
        else:
            cx = _axis_operator(centered_difference(gx), xs, a)
        cv = _axis_operator(centered_difference(gv), vs, a)
        stencil_x.append(cx)
        stencil_v.append(cv)
        deriv_x.append((mx @ cx).tocsr())
        deriv_v.append((mv @ cv).tocsr())
        vel_mult.append(sp.diags(wv * v_nodes[:, a]).tocsr())

    for arr in (wx, wv, x_nodes, v_nodes, free):
        arr.flags.writeable = False
    return PhaseGrid(
        x_grids=x_grids,
        v_grids=v_grids,
        x_derivative=x_derivative,
        wx=wx,
        wv=wv,
        x_nodes=x_nodes,
        v_nodes=v_nodes,
        v_free=free,
        stencil_x=tuple(stencil_x),
        stencil_v=tuple(stencil_v),
        deriv_x=tuple(deriv_x),
        deriv_v=tuple(deriv_v),
        vel_mult=tuple(vel_mult),
    )


def uniform_phase_grid(
    dim: int,
    x_length: float,
    n_x: int,
    v_max: float,
    n_v: int,
    x_derivative: str = "fd",
) -> PhaseGrid:
    """Convenience wrapper: ``[0, L]^d`` periodic times ``[-vmax, vmax]^d``."""
    xg = [build_grid(0.0, x_length, n_x, Boundary.PERIODIC) for _ in range(dim)]
    vg = [build_grid(-v_max, v_max, n_v, Boundary.DIRICHLET) for _ in range(dim)]
    return assemble_phase_grid(xg, vg, x_derivative=x_derivative)
