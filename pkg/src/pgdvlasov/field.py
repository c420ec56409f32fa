"""Charge density, periodic Poisson solve and force matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from pgdvlasov.grid import PhaseGrid
from pgdvlasov.tensor import SeparatedFunction


@dataclass(frozen=True)
class FieldState:
    """Density, potential and electric field on the space grid.

    ``mass_defect`` is ``sum_i w_i (1 - rho_i)``, the part of the Poisson
    right-hand side removed to make the periodic problem solvable.
    """

    rho: np.ndarray
    phi: np.ndarray
    e_field: tuple
    mass_defect: float = 0.0


def density(f: SeparatedFunction, grid: PhaseGrid) -> np.ndarray:
    if f.n_x != grid.n_x or f.n_v != grid.n_v:
        raise ValueError(
            f"function of shape ({f.n_x}, {f.n_v}) on grid ({grid.n_x}, {grid.n_v})"
        )
    if f.rank == 0:
        return np.zeros(grid.n_x)
    return f.x_factors @ (f.v_factors.T @ grid.wv)


def laplacian_symbol(grid: PhaseGrid) -> np.ndarray:
    """Eigenvalues of ``-Laplacian`` on the periodic space grid (FFT order).

    Centered 3-point per axis for ``x_derivative == "fd"``, exact ``|k|^2``
    for ``"spectral"``.
    """
    sym = np.zeros(grid.x_shape)
    for a, g in enumerate(grid.x_grids):
        k = 2 * np.pi * np.fft.fftfreq(g.count, d=g.spacing)
        if grid.x_derivative == "spectral":
            lam = k**2
        else:
            lam = (2.0 - 2.0 * np.cos(k * g.spacing)) / g.spacing**2
        shape = [1] * grid.dim
        shape[a] = g.count
        sym = sym + lam.reshape(shape)
    return sym


def solve_poisson(rho: np.ndarray, grid: PhaseGrid) -> FieldState:
    """Solve ``-Lap phi = 1 - rho`` with zero-mean gauge; ``E = -grad phi``.

    The right-hand side is projected to zero mean first, so every density
    is admissible. The gradient uses the same difference matrices as the
    transport operator.
    """
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (grid.n_x,):
        raise ValueError(f"density of shape {rho.shape} on {grid.n_x} space nodes")
    rhs = 1.0 - rho
    defect = float(grid.wx @ rhs)
    rhs = rhs - np.mean(rhs)
    sym = laplacian_symbol(grid)
    rhs_hat = np.fft.fftn(rhs.reshape(grid.x_shape))
    phi_hat = np.zeros_like(rhs_hat)
    nz = sym != 0.0
    phi_hat[nz] = rhs_hat[nz] / sym[nz]
    phi = np.real(np.fft.ifftn(phi_hat)).ravel()
    phi -= phi.mean()
    e_field = tuple(-np.asarray(c @ phi) for c in grid.stencil_x)
    return FieldState(rho=rho, phi=phi, e_field=e_field, mass_defect=defect)


def compute_fields(f: SeparatedFunction, grid: PhaseGrid) -> FieldState:
    return solve_poisson(density(f, grid), grid)


def force_matrices(e_field, grid: PhaseGrid) -> list:
    """Weighted-collocation force matrices ``F_x(E_a) = I_x diag(E_a)``."""
    out = []
    for e in e_field:
        e = np.asarray(e, dtype=float)
        if e.shape != (grid.n_x,):
            raise ValueError(f"field component of shape {e.shape}, expected ({grid.n_x},)")
        out.append(sp.diags(grid.wx * e).tocsr())
    return out


def discrete_laplacian(grid: PhaseGrid) -> sp.csr_matrix:
    """Assembled periodic Laplacian matching :func:`laplacian_symbol` (fd only)."""
    if grid.x_derivative != "fd":
        raise ValueError("assembled Laplacian only available for the fd stencil")
    mats = []
    for a, g in enumerate(grid.x_grids):
        n, h = g.count, g.spacing
        lap = sp.diags(
            [np.full(n, -2.0), np.ones(n - 1), np.ones(n - 1)], [0, 1, -1], format="lil"
        )
        lap[0, n - 1] = 1.0
        lap[n - 1, 0] = 1.0
        lap = lap.tocsr() / h**2
        eyes = [sp.identity(gg.count, format="csr") for gg in grid.x_grids]
        eyes[a] = lap
        term = eyes[0]
        for m in eyes[1:]:
            term = sp.kron(term, m, format="csr")
        mats.append(term)
    return sum(mats).tocsr()
