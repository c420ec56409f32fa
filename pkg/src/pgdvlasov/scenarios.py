"""Test-case presets and their separated initial conditions."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from pgdvlasov.grid import PhaseGrid, uniform_phase_grid
from pgdvlasov.tensor import SeparatedFunction


class ScenarioKind(str, enum.Enum):
    LANDAU_1D = "landau1d"
    TWO_STREAM_1D = "twostream1d"
    LANDAU_2D = "landau2d"

    @property
    def dim(self) -> int:
        return 2 if self is ScenarioKind.LANDAU_2D else 1


@dataclass(frozen=True)
class ScenarioParams:
    """Physical and discretisation parameters of one test case.

    ``n_x`` / ``n_v`` are points per axis; a 2D case has ``n_x**2`` space
    nodes. ``x_length`` is the period of each space axis and velocities
    live in ``[-v_max, v_max]`` per axis.
    """

    kind: ScenarioKind
    beta: float
    wavenumber: float
    x_length: float
    v_max: float = 10.0
    n_x: int = 32
    n_v: int = 32
    t_f: float = 10.0
    n_steps: int = 4000
    v0: float = 0.0
    x_derivative: str = "fd"

    def __post_init__(self):
        object.__setattr__(self, "kind", ScenarioKind(self.kind))
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if not self.wavenumber > 0:
            raise ValueError(f"wavenumber must be > 0, got {self.wavenumber}")
        if not (self.x_length > 0 and self.v_max > 0 and self.t_f > 0):
            raise ValueError("x_length, v_max and t_f must be positive")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def dim(self) -> int:
        return self.kind.dim

    @property
    def dt(self) -> float:
        return self.t_f / self.n_steps


def landau_1d(**overrides) -> ScenarioParams:
    """Weak Landau damping, ``k = 0.5``, ``beta = 0.01`` on ``[0, 4 pi]``."""
    base = ScenarioParams(
        kind=ScenarioKind.LANDAU_1D,
        beta=0.01,
        wavenumber=0.5,
        x_length=4 * math.pi,
        n_x=32,
        n_v=32,
        t_f=10.0,
        n_steps=4000,
        x_derivative="spectral",
    )
    return replace(base, **overrides)


def two_stream_1d(**overrides) -> ScenarioParams:
    """Two-stream instability, ``v0 = 2.4``, ``beta = 1e-3``.

    The box is ``[0, 10 pi / k]`` (five perturbation wavelengths) with
    ``k = 0.2`` by default.
    """
    k = overrides.pop("wavenumber", 0.2)
    base = ScenarioParams(
        kind=ScenarioKind.TWO_STREAM_1D,
        beta=1e-3,
        wavenumber=k,
        x_length=10 * math.pi / k,
        n_x=64,
        n_v=128,
        t_f=36.0,
        n_steps=3600,
        v0=2.4,
        x_derivative="spectral",
    )
    return replace(base, **overrides)


def landau_2d(**overrides) -> ScenarioParams:
    """2D Landau damping on ``(0, 4 pi)^2 x (-10, 10)^2``, ``omega = 0.5``."""
    base = ScenarioParams(
        kind=ScenarioKind.LANDAU_2D,
        beta=0.01,
        wavenumber=0.5,
        x_length=4 * math.pi,
        n_x=16,
        n_v=32,
        t_f=5.0,
        n_steps=500,
    )
    return replace(base, **overrides)


PRESETS = {
    ScenarioKind.LANDAU_1D.value: landau_1d,
    ScenarioKind.TWO_STREAM_1D.value: two_stream_1d,
    ScenarioKind.LANDAU_2D.value: landau_2d,
}


def preset(name: str, **overrides) -> ScenarioParams:
    try:
        factory = PRESETS[str(name).lower()]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; choose from {sorted(PRESETS)}") from None
    return factory(**overrides)


def build_phase_grid(params: ScenarioParams) -> PhaseGrid:
    return uniform_phase_grid(
        params.dim, params.x_length, params.n_x, params.v_max, params.n_v,
        x_derivative=params.x_derivative,
    )


def _maxwellian(v, norm):
    return norm * np.exp(-0.5 * np.sum(v**2, axis=1))


def initial_condition(params: ScenarioParams, grid: PhaseGrid) -> SeparatedFunction:
    """Separated initial data; rank 1 in 1D, rank 3 for ``LANDAU_2D``."""
    if grid.dim != params.dim:
        raise ValueError(
            f"{params.kind.value} is {params.dim}D but the grid is {grid.dim}D"
        )
    x, v = grid.x_nodes, grid.v_nodes
    beta, k = params.beta, params.wavenumber
    if params.kind is ScenarioKind.LANDAU_1D:
        fx = 1.0 + beta * np.cos(k * x[:, 0])
        gv = _maxwellian(v, 1.0 / math.sqrt(2 * math.pi))
        return SeparatedFunction(fx[:, None], gv[:, None])
    if params.kind is ScenarioKind.TWO_STREAM_1D:
        fx = 1.0 + beta * np.cos(k * x[:, 0])
        c = 1.0 / math.sqrt(4 * math.pi)
        vv = v[:, 0]
        gv = c * np.exp(-0.5 * (vv - params.v0) ** 2) + c * np.exp(-0.5 * (vv + params.v0) ** 2)
        return SeparatedFunction(fx[:, None], gv[:, None])
    # prefactor (2 pi)^{-3/2} kept as published for this case
    gv = _maxwellian(v, (2 * math.pi) ** -1.5)
    fx = np.column_stack(
        [np.ones(grid.n_x), -beta * np.sin(k * x[:, 0]), -beta * np.sin(k * x[:, 1])]
    )
    return SeparatedFunction(fx, np.column_stack([gv, gv, gv]))


def initial_condition_formula(params: ScenarioParams, x, v) -> np.ndarray:
    """Closed-form ``f0`` at matched point pairs ``x[i], v[i]`` (for checks)."""
    x = np.atleast_2d(np.asarray(x, float))
    v = np.atleast_2d(np.asarray(v, float))
    beta, k = params.beta, params.wavenumber
    if params.kind is ScenarioKind.LANDAU_2D:
        return (
            (2 * math.pi) ** -1.5
            * (1 - beta * np.sin(k * x[:, 0]) - beta * np.sin(k * x[:, 1]))
            * np.exp(-0.5 * (v[:, 0] ** 2 + v[:, 1] ** 2))
        )
    fx = 1 + beta * np.cos(k * x[:, 0])
    if params.kind is ScenarioKind.LANDAU_1D:
        return fx * np.exp(-0.5 * v[:, 0] ** 2) / math.sqrt(2 * math.pi)
    c = 1 / math.sqrt(4 * math.pi)
    return fx * c * (
        np.exp(-0.5 * (v[:, 0] - params.v0) ** 2) + np.exp(-0.5 * (v[:, 0] + params.v0) ** 2)
    )
