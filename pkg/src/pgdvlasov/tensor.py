"""Separated (rank-n) functions on the phase grid and tensorized operators.

A :class:`SeparatedFunction` stores ``f = sum_k r_k (x) s_k`` as two factor
matrices whose columns are the space and velocity factors. Nothing in this
module ever forms the ``n_x * n_v`` array except :meth:`SeparatedFunction.dense`,
which exists for small-grid checks and plotting.

Functions taking a ``grid`` only read its ``wx`` and ``wv`` quadrature
weights, so a :class:`Metric` can stand in for a full phase grid.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass

import numpy as np

from pgdvlasov._io import atomic_write_text


@dataclass(frozen=True)
class Metric:
    """Diagonal mass matrices (and optional pinned velocity nodes)."""

    wx: np.ndarray
    wv: np.ndarray
    v_free: np.ndarray | None = None

    @classmethod
    def unit(cls, n_x: int, n_v: int) -> Metric:
        return cls(np.ones(n_x), np.ones(n_v))


class SeparatedFunction:
    """Rank-n function ``sum_k x_factors[:, k] (x) v_factors[:, k]``.

    Instances are treated as immutable; factor arrays are flagged read-only.
    """

    __slots__ = ("x_factors", "v_factors")

    def __init__(self, x_factors, v_factors):
        x = np.array(x_factors, dtype=float, ndmin=2, copy=True)
        v = np.array(v_factors, dtype=float, ndmin=2, copy=True)
        if x.ndim != 2 or v.ndim != 2 or x.shape[1] != v.shape[1]:
            raise ValueError(
                f"factor matrices disagree on rank: {x.shape} vs {v.shape}"
            )
        x.flags.writeable = False
        v.flags.writeable = False
        self.x_factors = x
        self.v_factors = v

    @classmethod
    def _wrap(cls, x: np.ndarray, v: np.ndarray) -> SeparatedFunction:
        # internal constructor for freshly computed arrays; skips the copy
        obj = cls.__new__(cls)
        x.flags.writeable = False
        v.flags.writeable = False
        obj.x_factors = x
        obj.v_factors = v
        return obj

    @classmethod
    def zeros(cls, n_x: int, n_v: int) -> SeparatedFunction:
        return cls._wrap(np.zeros((n_x, 0)), np.zeros((n_v, 0)))

    @classmethod
    def from_pairs(cls, pairs, n_x: int | None = None, n_v: int | None = None):
        pairs = list(pairs)
        if not pairs:
            if n_x is None or n_v is None:
                raise ValueError("empty pair list needs explicit sizes")
            return cls.zeros(n_x, n_v)
        x = np.column_stack([np.asarray(r, float) for r, _ in pairs])
        v = np.column_stack([np.asarray(s, float) for _, s in pairs])
        return cls._wrap(x, v)

    @property
    def rank(self) -> int:
        return self.x_factors.shape[1]

    @property
    def n_x(self) -> int:
        return self.x_factors.shape[0]

    @property
    def n_v(self) -> int:
        return self.v_factors.shape[0]

    def dense(self) -> np.ndarray:
        return self.x_factors @ self.v_factors.T

    def __neg__(self):
        return scale(self, -1.0)

    def __repr__(self):
        return f"SeparatedFunction(rank={self.rank}, n_x={self.n_x}, n_v={self.n_v})"


class TensorizedOperator:
    """Finite sum ``sum_mu A_x^mu (x) A_v^mu`` of Kronecker products.

    Matrices may be dense arrays or scipy sparse matrices.
    """

    __slots__ = ("terms",)

    def __init__(self, terms):
        terms = tuple((ax, av) for ax, av in terms)
        if not terms:
            raise ValueError("a tensorized operator needs at least one term")
        nx, nv = terms[0][0].shape[0], terms[0][1].shape[0]
        for ax, av in terms:
            if ax.shape != (nx, nx) or av.shape != (nv, nv):
                raise ValueError(
                    f"inconsistent term shapes {ax.shape} / {av.shape}"
                )
        self.terms = terms

    @property
    def num_terms(self) -> int:
        return len(self.terms)

    @property
    def shape(self) -> tuple:
        return self.terms[0][0].shape[0], self.terms[0][1].shape[0]

    def scaled(self, c: float) -> TensorizedOperator:
        return TensorizedOperator([(c * ax, av) for ax, av in self.terms])

    def dense(self) -> np.ndarray:
        """Full ``(n_x n_v) x (n_x n_v)`` matrix in row-major (x, v) ordering."""
        return sum(np.kron(_todense(ax), _todense(av)) for ax, av in self.terms)


def _todense(a):
    return a.toarray() if hasattr(a, "toarray") else np.asarray(a)


def _check_pair(f: SeparatedFunction, g: SeparatedFunction):
    if f.n_x != g.n_x or f.n_v != g.n_v:
        raise ValueError(
            f"shape mismatch: ({f.n_x}, {f.n_v}) vs ({g.n_x}, {g.n_v})"
        )


def _check_grid(f: SeparatedFunction, grid):
    if f.n_x != grid.wx.size or f.n_v != grid.wv.size:
        raise ValueError(
            f"function of shape ({f.n_x}, {f.n_v}) on grid of shape "
            f"({grid.wx.size}, {grid.wv.size})"
        )


def gram(f: SeparatedFunction, g: SeparatedFunction, grid):
    """Space and velocity Gram matrices ``(F_x^T I_x G_x, F_v^T I_v G_v)``."""
    _check_pair(f, g)
    _check_grid(f, grid)
    gx = f.x_factors.T @ (grid.wx[:, None] * g.x_factors)
    gv = f.v_factors.T @ (grid.wv[:, None] * g.v_factors)
    return gx, gv


def inner_h(f: SeparatedFunction, g: SeparatedFunction, grid) -> float:
    """Weighted inner product ``Tr(F^T I_x G I_v)`` in O(n n' (n_x + n_v))."""
    gx, gv = gram(f, g, grid)
    return float(np.sum(gx * gv))


def norm_h(f: SeparatedFunction, grid) -> float:
    """H norm of ``f``.

    Rank one uses the norm-product property. Higher ranks go through thin
    QR factorisations of the weighted factors, which keeps the result
    accurate to rounding relative to the individual terms even when they
    cancel (a Gram-matrix evaluation would only resolve ``sqrt(eps)``).
    """
    _check_grid(f, grid)
    if f.rank == 0:
        return 0.0
    if f.rank == 1:
        r, s = f.x_factors[:, 0], f.v_factors[:, 0]
        return float(np.sqrt(r @ (grid.wx * r)) * np.sqrt(s @ (grid.wv * s)))
    rx = np.linalg.qr(np.sqrt(grid.wx)[:, None] * f.x_factors, mode="r")
    rv = np.linalg.qr(np.sqrt(grid.wv)[:, None] * f.v_factors, mode="r")
    return float(np.linalg.norm(rx @ rv.T))


def apply(op: TensorizedOperator, f: SeparatedFunction) -> SeparatedFunction:
    """Apply ``op`` factor-wise; the result has rank ``op.num_terms * f.rank``.

    Terms are ordered operator-term-major, then by the factors of ``f``.
    """
    nx, nv = op.shape
    if (f.n_x, f.n_v) != (nx, nv):
        raise ValueError(
            f"operator of shape ({nx}, {nv}) applied to ({f.n_x}, {f.n_v})"
        )
    if f.rank == 0:
        return SeparatedFunction.zeros(nx, nv)
    xs = [np.asarray(ax @ f.x_factors) for ax, _ in op.terms]
    vs = [np.asarray(av @ f.v_factors) for _, av in op.terms]
    return SeparatedFunction._wrap(np.hstack(xs), np.hstack(vs))


def concat(*fs: SeparatedFunction) -> SeparatedFunction:
    """Sum of functions, represented by stacking their factors."""
    first = fs[0]
    for g in fs[1:]:
        _check_pair(first, g)
    return SeparatedFunction._wrap(
        np.hstack([g.x_factors for g in fs]), np.hstack([g.v_factors for g in fs])
    )


def scale(f: SeparatedFunction, c: float) -> SeparatedFunction:
    """Multiply by ``c``; only the space factors are touched."""
    return SeparatedFunction._wrap(c * f.x_factors, f.v_factors.copy())


def truncate_terms(f: SeparatedFunction, keep) -> SeparatedFunction:
    return SeparatedFunction._wrap(f.x_factors[:, keep].copy(), f.v_factors[:, keep].copy())


def to_riesz(op: TensorizedOperator, grid) -> TensorizedOperator:
    """Turn a mass-weighted operator ``P`` into ``(I_x (x) I_v)^{-1} P``."""
    ix = 1.0 / grid.wx
    iv = 1.0 / grid.wv
    return TensorizedOperator(
        [(_row_scale(ax, ix), _row_scale(av, iv)) for ax, av in op.terms]
    )


def riesz_function(g: SeparatedFunction, grid) -> SeparatedFunction:
    """Riesz representative ``(I_x (x) I_v)^{-1} g`` of a load vector ``g``."""
    _check_grid(g, grid)
    return SeparatedFunction._wrap(
        g.x_factors / grid.wx[:, None], g.v_factors / grid.wv[:, None]
    )


def _row_scale(a, d):
    if hasattr(a, "multiply"):
        return a.multiply(d[:, None]).tocsr()
    return d[:, None] * np.asarray(a)


# -- snapshot files ---------------------------------------------------------
#
# Layout (plain text, comma separated):
#   # pgdvlasov-snapshot v1
#   rank,n_x,n_v,t
#   <n>,<N_x>,<N_v>,<t>
#   [x_factors]
#   one line per factor k with N_x values
#   [v_factors]
#   one line per factor k with N_v values
# Values are written with 17 significant digits so a round trip is exact.

_MAGIC = "# pgdvlasov-snapshot v1"


def format_snapshot(f: SeparatedFunction, t: float = 0.0) -> str:
    buf = io.StringIO()
    buf.write(_MAGIC + "\n")
    buf.write("rank,n_x,n_v,t\n")
    buf.write(f"{f.rank},{f.n_x},{f.n_v},{float(t)!r}\n")
    buf.write("[x_factors]\n")
    for col in f.x_factors.T:
        buf.write(",".join(repr(float(a)) for a in col) + "\n")
    buf.write("[v_factors]\n")
    for col in f.v_factors.T:
        buf.write(",".join(repr(float(a)) for a in col) + "\n")
    return buf.getvalue()


def parse_snapshot(text: str) -> tuple[SeparatedFunction, float]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != _MAGIC:
        raise ValueError("not a snapshot file (missing header)")
    n, nx, nv, t = lines[2].split(",")
    n, nx, nv, t = int(n), int(nx), int(nv), float(t)
    if lines[3].strip() != "[x_factors]" or lines[4 + n].strip() != "[v_factors]":
        raise ValueError("malformed snapshot: section markers not where expected")
    xs = [np.array(ln.split(","), dtype=float) for ln in lines[4 : 4 + n]]
    vs = [np.array(ln.split(","), dtype=float) for ln in lines[5 + n : 5 + 2 * n]]
    if len(vs) != n or any(a.size != nx for a in xs) or any(a.size != nv for a in vs):
        raise ValueError("malformed snapshot: factor sizes disagree with header")
    if n == 0:
        return SeparatedFunction.zeros(nx, nv), t
    return SeparatedFunction(np.column_stack(xs), np.column_stack(vs)), t


def write_snapshot(path, f: SeparatedFunction, t: float = 0.0) -> None:
    atomic_write_text(path, format_snapshot(f, t))


def read_snapshot(path) -> tuple[SeparatedFunction, float]:
    with open(os.fspath(path)) as fh:
        return parse_snapshot(fh.read())
