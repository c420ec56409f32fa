import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pgdvlasov.diagnostics import (
    DiagnosticsRecord,
    InvalidFit,
    NormalizationError,
    error_summary,
    eps_f_from_samples,
    fit_decay,
    observe,
    read_csv,
    relative_sq_error,
    resample,
    write_csv,
)
from pgdvlasov.field import compute_fields
from pgdvlasov.grid import uniform_phase_grid
from pgdvlasov.scenarios import build_phase_grid, initial_condition, landau_1d
from pgdvlasov.tensor import SeparatedFunction, scale


def rec(t, mass=1.0, p=(0.0,), k=1.0, h=2.0, ee=1.0):
    return DiagnosticsRecord(t, mass, tuple(p), k, k - h, h, ee, 1, 0.0)


def test_landau_initial_moments():
    p = landau_1d(n_x=64, n_v=128)
    g = build_phase_grid(p)
    f = initial_condition(p, g)
    r = observe(0.0, f, compute_fields(f, g), g)
    assert r.mass == pytest.approx(4 * math.pi, rel=1e-8)
    assert abs(r.momentum[0]) < 1e-14
    assert r.kinetic == pytest.approx(2 * math.pi, rel=1e-8)
    assert r.kinetic >= 0 and r.rank == 1
    assert r.hamiltonian == pytest.approx(r.kinetic - r.potential_term)


def test_rank_zero_moments():
    g = uniform_phase_grid(1, 1.0, 8, 1.0, 8)
    z = SeparatedFunction.zeros(8, 8)
    r = observe(0.0, z, compute_fields(z, g), g)
    assert (r.mass, r.momentum, r.kinetic, r.rank) == (0.0, (0.0,), 0.0, 0)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6), dim=st.sampled_from([1, 2]))
def test_moments_match_dense_quadrature(seed, dim):
    rng = np.random.default_rng(seed)
    n = 6 if dim == 2 else 24
    g = uniform_phase_grid(dim, 3.0, n, 2.0, n)
    f = SeparatedFunction(rng.standard_normal((g.n_x, 3)), rng.standard_normal((g.n_v, 3)))
    fs = compute_fields(f, g)
    r = observe(0.5, f, fs, g)
    w = g.wx[:, None] * f.dense() * g.wv[None, :]
    v = g.v_nodes
    assert r.mass == pytest.approx(w.sum(), rel=1e-10, abs=1e-12)
    for a in range(dim):
        assert r.momentum[a] == pytest.approx((w * v[None, :, a]).sum(), rel=1e-10, abs=1e-12)
    assert r.kinetic == pytest.approx((w * 0.5 * (v**2).sum(1)[None, :]).sum(), rel=1e-10, abs=1e-12)
    assert r.electric_energy == pytest.approx(0.5 * sum(g.wx @ e**2 for e in fs.e_field), rel=1e-12)


def test_constant_series_has_zero_errors():
    s = error_summary([rec(t) for t in np.linspace(0, 1, 11)])
    assert (s.eps_m, s.eps_p, s.eps_h) == (0.0, 0.0, 0.0)
    assert s.eps_f is None


def test_constant_mass_offset():
    delta = 1e-5
    # the offset switches on immediately after t = 0
    series = [rec(0.0), rec(1e-12, mass=1 + delta)]
    series += [rec(t, mass=1 + delta) for t in np.linspace(0.1, 1.0, 10)]
    s = error_summary(series, t_f=1.0)
    assert s.eps_m == pytest.approx(delta, rel=1e-6)


def test_normalisation_errors():
    with pytest.raises(NormalizationError):
        error_summary([rec(0, mass=0.0), rec(1, mass=0.0)])
    with pytest.raises(NormalizationError):
        error_summary([rec(0, h=0.0), rec(1, h=0.0)])


def test_momentum_reduction_invariant_to_axis_relabel():
    a = [rec(0, p=(0.0, 0.0)), rec(1, p=(1e-3, 2e-3)), rec(2, p=(3e-3, -1e-3))]
    b = [rec(r.t, p=r.momentum[::-1]) for r in a]
    assert error_summary(a).eps_p == error_summary(b).eps_p


def test_eps_f_from_samples():
    t = np.linspace(0, 2, 21)
    assert eps_f_from_samples(t, np.full(21, 4e-6), 2.0) == pytest.approx(math.sqrt(8e-6) / 2)


def test_synthetic_decay_rate():
    t = np.linspace(0, 20, 8001)
    e = np.exp(-2 * 0.153 * t) * np.cos(1.4 * t) ** 2 + 1e-30
    res = fit_decay(t, e)
    assert res.gamma_fit == pytest.approx(0.153, abs=1e-3)
    assert res.peaks_used >= 3


@settings(max_examples=20, deadline=None)
@given(c=st.floats(1e-6, 1e6))
def test_decay_fit_scale_invariant(c):
    t = np.linspace(0, 20, 4001)
    e = np.exp(-0.3 * t) * (1.1 + np.cos(2.0 * t))
    a, b = fit_decay(t, e), fit_decay(t, c * e)
    assert b.gamma_fit == pytest.approx(a.gamma_fit, abs=1e-9)


def test_decay_fit_constant_and_too_few_peaks():
    t = np.linspace(0, 10, 100)
    assert fit_decay(t, np.full(100, 3.0)).gamma_fit == 0.0
    with pytest.raises(InvalidFit):
        fit_decay(t, np.exp(-t) + 1.0)


def test_csv_roundtrip(tmp_path):
    series = [DiagnosticsRecord(0.1 * i, 1.0 + i, (0.5, -0.25), 2.0, 0.3, 1.7, 1e-3, i, 1e-9) for i in range(4)]
    path = tmp_path / "d.csv"
    write_csv(path, series)
    assert path.read_text().splitlines()[0] == (
        "t,mass,p_1,p_2,kinetic,potential_term,hamiltonian,electric_energy,rank,mass_defect"
    )
    assert read_csv(path) == series


def test_relative_error_and_resample():
    p = landau_1d(n_x=64, n_v=64)
    fine = build_phase_grid(p)
    coarse = build_phase_grid(landau_1d(n_x=32, n_v=32))
    f_fine = initial_condition(p, fine)
    f_coarse = initial_condition(p, coarse)
    assert relative_sq_error(f_fine, f_fine, fine) < 1e-28
    assert relative_sq_error(scale(f_fine, 1.01), f_fine, fine) == pytest.approx(1e-4, rel=1e-8)
    moved = resample(f_fine, fine, coarse)
    assert relative_sq_error(moved, f_coarse, coarse) < 1e-8
