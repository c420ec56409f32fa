import math

import numpy as np
import pytest

from pgdvlasov.scenarios import (
    ScenarioKind,
    ScenarioParams,
    build_phase_grid,
    initial_condition,
    initial_condition_formula,
    landau_1d,
    landau_2d,
    preset,
    two_stream_1d,
)


def test_landau_beta_zero_is_uniform_maxwellian():
    p = landau_1d(beta=0.0, n_x=16, n_v=16)
    f = initial_condition(p, build_phase_grid(p))
    assert f.rank == 1
    assert np.ptp(f.x_factors[:, 0]) == 0.0


def test_landau_value_at_origin():
    p = landau_1d(n_x=32, n_v=33)  # odd n_v puts a node at v = 0
    g = build_phase_grid(p)
    f = initial_condition(p, g).dense()
    j = int(np.argmin(np.abs(g.v_nodes[:, 0])))
    assert g.v_nodes[j, 0] == pytest.approx(0.0, abs=1e-14)
    assert f[0, j] == pytest.approx(1.01 / math.sqrt(2 * math.pi), rel=1e-14)


def test_two_stream_defaults():
    p = two_stream_1d()
    assert p.v0 == 2.4 and p.beta == 1e-3 and p.t_f == 36.0
    assert p.x_length == pytest.approx(10 * math.pi / 0.2)
    q = two_stream_1d(wavenumber=0.5)
    assert q.x_length == pytest.approx(10 * math.pi / 0.5)


@pytest.mark.parametrize("factory", [landau_1d, two_stream_1d, landau_2d])
def test_nonnegative_and_matches_formula(factory):
    p = factory(n_x=8, n_v=12)
    g = build_phase_grid(p)
    f = initial_condition(p, g)
    dense = f.dense()
    assert np.all(dense >= 0)
    rng = np.random.default_rng(0)
    i = rng.integers(0, g.n_x, 50)
    j = rng.integers(0, g.n_v, 50)
    expected = initial_condition_formula(p, g.x_nodes[i], g.v_nodes[j])
    np.testing.assert_allclose(dense[i, j], expected, rtol=1e-14, atol=1e-14)


def test_landau_2d_rank_three():
    p = landau_2d()
    g = build_phase_grid(p)
    f = initial_condition(p, g)
    assert f.rank == 3 and (g.n_x, g.n_v) == (256, 1024)


def test_dimension_mismatch():
    p = landau_2d(n_x=4, n_v=4)
    g = build_phase_grid(landau_1d(n_x=8, n_v=8))
    with pytest.raises(ValueError):
        initial_condition(p, g)


def test_param_validation():
    with pytest.raises(ValueError):
        landau_1d(beta=-1.0)
    with pytest.raises(ValueError):
        landau_1d(wavenumber=0.0)
    with pytest.raises(ValueError):
        preset("nope")
    assert preset("LANDAU1D").kind is ScenarioKind.LANDAU_1D
    assert landau_1d().dt == pytest.approx(2.5e-3)
    assert isinstance(landau_1d(), ScenarioParams)
