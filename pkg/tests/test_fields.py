import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sinhq import fields
from sinhq.lattice import Grid2, Grid4, site_coords

G2 = Grid2(16, 0.25)
G4 = Grid4(4, 0.5, 8, 0.25)


@given(seed=st.integers(0, 2**63), stream=st.integers(0, 1000))
@settings(max_examples=10)
def test_noise_is_reproducible(seed, stream):
    a = fields.sample_noise(G2, seed, stream).values
    b = fields.sample_noise(G2, seed, stream).values
    c = fields.sample_noise(G2, seed, stream + 1).values
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_noise_moments():
    g = Grid2(64, 0.125)
    v = np.stack([fields.sample_noise(g, 7, s).values for s in range(50)])
    n = v.size
    assert abs(v.mean()) < 5 / math.sqrt(n * g.cell_vol)
    # site variance 1/cell_vol
    assert abs(v.var() * g.cell_vol - 1) < 5 * math.sqrt(2 / n)


def test_noise_isometry():
    # E[(xi, f)^2] = ||f||^2 for a fixed test function
    g = Grid2(16, 0.25)
    c = site_coords(g)
    f = np.exp(-(c[0] ** 2 + c[1] ** 2))
    vals = np.array([np.sum(fields.sample_noise(g, 3, s).values * f) * g.cell_vol for s in range(4000)])
    norm2 = np.sum(f * f) * g.cell_vol
    assert abs(vals.var() / norm2 - 1) < 5 * math.sqrt(2 / 4000)


@pytest.mark.parametrize("grid", [G2, G4])
def test_gff_solves_equation(grid):
    xi = fields.sample_noise(grid, 11)
    W = fields.solve_gff(grid, xi, 1.3)
    assert fields.gff_residual(grid, W, xi.values, 1.3) < 1e-10 * np.max(np.abs(xi.values))


def test_gff_rejects_bad_mass():
    with pytest.raises(ValueError):
        fields.solve_gff(G2, np.zeros(G2.shape), 0.0)


def test_gff_site_variance_matches_mode_sum():
    g = Grid4(2, 0.5, 4, 0.5)
    m = 1.0
    W = np.stack([fields.sample_gff(g, m, 5, s) for s in range(4000)])
    est = W.var(axis=0).mean()
    ref = fields.mode_sum_variance(g, m)
    assert math.isclose(ref, fields.green_origin(g, m), rel_tol=1e-12)
    # per-site variance estimate has relative sd ~ sqrt(2/4000), averaged over correlated sites
    assert abs(est / ref - 1) < 0.1


def test_gff_two_point_matches_table():
    g = Grid2(8, 0.5)
    m = 1.0
    W = np.stack([fields.sample_gff(g, m, 9, s) for s in range(6000)])
    tab = fields.green_table(g, m).values
    emp = np.mean(W[:, 0, 0][:, None, None] * W, axis=0)
    assert np.max(np.abs(emp - tab)) < 0.1 * tab[0, 0]


def test_green_table_symmetry_and_origin():
    tab = fields.green_table(G4, 1.0).values
    assert np.allclose(tab, np.flip(np.roll(tab, -1, axis=(0, 1, 2, 3)), axis=(0, 1, 2, 3)))
    assert np.allclose(tab, np.swapaxes(tab, 2, 3))
    assert math.isclose(tab.flat[0], fields.green_origin(G4, 1.0), rel_tol=1e-12)


def test_green_origin_direct_sum():
    g = Grid4(4, 1.0, 4, 1.0)
    m = 0.7
    k = 2 * np.pi * np.arange(4) / 4
    s1 = 4 * np.sin(k / 2) ** 2
    tot = 0.0
    for a in s1:
        for b in s1:
            for c in s1:
                for d in s1:
                    tot += (m * m + a + b + c + d) ** -2
    assert math.isclose(fields.green_origin(g, m), tot / g.volume, rel_tol=1e-12)


def test_green_zplane_matches_table():
    g = Grid4(4, 0.5, 8, 0.25)
    z = fields.green_zplane(g, 1.0)
    tab = fields.green_table(g, 1.0).values[0, 0]
    assert np.allclose(z, tab, rtol=1e-10, atol=0)


@pytest.mark.parametrize("r", [0.05, 0.3, 1.0, 2.5])
def test_green_continuum_bessel(r):
    assert math.isclose(fields.green_continuum(r, 1.0)[0], fields.green_closed_form(r, 1.0),
                        rel_tol=1e-7)


def test_green_continuum_rejects_origin():
    with pytest.raises(ValueError):
        fields.green_continuum(0.0)


def test_wick_constant_scaling():
    w = fields.WickData(0.37)
    assert w.c(0.0) == 0.0
    assert math.isclose(w.c(2 * 1.3), 4 * w.c(1.3))


def test_wick_sigma2_small_grid():
    g = Grid4(2, 1.0, 2, 1.0)
    # each direction has symbol 0 or 4; 16 modes, volume 16
    tot = sum((1.0 + 4 * n) ** -2 * math.comb(4, n) for n in range(5))
    assert math.isclose(fields.wick_constant(g, 1.0).sigma2, tot / 16, rel_tol=1e-12)


def test_gmc_zero_charge_is_lebesgue():
    W = fields.sample_gff(G4, 1.0, 1)
    mu = fields.gmc(G4, W, 0.0, fields.wick_constant(G4, 1.0))
    assert np.array_equal(mu.mass, fields.CellMeasure.lebesgue(G4).mass)


def test_gmc_charge_guard():
    W = np.zeros(G2.shape)
    with pytest.raises(ValueError):
        fields.gmc(G2, W, 4 * math.pi, fields.WickData(1.0))
    with pytest.warns(RuntimeWarning):
        fields.gmc(G2, W, 4 * math.pi, fields.WickData(1e-3), allow_supercritical=True)


def test_cell_measure_validation():
    with pytest.raises(ValueError):
        fields.CellMeasure(G2, -np.ones(G2.shape))
    with pytest.raises(ValueError):
        fields.CellMeasure(G2, np.ones((3, 3)))


@given(seed=st.integers(0, 2**32 - 1), s2=st.floats(0.01, 3.0))
def test_wick_power_low_orders(seed, s2):
    W = np.random.default_rng(seed).standard_normal(20)
    w = fields.WickData(s2)
    assert np.array_equal(fields.wick_power(W, 0, w), np.ones(20))
    assert np.allclose(fields.wick_power(W, 1, w), W)
    assert np.allclose(fields.wick_power(W, 2, w), W**2 - s2)
    assert np.allclose(fields.wick_power(W, 3, w), W**3 - 3 * s2 * W)


@given(seed=st.integers(0, 2**32 - 1), alpha=st.floats(-2.0, 2.0))
def test_wick_series_converges_to_exponential(seed, alpha):
    W = np.random.default_rng(seed).standard_normal(50)
    w = fields.WickData(0.8)
    tot, n = fields.wick_series(W, alpha, w)
    exact = np.exp(alpha * W - w.c(alpha))
    assert np.max(np.abs(tot - exact) / exact) < 1e-6


def test_periodize_window_and_tile():
    g = Grid4(2, 0.5, 16, 0.25)
    xi = fields.sample_noise(g, 4)
    small, win = fields.periodize(g, xi, 8)
    assert small.Nz == 8 and np.array_equal(win, xi.values[..., :8, :8])
    _, tiled = fields.periodize(g, xi, 8, tile=True)
    assert np.array_equal(tiled[..., 8:, 8:], win) and np.array_equal(tiled[..., :8, 8:], win)
    # the free field of tiled noise is the tile of the small-torus field
    Wb = fields.solve_gff(g, tiled, 1.0)
    Ws = fields.solve_gff(small, win, 1.0)
    assert np.allclose(Wb[..., 8:, :8], Ws, atol=1e-12 * np.max(np.abs(Ws)))
    with pytest.raises(ValueError):
        fields.periodize(g, xi, 5)


def test_slice_covariance_matches_green_plane():
    g = Grid4(4, 0.5, 8, 0.25)
    sym = fields.slice_covariance_symbol(g, 1.0)
    from scipy import fft as sfft
    plane = sfft.ifft2(sym).real * g.Nz**2 / g.Lz**2
    assert np.allclose(plane, fields.green_zplane(g, 1.0), rtol=1e-10)


def test_slice_covariance_monte_carlo():
    g = Grid4(2, 0.5, 4, 0.5)
    W = np.stack([fields.sample_gff(g, 1.0, 2, s)[0, 0] for s in range(4000)])
    emp = np.mean(W[:, 0, 0][:, None, None] * W, axis=0)
    ref = fields.green_zplane(g, 1.0)
    assert np.max(np.abs(emp - ref)) < 0.1 * ref[0, 0]
