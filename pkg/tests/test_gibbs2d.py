import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sinhq import gibbs2d
from sinhq.lattice import Grid2, Grid4, laplacian_symbol

G = Grid2(8, 0.25)


def quadratic_matrix(model):
    n = model.grid.size
    cols = [model.apply(e.reshape(model.grid.shape), model.inv_symbol).ravel() for e in np.eye(n)]
    return np.array(cols).T


@given(seed=st.integers(0, 2**32 - 1))
def test_free_action_is_spectral(seed):
    model = gibbs2d.CoshModel2D(G, 1.0, 1.0, 0.0)
    phi = np.random.default_rng(seed).standard_normal(G.shape)
    F = np.fft.fft2(phi) * G.cell_vol
    ref = 0.5 * np.sum(np.abs(F) ** 2 * (1 + laplacian_symbol(G))) / G.volume
    assert math.isclose(gibbs2d.action(phi, model), ref, rel_tol=1e-11)


@given(seed=st.integers(0, 2**32 - 1))
def test_action_is_even(seed):
    model = gibbs2d.CoshModel2D(G, 1.0, 2.0, 0.7)
    phi = np.random.default_rng(seed).standard_normal(G.shape)
    assert math.isclose(gibbs2d.action(phi, model), gibbs2d.action(-phi, model), rel_tol=1e-13)


def test_action_two_by_two_by_hand():
    g = Grid2(2, 1.0)
    m, c, lam = 0.8, 1.3, 0.6
    model = gibbs2d.CoshModel2D(g, m, c, lam)
    phi = np.array([[0.3, -1.1], [0.7, 0.2]])
    # on a 2-periodic axis both neighbours coincide
    lap = 2 * (np.roll(phi, 1, 0) - phi) + 2 * (np.roll(phi, 1, 1) - phi)
    quad = 0.5 * np.sum(phi * (m * m * phi - lap))
    w2 = 0.5 * model.site_var
    pot = lam * np.sum(np.exp(c * phi - c * c * w2) + np.exp(-c * phi - c * c * w2))
    assert math.isclose(gibbs2d.action(phi, model), quad + pot, rel_tol=1e-13)
    # site variance of the 2x2 GFF: mean of 1/(m^2 + sigma) over the four modes
    ref = (1 / m**2 + 2 / (m**2 + 4) + 1 / (m**2 + 8)) / 4
    assert math.isclose(model.site_var, ref, rel_tol=1e-13)


@given(seed=st.integers(0, 2**32 - 1))
def test_gradient_matches_finite_differences(seed):
    model = gibbs2d.CoshModel2D(G, 1.0, 1.5, 0.8)
    r = np.random.default_rng(seed)
    phi, v = 0.5 * r.standard_normal(G.shape), r.standard_normal(G.shape)
    h = 1e-6
    fd = (gibbs2d.action(phi + h * v, model) - gibbs2d.action(phi - h * v, model)) / (2 * h)
    an = float(np.sum(gibbs2d.grad_action(phi, model) * v))
    assert abs(fd - an) < 1e-6 * max(1.0, abs(an))


def test_free_chain_variance():
    model = gibbs2d.CoshModel2D(G, 1.0, 1.0, 0.0)
    samples, st_ = gibbs2d.sample_chain(model, 4000, seed=1)
    site = samples.reshape(len(samples), -1)
    assert st_.acceptance > 0.5
    assert abs(site.mean()) < 0.05
    est, se = gibbs2d.block_jackknife(np.mean(site**2, axis=1))
    assert abs(est - model.site_var) < 5 * se


def _quadrature_moments(model, n=34, R=4.5):
    M = quadratic_matrix(model) * model.grid.cell_vol
    x = np.linspace(-R, R, n)
    P = np.stack(np.meshgrid(x, x, x, x, indexing="ij"), -1).reshape(-1, 4)
    quad = 0.5 * np.einsum("ni,ij,nj->n", P, M, P)
    c = model.charge
    pot = model.lam * model.grid.cell_vol * model.wick_factor * np.sum(np.exp(c * P) + np.exp(-c * P), 1)
    w = np.exp(-(quad + pot - (quad + pot).min()))
    z = w.sum()
    return float(np.sum(w * P[:, 0] ** 2) / z), float(np.sum(w * P[:, 0] ** 4) / z)


def test_interacting_moments_two_by_two():
    g = Grid2(2, 1.0)
    model = gibbs2d.CoshModel2D(g, 1.0, 1.0, 1.0)
    m2, m4 = _quadrature_moments(model)
    samples, st_ = gibbs2d.sample_chain(model, 20000, seed=3, step=0.5, n_leap=4)
    x = samples[:, 0, 0]
    e2, s2 = gibbs2d.block_jackknife(x**2)
    e4, s4 = gibbs2d.block_jackknife(x**4)
    assert abs(e2 - m2) < 5 * s2
    assert abs(e4 - m4) < 5 * s4
    assert abs(x.mean()) < 5 * gibbs2d.block_jackknife(x)[1]


def test_schwinger_basics():
    model = gibbs2d.CoshModel2D(G, 1.0, 1.0, 0.0)
    samples, _ = gibbs2d.sample_chain(model, 3000, seed=4)
    f = np.zeros(G.shape)
    f[0, 0] = f[1, 0] = 1.0 / G.cell_vol
    assert gibbs2d.schwinger(samples, [], G.cell_vol) == (1.0, 0.0)
    est, se = gibbs2d.schwinger(samples, [f, f], G.cell_vol)
    ref = gibbs2d.gaussian_pairing(model, f, f)
    assert abs(est - ref) < 5 * se
    with pytest.raises(ValueError):
        gibbs2d.schwinger(samples, [f] * 5, G.cell_vol)


def test_slice_base():
    g4 = Grid4(4, 0.5, 8, 0.25)
    model = gibbs2d.CoshModel2D(G, 1.0, 1.0, 1.0, base="slice", grid4=g4)
    assert np.all(model.cov_symbol > 0)
    with pytest.raises(ValueError):
        gibbs2d.CoshModel2D(G, 1.0, 1.0, 1.0, base="slice")
    with pytest.raises(ValueError):
        gibbs2d.CoshModel2D(G, 1.0, 1.0, 1.0, base="slice", grid4=Grid4(4, 0.5, 4, 0.5))


def test_integrated_time_ar1():
    rho, n = 0.8, 200000
    r = np.random.default_rng(0)
    e = r.standard_normal(n)
    x = np.empty(n)
    x[0] = e[0]
    for i in range(1, n):
        x[i] = rho * x[i - 1] + math.sqrt(1 - rho**2) * e[i]
    tau = gibbs2d.integrated_time(x)
    assert abs(tau / ((1 + rho) / (2 * (1 - rho))) - 1) < 0.1


def test_jackknife():
    v = np.arange(100.0)
    est, se = gibbs2d.block_jackknife(v, n_blocks=100)
    assert est == v.mean()
    assert math.isclose(se, v.std(ddof=1) / 10, rel_tol=1e-12)
    assert math.isnan(gibbs2d.block_jackknife(np.ones(1))[1])
