import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sinhq import kernels, lattice
from sinhq import _kernels_py
from sinhq.lattice import (Field, Grid2, Grid4, PhysicsParams, apply_laplacian, apply_multiplier,
                           dirichlet_form, fft_forward, fft_inverse, finite_difference,
                           laplacian_symbol, site_coords)

pow2 = st.sampled_from([2, 4, 8, 16])
spacing = st.sampled_from([0.5, 0.25, 0.125, 1.0])


def test_grid_rejects_non_power_of_two():
    with pytest.raises(ValueError):
        Grid2(12, 0.1)
    with pytest.raises(ValueError):
        Grid4(8, 0.25, 6, 0.1)
    with pytest.raises(ValueError):
        Grid2(8, -0.1)


def test_grid_geometry():
    g = Grid4(8, 0.25, 16, 0.125)
    assert g.shape == (8, 8, 16, 16)
    assert g.cell_vol == 0.25**2 * 0.125**2
    assert math.isclose(g.volume, 2.0**2 * 2.0**2)
    assert g.zgrid == Grid2(16, 0.125)
    assert lattice.grid_from_dict(g.to_dict()) == g


@given(n=pow2, h=spacing, seed=st.integers(0, 2**32 - 1))
def test_fft_roundtrip_2d(n, h, seed):
    g = Grid2(n, h)
    f = np.random.default_rng(seed).standard_normal(g.shape)
    back = fft_inverse(g, fft_forward(g, f))
    assert np.max(np.abs(back - f)) <= 1e-12 * max(1.0, np.max(np.abs(f)))


def test_fft_convention_constant_and_parseval(rng):
    g = Grid2(8, 0.25)
    F = fft_forward(g, np.full(g.shape, 3.0))
    # Riemann-sum transform of a constant: c * area at k = 0, zero elsewhere
    assert math.isclose(F[0, 0].real, 3.0 * g.volume, rel_tol=1e-14)
    assert np.max(np.abs(F.ravel()[1:])) < 1e-12
    f = rng.standard_normal(g.shape)
    lhs = np.sum(f**2) * g.cell_vol
    rhs = np.sum(np.abs(fft_forward(g, f)) ** 2) / g.volume
    assert math.isclose(lhs, rhs, rel_tol=1e-12)


def test_symbol_is_eigenvalue_of_stencil():
    g = Grid2(16, 0.125)
    cs = site_coords(g)
    k = 2 * math.pi / g.Lz * 3
    f = np.cos(k * cs[0]) * np.ones(g.shape)
    sig = (4 / g.eps**2) * math.sin(g.eps * k / 2) ** 2
    assert np.allclose(apply_laplacian(g, f), -sig * f, atol=1e-10)


@given(seed=st.integers(0, 2**32 - 1))
def test_laplacian_matches_spectral_4d(seed):
    g = Grid4(4, 0.5, 8, 0.25)
    f = np.random.default_rng(seed).standard_normal(g.shape)
    sp = fft_inverse(g, -laplacian_symbol(g) * fft_forward(g, f))
    assert np.max(np.abs(apply_laplacian(g, f) - sp)) <= 1e-10 * np.max(np.abs(f))


def test_backends_agree(rng):
    g = Grid4(4, 0.5, 8, 0.25)
    f = rng.standard_normal(g.shape)
    a = _kernels_py.laplacian(f, g.spacings)
    b = kernels.laplacian(f, g.spacings)
    assert np.max(np.abs(a - b)) < 1e-12 * np.max(np.abs(a))
    assert kernels.BACKEND in ("cython", "python")


def test_dirichlet_form_spectral(rng):
    g = Grid2(16, 0.125)
    f = rng.standard_normal(g.shape)
    F = fft_forward(g, f)
    spectral = float(np.sum(laplacian_symbol(g) * np.abs(F) ** 2) / g.volume)
    assert math.isclose(dirichlet_form(g, f), spectral, rel_tol=1e-11)
    assert math.isclose(dirichlet_form(g, f), -np.sum(f * apply_laplacian(g, f)) * g.cell_vol,
                        rel_tol=1e-11)


def test_multiplier_resolvent_inverts(rng):
    g = Grid2(8, 0.25)
    f = rng.standard_normal(g.shape)
    u = apply_multiplier(g, f, lattice.resolvent_power(g, 2.0, -1.0))
    assert np.max(np.abs(2.0 * u - apply_laplacian(g, u) - f)) < 1e-10


def test_finite_difference_zero_shift():
    g = Grid2(8, 0.25)
    with pytest.raises(ValueError):
        finite_difference(g, np.zeros(g.shape), (0, 0))


def test_physics_params():
    p = PhysicsParams.from_a2(0.25)
    assert math.isclose(p.alpha, 2 * math.pi)
    assert math.isclose(p.beta, p.alpha / math.sqrt(4 * math.pi))
    assert math.isclose(p.a2, 0.25)
    with pytest.raises(ValueError):
        PhysicsParams(alpha=4 * math.pi)
    PhysicsParams(alpha=4 * math.pi, allow_supercritical=True)
    with pytest.raises(ValueError):
        PhysicsParams(m=0.0)


def test_field_rejects_nonfinite():
    g = Grid2(4, 0.5)
    v = np.zeros(g.shape)
    v[1, 1] = np.nan
    with pytest.raises(ValueError):
        Field(g, v)


def test_site_coords_minimum_image():
    g = Grid2(8, 0.25)
    cs = site_coords(g)
    assert np.max(np.abs(cs[0])) <= g.Lz / 2
    assert cs[0][0, 0] == 0.0
