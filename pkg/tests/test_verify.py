import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sinhq import gibbs2d, verify
from sinhq.lattice import Grid2, site_coords


def test_drift():
    assert verify.drift([2.0, 2.0]) == 0.0
    assert math.isclose(verify.drift([1.0, -1.5, 1.2]), 0.5)


def test_report_is_json_and_reproducible():
    a = verify.run_check("algebra", seed=3).to_dict()
    b = verify.run_check("algebra", seed=3).to_dict()
    json.dumps(a)
    assert a["pass"] and a["seed"] == 3
    strip = lambda d: {k: v for k, v in d.items() if k != "runtime_s"}
    assert strip(a) == strip(b)


def test_unknown_check():
    with pytest.raises(KeyError):
        verify.run_check("nope")


@given(kappa=st.floats(0.3, 3.0), amp=st.floats(0.1, 10.0))
def test_cosh_fit_recovers_rate(kappa, amp):
    T, eps = 32, 0.125
    t = np.arange(T) * eps
    C = amp * np.cosh(kappa * (t - T * eps / 2))
    k, r2 = verify.fit_cosh_rate(C, eps)
    assert math.isclose(k, kappa, rel_tol=1e-5) and r2 > 1 - 1e-10


def test_gram_positive_for_gaussian_field():
    # the nearest-neighbour lattice free field is reflection positive
    g = Grid2(16, 0.25)
    model = gibbs2d.CoshModel2D(g, 1.0, 1.0, 0.0)
    r = np.random.default_rng(0)
    xi = r.standard_normal((20000,) + g.shape) / math.sqrt(g.cell_vol)
    from scipy import fft as sfft
    phi = sfft.ifft2(sfft.fft2(xi) * np.sqrt(model.cov_symbol)).real
    F, FT = verify.reflection_gram(phi, g.eps)
    assert verify.gram_min_eig(F, FT) > -0.02


def test_gram_detects_negative_kernel():
    # anti-correlated across the reflection plane: the Gram matrix is indefinite
    r = np.random.default_rng(1)
    n, T, S = 5000, 8, 4
    base = r.standard_normal((n, 1, S))
    samples = np.zeros((n, T, S))
    samples[:, 1:4] = base
    samples[:, -3:] = -base
    samples += 0.1 * r.standard_normal(samples.shape)
    F, FT = verify.reflection_gram(samples, 0.25)
    assert verify.gram_min_eig(F, FT) < -0.5


def test_bumps():
    g = Grid2(32, 0.125)
    b = verify.compact_bump(g, (0.0, 0.0), 0.5)
    assert b.max() > 0 and np.all(b >= 0)
    z = site_coords(g)
    assert np.all(b[np.hypot(z[0], z[1]) >= 0.5] == 0)
    assert len(verify.default_tests(g)) == 5
