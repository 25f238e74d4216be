"""White noise, the massive free field, Green functions, Wick calculus and
Gaussian multiplicative chaos on the periodic lattice."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy import integrate, special

from .lattice import (Grid, Grid2, Grid4, apply_laplacian, apply_multiplier,
                      laplacian_symbol, resolvent_power, split_symbols)

L2_THRESHOLD = (4 * math.pi) ** 2
LOG_COEF = 2.0 / (4 * math.pi) ** 2


# ---------------------------------------------------------------- RNG

def make_rng(seed: int, stream: int = 0, tag: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by (seed, tag, stream).

    Philox is a counter-based bit generator, so draws for distinct streams
    are independent and reproducible regardless of scheduling order.
    """
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(tag), int(stream)])
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class NoiseSample:
    grid: Grid
    values: np.ndarray
    seed: int
    stream: int


def sample_noise(grid: Grid, seed: int, stream: int = 0) -> NoiseSample:
    """Lattice white noise: iid N(0, 1/cell_vol) per site."""
    rng = make_rng(seed, stream)
    v = rng.standard_normal(grid.shape) / math.sqrt(grid.cell_vol)
    return NoiseSample(grid, v, int(seed), int(stream))


# ---------------------------------------------------------------- free field

def solve_gff(grid: Grid, xi, m: float) -> np.ndarray:
    """W = (m^2 - Delta)^{-1} xi by spectral division."""
    if not m > 0:
        raise ValueError("m must be positive")
    xi = xi.values if isinstance(xi, NoiseSample) else np.asarray(xi)
    return apply_multiplier(grid, xi, resolvent_power(grid, m * m, -1.0))


def gff_residual(grid: Grid, W: np.ndarray, xi: np.ndarray, m: float) -> float:
    return float(np.max(np.abs(m * m * W - apply_laplacian(grid, W) - xi)))


def sample_gff(grid: Grid, m: float, seed: int, stream: int = 0) -> np.ndarray:
    return solve_gff(grid, sample_noise(grid, seed, stream), m)


# ---------------------------------------------------------------- Green functions

@dataclass
class GreenTable:
    grid: Grid
    m: float
    values: np.ndarray

    @property
    def origin(self) -> float:
        return float(self.values.flat[0])


def green_symbol(grid: Grid, m: float, half: bool = True) -> np.ndarray:
    return resolvent_power(grid, m * m, -2.0, half=half)


def green_table(grid: Grid, m: float) -> GreenTable:
    """Covariance of W on the torus: inverse transform of (m^2+sigma)^{-2}."""
    if not m > 0:
        raise ValueError("m must be positive")
    s = green_symbol(grid, m, half=True)
    # (1/volume) sum_k e^{-ik.y} s(k); s is even so the sign is irrelevant
    vals = sfft.irfftn(s, s=grid.shape, axes=range(len(grid.shape)))
    vals *= grid.size / grid.volume
    return GreenTable(grid, m, vals)


def green_origin(grid: Grid, m: float) -> float:
    """G(0) = (1/volume) sum_k (m^2+sigma)^{-2}."""
    return float(np.sum((m * m + laplacian_symbol(grid)) ** -2.0) / grid.volume)


def _x_summed(grid: Grid4, a: np.ndarray, power: float = -2.0) -> np.ndarray:
    """(1/Lx^2) sum_k (a + sigma_x(k))^power for an array of shifts a."""
    k = 2 * np.pi * np.fft.fftfreq(grid.Mx, d=grid.hx)
    s1 = (4 / grid.hx**2) * np.sin(grid.hx * k / 2) ** 2
    sx = (s1[:, None] + s1[None, :]).ravel()
    a = np.asarray(a, dtype=np.float64)
    out = np.zeros_like(a)
    for v in sx:
        out += (a + v) ** power
    return out / grid.Lx**2


def green_zplane(grid: Grid4, m: float) -> np.ndarray:
    """G(0, z) for every z in the plane x = 0 without forming 4D arrays."""
    k = 2 * np.pi * np.fft.fftfreq(grid.Nz, d=grid.eps)
    s1 = (4 / grid.eps**2) * np.sin(grid.eps * k / 2) ** 2
    sz = s1[:, None] + s1[None, :]
    g = _x_summed(grid, m * m + sz)
    return sfft.fft2(g).real / grid.Lz**2


def green_continuum(r, m: float = 1.0) -> np.ndarray:
    """Continuum 4D kernel of (m^2-Delta)^{-2} at distance r > 0.

    Evaluated by 1D quadrature of the heat-kernel representation
    int_0^inf t e^{-m^2 t} (4 pi t)^{-2} e^{-r^2/4t} dt.
    """
    def one(rr):
        f = lambda u: math.exp(-m * m * math.exp(u) - rr * rr / (4 * math.exp(u))) / (16 * math.pi**2)
        # substitution t = e^u turns t dt/t^2 into du
        u0 = math.log(rr * rr / (4 * m * m)) / 2 if rr > 0 else 0.0
        v, _ = integrate.quad(f, u0 - 40, u0 + 40, epsabs=0, epsrel=1e-10, limit=400)
        return v
    r = np.atleast_1d(np.asarray(r, dtype=np.float64))
    if np.any(r <= 0):
        raise ValueError("continuum kernel diverges at r = 0")
    return np.array([one(x) for x in r])


def green_closed_form(r, m: float = 1.0) -> np.ndarray:
    return special.k0(m * np.asarray(r)) / (8 * math.pi**2)


# ---------------------------------------------------------------- Wick calculus

@dataclass
class WickData:
    sigma2: float

    def c(self, alpha: float) -> float:
        return 0.5 * alpha * alpha * self.sigma2


def wick_constant(grid: Grid, m: float) -> WickData:
    return WickData(green_origin(grid, m))


@dataclass
class CellMeasure:
    grid: Grid
    mass: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.mass = np.asarray(self.mass, dtype=np.float64)
        if self.mass.shape != tuple(self.grid.shape):
            raise ValueError("mass array does not match grid")
        if not np.all(np.isfinite(self.mass)) or np.any(self.mass < 0):
            raise ValueError("cell masses must be finite and nonnegative")

    @property
    def density(self) -> np.ndarray:
        return self.mass / self.grid.cell_vol

    def total(self) -> float:
        return float(self.mass.sum())

    @classmethod
    def lebesgue(cls, grid: Grid) -> "CellMeasure":
        return cls(grid, np.full(grid.shape, grid.cell_vol))


def check_charge(alpha: float, allow_supercritical: bool = False):
    if alpha * alpha >= L2_THRESHOLD:
        if not allow_supercritical:
            raise ValueError("alpha^2 >= (4 pi)^2 is outside the L2 regime")
        warnings.warn("supercritical charge: no correctness claims", RuntimeWarning)


def gmc(grid: Grid, W: np.ndarray, alpha: float, wick: WickData,
        allow_supercritical: bool = False) -> CellMeasure:
    """Cell masses cell_vol * exp(alpha W - alpha^2 sigma2 / 2)."""
    check_charge(alpha, allow_supercritical)
    mass = grid.cell_vol * np.exp(alpha * np.asarray(W) - wick.c(alpha))
    return CellMeasure(grid, mass, {"alpha": alpha})


def wick_power(W: np.ndarray, n: int, wick: WickData) -> np.ndarray:
    """:W^n: via the Hermite recursion."""
    if n < 0:
        raise ValueError("n must be >= 0")
    W = np.asarray(W, dtype=np.float64)
    prev, cur = np.ones_like(W), W.copy()
    if n == 0:
        return prev
    for k in range(1, n):
        prev, cur = cur, W * cur - k * wick.sigma2 * prev
    return cur


def wick_series(W: np.ndarray, alpha: float, wick: WickData, rtol: float = 1e-6,
                nmax: int = 400) -> tuple[np.ndarray, int]:
    """Partial sum of sum_n alpha^n/n! :W^n: truncated by a remainder bound.

    The Hermite tail is bounded termwise by |alpha|^n/n! * (|W| + sqrt(n sigma2))^n;
    terms are added until that bound falls below rtol times the smallest
    value of the exact density.
    """
    W = np.asarray(W, dtype=np.float64)
    exact_min = float(np.exp(alpha * W - wick.c(alpha)).min())
    wmax = float(np.max(np.abs(W)))
    total = np.ones_like(W)
    prev, cur = np.ones_like(W), W.copy()
    fact = 1.0
    n = 1
    while n <= nmax:
        fact *= alpha / n
        total += fact * cur
        bound = abs(fact) * alpha * (wmax + math.sqrt((n + 1) * wick.sigma2)) ** (n + 1) / (n + 1)
        prev, cur = cur, W * cur - n * wick.sigma2 * prev
        n += 1
        if abs(bound) < 1e-3 * rtol * exact_min and n > 2:
            break
    return total, n - 1


# ---------------------------------------------------------------- periodization

def periodize(grid: Grid, xi, window: int, tile: bool = False):
    """Restrict a noise sample on a large z-torus to the N-site window.

    The periodized noise on the big torus is the window tiled in z; with
    ``tile=False`` the window itself is returned on the small torus.
    """
    vals = xi.values if isinstance(xi, NoiseSample) else np.asarray(xi)
    nz = grid.Nz
    if window < 2 or nz % window:
        raise ValueError("window must divide the torus size")
    sl = (Ellipsis, slice(0, window), slice(0, window))
    win = vals[sl].copy()
    if isinstance(grid, Grid4):
        small = Grid4(grid.Mx, grid.hx, window, grid.eps)
    else:
        small = Grid2(window, grid.eps)
    if tile:
        reps = (1,) * (vals.ndim - 2) + (nz // window, nz // window)
        return grid, np.tile(win, reps)
    return small, win


def slice_covariance_symbol(grid: Grid4, m: float) -> np.ndarray:
    """Symbol of the free-field covariance restricted to an x-plane."""
    _, sz = split_symbols(grid)
    return _x_summed(grid, m * m + sz.reshape(grid.Nz, grid.Nz))


def mode_sum_variance(grid: Grid, m: float, power: float = -2.0) -> float:
    return float(np.sum((m * m + laplacian_symbol(grid)) ** power) / grid.volume)
