"""Hybrid Monte Carlo for the 2D lattice cosh model.

The action is

    S(phi) = 1/2 cell sum phi (A phi) + lam cell sum (:e^{c phi}: + :e^{-c phi}:)

with :e^{c phi}: = exp(c phi - c^2 wick2), wick2 = half the site variance of
the Gaussian base.  Two bases are supported: the standard lattice GFF
(A = m^2 - Delta) and the exact covariance of an x-slice of the 4D free
field (A = 1 / C(q)).
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

from . import kernels
from .fields import make_rng, slice_covariance_symbol
from .lattice import Grid2, Grid4, axis_symbol, laplacian_symbol, mode_axes

EXP_CAP = 700.0


@dataclass
class CoshModel2D:
    grid: Grid2
    m: float
    charge: float
    lam: float
    base: str = "lattice"            # "lattice" or "slice"
    grid4: Grid4 | None = None       # needed for the slice base
    cov_symbol: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.base not in ("lattice", "slice"):
            raise ValueError("base must be 'lattice' or 'slice'")
        if self.cov_symbol is None:
            if self.base == "lattice":
                self.cov_symbol = 1.0 / (self.m**2 + laplacian_symbol(self.grid))
            else:
                if self.grid4 is None:
                    raise ValueError("slice base needs the 4D grid")
                if (self.grid4.Nz, self.grid4.eps) != (self.grid.Nz, self.grid.eps):
                    raise ValueError("4D grid z-plane does not match the 2D grid")
                self.cov_symbol = exact_slice_covariance(self.grid4, self.m)
        if np.any(self.cov_symbol <= 0):
            raise ValueError("base covariance is not positive definite")
        self.inv_symbol = 1.0 / self.cov_symbol
        self.site_var = float(np.sum(self.cov_symbol) / self.grid.volume)

    @property
    def wick2(self) -> float:
        return 0.5 * self.site_var

    @property
    def wick_factor(self) -> float:
        return math.exp(-self.charge**2 * self.wick2)

    def half(self, sym):
        n = self.grid.Nz
        return sym[:, : n // 2 + 1]

    def apply(self, f, sym):
        return sfft.irfft2(sfft.rfft2(f) * self.half(sym), s=f.shape)


def exact_slice_covariance(grid4: Grid4, m: float) -> np.ndarray:
    """C(q) = (1/Lx^2) sum_k (m^2 + sigma_x(k) + sigma_z(q))^{-2} on the z dual lattice."""
    return slice_covariance_symbol(grid4, m)


def continuum_slice_symbol(grid: Grid2, m: float) -> np.ndarray:
    """(4 pi)^{-1} (m^2 + sigma_z)^{-1}: the hx -> 0, Lx -> inf limit of the slice covariance."""
    return 1.0 / (4 * math.pi * (m * m + laplacian_symbol(grid)))


# ---------------------------------------------------------------- action

def action(phi: np.ndarray, model: CoshModel2D) -> float:
    g = model.grid
    phi = np.asarray(phi, dtype=np.float64)
    quad = 0.5 * g.cell_vol * float(np.sum(phi * model.apply(phi, model.inv_symbol)))
    if model.lam == 0:
        return quad
    t = model.charge * phi
    if np.max(np.abs(t)) > EXP_CAP:
        raise OverflowError("charge*phi exceeds the overflow cap")
    pot = np.sum(np.exp(t) + np.exp(-t)) * model.wick_factor
    return quad + model.lam * g.cell_vol * float(pot)


def grad_action(phi: np.ndarray, model: CoshModel2D) -> np.ndarray:
    g = model.grid
    out = g.cell_vol * model.apply(phi, model.inv_symbol)
    if model.lam:
        out += kernels.cosh_force(phi, model.charge, model.lam * g.cell_vol * model.wick_factor,
                                  EXP_CAP)
    return out


# ---------------------------------------------------------------- HMC

@dataclass
class ChainStats:
    n_samples: int
    acceptance: float
    tau_int: dict
    ess: dict
    step: float
    n_leap: int
    runtime_s: float = 0.0
    warnings: list = field(default_factory=list)


def integrated_time(x: np.ndarray, c: float = 5.0) -> float:
    """Sokal's self-consistent window estimate of the integrated autocorrelation time."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if n < 8 or np.var(x) == 0:
        return 0.5
    y = x - x.mean()
    f = sfft.rfft(y, n=2 * n)
    acf = sfft.irfft(f * np.conj(f))[:n]
    acf /= acf[0]
    tau = 0.5
    for w in range(1, n):
        tau += acf[w]
        if w >= c * tau:
            break
    return max(float(tau), 0.5)


def sample_chain(model: CoshModel2D, n_samples: int, seed: int, step: float = 0.3,
                 n_leap: int = 5, burn_in: int = 200, thin: int = 1, kinetic_shift: float | None = None,
                 stream: int = 0, observables=None, phi0=None, store: bool = True):
    """HMC with a Fourier-diagonal mass matrix cell*(A + shift).

    Returns (samples, stats).  ``samples`` has shape (n_samples, Nz, Nz) when
    ``store`` is true; ``observables`` maps names to callables evaluated on
    every retained sample for the autocorrelation statistics.
    """
    g = model.grid
    rng = make_rng(seed, stream, tag=2)
    cv = g.cell_vol
    if kinetic_shift is None:
        # curvature of the potential at phi = 0 on the Wick-ordered scale
        kinetic_shift = 2 * model.lam * model.charge**2 * model.wick_factor * math.exp(
            model.charge**2 * model.site_var / 2)
    msym = cv * (model.inv_symbol + kinetic_shift)
    sqrt_m = np.sqrt(msym)
    inv_m = 1.0 / msym

    def kinetic(p):
        return 0.5 * float(np.sum(p * model.apply(p, inv_m)))

    phi = np.zeros(g.shape) if phi0 is None else np.array(phi0, dtype=np.float64)
    try:
        S = action(phi, model)
    except OverflowError:
        phi = np.zeros(g.shape)
        S = action(phi, model)
    F = -grad_action(phi, model)
    total = burn_in + n_samples * thin
    kept = np.empty((n_samples,) + g.shape) if store else None
    obs = {k: np.empty(n_samples) for k in (observables or {})}
    acc = 0
    t0 = time.perf_counter()
    for it in range(total):
        p = model.apply(rng.standard_normal(g.shape), sqrt_m)
        eps = step * (0.6 + 0.8 * rng.random())
        H0 = kinetic(p) + S
        q, Fq = phi, F
        try:
            p = p + 0.5 * eps * Fq
            for j in range(n_leap):
                q = q + eps * model.apply(p, inv_m)
                Fq = -grad_action(q, model)
                if j < n_leap - 1:
                    p = p + eps * Fq
            p = p + 0.5 * eps * Fq
            S1 = action(q, model)
            dH = kinetic(p) + S1 - H0
        except OverflowError:
            dH = math.inf
        if rng.random() < math.exp(min(0.0, -dH)):
            phi, S, F = q, S1, Fq
            if it >= burn_in:
                acc += 1
        if it >= burn_in and (it - burn_in) % thin == thin - 1:
            k = (it - burn_in) // thin
            if store:
                kept[k] = phi
            for name, fn in (observables or {}).items():
                obs[name][k] = fn(phi)
    rate = acc / max(1, total - burn_in)
    taus = {k: integrated_time(v) for k, v in obs.items()}
    stats = ChainStats(n_samples, rate, taus, {k: n_samples / (2 * t) for k, t in taus.items()},
                       step, n_leap, time.perf_counter() - t0)
    if rate < 0.2:
        stats.warnings.append(f"acceptance {rate:.2f} below 0.2: step size mis-tuned")
    return (kept if store else obs), stats


# ---------------------------------------------------------------- Schwinger functions

def pairing(samples: np.ndarray, f: np.ndarray, cell: float) -> np.ndarray:
    """<phi, f> for every sample."""
    return np.tensordot(samples, f, axes=([-2, -1], [-2, -1])) * cell


def block_jackknife(values: np.ndarray, n_blocks: int = 50, fn=np.mean) -> tuple[float, float]:
    """Jackknife over contiguous blocks: (estimate, standard error)."""
    values = np.asarray(values)
    n = values.shape[0]
    if n < 2:
        return float(fn(values)) if n else math.nan, math.nan
    n_blocks = max(2, min(n_blocks, n))
    b = n // n_blocks
    values = values[: b * n_blocks]
    est = fn(values)
    jk = []
    for i in range(n_blocks):
        rest = np.concatenate([values[: i * b], values[(i + 1) * b:]])
        jk.append(fn(rest))
    jk = np.asarray(jk)
    se = math.sqrt((n_blocks - 1) * np.mean((jk - jk.mean(axis=0)) ** 2))
    return float(est), float(se)


def schwinger(samples: np.ndarray, tests, cell: float, n_blocks: int = 50) -> tuple[float, float]:
    """S_n(f_1 x ... x f_n) with a block-jackknife error bar; S_0 = 1."""
    if len(tests) == 0:
        return 1.0, 0.0
    if len(tests) > 4:
        raise ValueError("only n <= 4 is supported")
    prod = np.ones(samples.shape[0])
    for f in tests:
        prod = prod * pairing(samples, f, cell)
    return block_jackknife(prod, n_blocks)


def gaussian_pairing(model: CoshModel2D, f: np.ndarray, g: np.ndarray) -> float:
    """<f, C g> for the base covariance C."""
    cell = model.grid.cell_vol
    return float(np.sum(f * model.apply(g, model.cov_symbol)) * cell)


def estimator_rows(samples: np.ndarray, observables: dict, cell: float) -> list[dict]:
    """Rows for the estimator CSV: observable, value, stderr, tau_int, ESS."""
    rows = []
    for name, fn in observables.items():
        v = np.array([fn(s) for s in samples])
        est, se = block_jackknife(v)
        tau = integrated_time(v)
        rows.append({"observable": name, "value": est, "stderr": se, "tau_int": tau,
                     "ESS": len(v) / (2 * tau)})
    return rows
