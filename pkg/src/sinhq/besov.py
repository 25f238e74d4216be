"""Littlewood-Paley analysis on the lattice: dyadic partitions, blocks,
weighted Besov and difference norms, the piecewise-constant extension and
its adjoint cell average, and kernel functionals of positive measures."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy import integrate

from .lattice import Grid, Grid2, Grid4, mode_axes, site_coords


# ---------------------------------------------------------------- partition

R0, R1 = 3.0 / 8.0, 0.5


def _smooth_step(t):
    """0 for t<=0, 1 for t>=1, C-infinity in between."""
    t = np.asarray(t, dtype=np.float64)
    def g(u):
        out = np.zeros_like(u)
        pos = u > 0
        out[pos] = np.exp(-1.0 / u[pos])
        return out
    a, b = g(t), g(1.0 - t)
    return a / (a + b)


def chi(r):
    """Radial bump: 1 on [0, 3/8], 0 on [1/2, inf)."""
    return _smooth_step((R1 - np.asarray(r, dtype=np.float64)) / (R1 - R0))


def cutoff_index(h: float) -> int:
    """Smallest j with 2^j beyond the Nyquist radius pi/h."""
    return int(math.floor(math.log2(math.pi / h))) + 1


@dataclass(frozen=True)
class DyadicPartition:
    """phi_{-1} = chi, phi_j = chi(2^{-j-1} .) - chi(2^{-j} .), and the last
    shell j_max collects everything beyond shell j_max - 1."""
    h: float
    j_max: int

    def phi(self, j: int, r) -> np.ndarray:
        if j < -1 or j > self.j_max:
            raise IndexError(f"shell {j} outside [-1, {self.j_max}]")
        r = np.asarray(r, dtype=np.float64)
        if j == -1:
            return chi(r)
        if j == self.j_max:
            return 1.0 - chi(r / 2.0**j)
        return chi(r / 2.0 ** (j + 1)) - chi(r / 2.0**j)

    @property
    def shells(self) -> range:
        return range(-1, self.j_max + 1)

    def kernel(self, grid: Grid, j: int) -> np.ndarray:
        """K_j: inverse transform of phi_j, as a lattice function."""
        rad = plane_radius(grid, range(len(grid.shape)), half=True)
        s = self.phi(j, rad)
        return sfft.irfftn(s, s=grid.shape, axes=range(len(grid.shape))) * grid.size / grid.volume


def build_partition(grid: Grid) -> DyadicPartition | tuple[DyadicPartition, DyadicPartition]:
    """Partition of the z-plane (Grid2) or the (x, z) pair of partitions (Grid4)."""
    def one(h):
        J = cutoff_index(h)
        if J < 1:
            raise ValueError("grid too small for two dyadic shells")
        return DyadicPartition(h, J)
    if isinstance(grid, Grid4):
        return one(grid.hx), one(grid.eps)
    return one(grid.eps)


def plane_radius(grid: Grid, axes, half: bool = True) -> np.ndarray:
    ks = mode_axes(grid, half=half)
    r2 = 0.0
    for a in axes:
        r2 = r2 + ks[a] ** 2
    return np.sqrt(r2)


def _apply(grid: Grid, f: np.ndarray, mult: np.ndarray) -> np.ndarray:
    return sfft.irfftn(sfft.rfftn(f) * mult, s=f.shape, axes=range(f.ndim))


def _as_pair(grid, part):
    if part is None:
        part = build_partition(grid)
    return part


# ---------------------------------------------------------------- blocks

def block_multipliers(grid: Grid, part=None, kind: str = "lattice") -> dict:
    """Spectral masks keyed by shell index (or (i, j) for kind='mixed')."""
    part = _as_pair(grid, part)
    if isinstance(grid, Grid2):
        rad = plane_radius(grid, (0, 1))
        return {j: part.phi(j, rad) for j in part.shells}
    px, pz = part
    rx = plane_radius(grid, (0, 1))
    rz = plane_radius(grid, (2, 3))
    fx = {i: px.phi(i, rx) for i in px.shells}
    fz = {j: pz.phi(j, rz) for j in pz.shells}
    if kind == "mixed":
        return {(i, j): fx[i] * fz[j] for i in fx for j in fz}
    if kind == "x":
        return fx
    if kind == "z":
        return fz
    # max-shell blocks: sum over max(i, j) = r
    out = {}
    for r in range(-1, max(px.j_max, pz.j_max) + 1):
        acc = 0.0
        for i in fx:
            for j in fz:
                if max(i, j) == r:
                    acc = acc + fx[i] * fz[j]
        out[r] = np.broadcast_to(acc, np.broadcast_shapes(np.shape(acc), rx.shape, rz.shape))
    return out


def lp_block(grid: Grid, f: np.ndarray, j, part=None, kind: str = "lattice") -> np.ndarray:
    """Delta_j f (2D), tilde-Delta_r f (4D, kind='lattice'), or
    Delta_i^x Delta_j^z f (4D, kind='mixed', j=(i, j))."""
    masks = block_multipliers(grid, part, kind)
    if j not in masks:
        raise IndexError(f"block {j} out of range")
    return _apply(grid, np.asarray(f, dtype=np.float64), masks[j])


def all_blocks(grid: Grid, f: np.ndarray, part=None, kind: str = "lattice") -> dict:
    F = sfft.rfftn(np.asarray(f, dtype=np.float64))
    masks = block_multipliers(grid, part, kind)
    return {j: sfft.irfftn(F * m, s=f.shape, axes=range(f.ndim)) for j, m in masks.items()}


# ---------------------------------------------------------------- weights

def rho(grid: Grid, ell: float, axes=None) -> np.ndarray:
    """(1 + |y|^2)^{-ell/2} on the fundamental domain centred at 0."""
    cs = site_coords(grid)
    axes = range(len(cs)) if axes is None else axes
    r2 = np.zeros(grid.shape)
    for a in axes:
        r2 = r2 + cs[a] ** 2
    return (1.0 + r2) ** (-ell / 2.0)


def weight(grid: Grid, ell1: float = 0.0, ell2: float | None = None) -> np.ndarray:
    """rho_ell over all axes, or rho_ell1(x) rho_ell2(z) for a 4D grid."""
    if ell2 is None or isinstance(grid, Grid2):
        return rho(grid, ell1)
    return rho(grid, ell1, (0, 1)) * rho(grid, ell2, (2, 3))


def clustering_weight(grid: Grid4, kappa: float, n: float) -> np.ndarray:
    cs = site_coords(grid)
    x2 = cs[0] ** 2 + cs[1] ** 2
    z2 = cs[2] ** 2 + cs[3] ** 2
    return (1 + kappa * np.sqrt(1 + x2)) ** (-n) * np.exp(kappa * np.sqrt(1 + z2))


def lp_norm(grid: Grid, f: np.ndarray, p: float, w=None) -> float:
    g = np.abs(f) if w is None else np.abs(f * w)
    if math.isinf(p):
        return float(g.max())
    return float((np.sum(g**p) * grid.cell_vol) ** (1.0 / p))


# ---------------------------------------------------------------- Besov norms

@dataclass
class BesovParams:
    s: float
    p: float = 2.0
    q: float | None = None
    ell: float = 0.0
    s2: float | None = None
    ell2: float | None = None
    a: float = 1.0
    b_ker: float = 0.5

    def __post_init__(self):
        if self.q is None:
            self.q = self.p
        if self.p < 1 or self.q < 1:
            raise ValueError("p, q must be >= 1")
        if not (self.a > 0 and 0 < self.b_ker < 1):
            raise ValueError("kernel parameters need a > 0 and 0 < b_ker < 1")


def _lq(vals, q):
    vals = np.asarray(vals)
    if math.isinf(q):
        return float(vals.max())
    return float(np.sum(vals**q) ** (1.0 / q))


def besov_norm(grid: Grid, f: np.ndarray, s: float, p: float = 2.0, q: float | None = None,
               ell: float = 0.0, kind: str = "lattice", s2: float | None = None,
               ell2: float | None = None, part=None) -> float:
    """Weighted Besov norm from Littlewood-Paley blocks.

    kind='lattice': 2D blocks, or 4D max-shell blocks on a Grid4.
    kind='mixed': 4D blocks Delta_i^x Delta_j^z with regularity s (x) and s2 (z).
    """
    return besov_report(grid, f, s, p, q, ell, kind, s2, ell2, part)["value"]


def besov_report(grid, f, s, p=2.0, q=None, ell=0.0, kind="lattice", s2=None, ell2=None,
                 part=None) -> dict:
    q = p if q is None else q
    f = np.asarray(f, dtype=np.float64)
    w = weight(grid, ell, ell2 if kind == "mixed" else None)
    blocks = all_blocks(grid, f, part, kind)
    if kind == "mixed":
        if s2 is None:
            raise ValueError("mixed norm needs s2")
        terms = [2.0 ** (s * i + s2 * j) * lp_norm(grid, b, p, w) for (i, j), b in blocks.items()]
        val = _lq(terms, p)
        trunc = max(max(k) for k in blocks)
    else:
        terms = [2.0 ** (s * j) * lp_norm(grid, b, p, w) for j, b in blocks.items()]
        val = _lq(terms, q)
        trunc = max(blocks)
    return {"norm_kind": f"besov-{kind}", "params": {"s": s, "s2": s2, "p": p, "q": q, "ell": ell,
            "ell2": ell2}, "value": float(val), "truncation_shell": int(trunc),
            "grid": grid.to_dict()}


# ---------------------------------------------------------------- differences

def lattice_shifts(grid: Grid, axes=None, cap: int = 8, family: str = "axis-diag") -> list[tuple]:
    """Lattice vectors (site units) with 0 < |k| <= 1 along the given axes.

    family='axis-diag' keeps axis-aligned and diagonal vectors up to ``cap``
    steps; family='all' keeps every vector in the cap box.
    """
    nd = len(grid.shape)
    axes = tuple(range(nd)) if axes is None else tuple(axes)
    out = []
    rng = range(-cap, cap + 1)
    for combo in itertools.product(rng, repeat=len(axes)):
        if not any(combo):
            continue
        nz = [abs(c) for c in combo if c]
        if family == "axis-diag" and len(set(nz)) != 1:
            continue
        v = [0] * nd
        for a, c in zip(axes, combo):
            v[a] = c
        if math.sqrt(sum((c * grid.spacings[a]) ** 2 for a, c in enumerate(v))) <= 1 + 1e-12:
            # keep one representative of each +-pair
            if tuple(-c for c in v) not in out:
                out.append(tuple(v))
    return out


def _shift(f, v):
    return np.roll(f, tuple(-c for c in v), axis=tuple(range(len(v))))


def difference_norm(grid: Grid, f: np.ndarray, s: float, p: float = 2.0, ell: float = 0.0,
                    axes=None, cap: int = 8, family: str = "axis-diag") -> float:
    """||f||_{L^p_ell} + sum_m sup_h |h|^{-(m ^ s)} ||D^m_h f||_{L^p_ell}, m <= n, n-1 < s <= n."""
    if not 0 < s <= 2:
        raise ValueError("difference norm supports 0 < s <= 2")
    f = np.asarray(f, dtype=np.float64)
    w = rho(grid, ell) if ell else None
    total = lp_norm(grid, f, p, w)
    n = 1 if s <= 1 else 2
    shifts = lattice_shifts(grid, axes, cap, family)
    for m in range(1, n + 1):
        best = 0.0
        for v in shifts:
            hl = math.sqrt(sum((c * grid.spacings[a]) ** 2 for a, c in enumerate(v)))
            if m == 1:
                d = _shift(f, v) - f
            else:
                d = 2 * f - _shift(f, v) - _shift(f, tuple(-c for c in v))
            best = max(best, lp_norm(grid, d, p, w) / hl ** min(m, s))
        total += best
    return float(total)


# ---------------------------------------------------------------- extension / discretization

def _check_factor(factor: int):
    if factor < 1 or factor & (factor - 1):
        raise ValueError("refinement factor must be a power of two")


def refine_grid(grid: Grid, factor: int) -> Grid:
    _check_factor(factor)
    if isinstance(grid, Grid4):
        return Grid4(grid.Mx, grid.hx, grid.Nz * factor, grid.eps / factor)
    return Grid2(grid.Nz * factor, grid.eps / factor)


def coarsen_grid(grid: Grid, factor: int) -> Grid:
    _check_factor(factor)
    if grid.Nz % factor or grid.Nz // factor < 2:
        raise ValueError("incompatible coarsening factor")
    if isinstance(grid, Grid4):
        return Grid4(grid.Mx, grid.hx, grid.Nz // factor, grid.eps * factor)
    return Grid2(grid.Nz // factor, grid.eps * factor)


def extend(f: np.ndarray, factor: int) -> np.ndarray:
    """Piecewise-constant refinement of the z-axes (the last two axes).

    The fine site z' + j*eps/factor, j in (-factor/2, factor/2], lies in the
    half-open cell of the coarse site z'.
    """
    _check_factor(factor)
    f = np.asarray(f, dtype=np.float64)
    if factor == 1:
        return f.copy()
    out = f
    off = factor // 2 - 1
    for ax in (f.ndim - 2, f.ndim - 1):
        out = np.roll(np.repeat(out, factor, axis=ax), -off, axis=ax)
    return out


def discretize(f: np.ndarray, factor: int) -> np.ndarray:
    """Cell average over the fine sites belonging to each coarse cell."""
    _check_factor(factor)
    f = np.asarray(f, dtype=np.float64)
    if f.shape[-1] % factor:
        raise ValueError("incompatible refinement factor")
    if factor == 1:
        return f.copy()
    off = factor // 2 - 1
    g = f
    for ax in (f.ndim - 2, f.ndim - 1):
        g = np.roll(g, off, axis=ax)
    sh = g.shape[:-2] + (g.shape[-2] // factor, factor, g.shape[-1] // factor, factor)
    return g.reshape(sh).mean(axis=(-3, -1))


# ---------------------------------------------------------------- kernels and functionals

X_NODES = 4


def _cell_offsets(h: float, q: int = X_NODES):
    """Gauss-Legendre nodes and weights for the average over [-h/2, h/2]."""
    u, w = np.polynomial.legendre.leggauss(q)
    return 0.5 * h * u, 0.5 * w


def kernel_E(grid: Grid4, i: int, j: int, a: float, b_ker: float,
             x_average: bool = True) -> np.ndarray:
    """2^{2i+2j} exp(-a (1 + 2^{2i}|x|^2 + 2^{2j}|z|^2)^{b/2}) at minimum-image offsets.

    With ``x_average`` the x-profile is averaged over each x-cell, so the
    lattice x-sum reproduces the x-integral even when 2^{-i} < hx; z stays
    pointwise.
    """
    cs = site_coords(grid)
    z2 = 4.0**j * (cs[2] ** 2 + cs[3] ** 2)
    pref = 2.0 ** (2 * i + 2 * j)
    if not x_average:
        x2 = cs[0] ** 2 + cs[1] ** 2
        return pref * np.exp(-a * (1 + 4.0**i * x2 + z2) ** (b_ker / 2))
    u, w = _cell_offsets(grid.hx)
    out = np.zeros(grid.shape)
    for ua, wa in zip(u, w):
        for ub, wb in zip(u, w):
            x2 = (cs[0] + ua) ** 2 + (cs[1] + ub) ** 2
            out += wa * wb * np.exp(-a * (1 + 4.0**i * x2 + z2) ** (b_ker / 2))
    return pref * out


def kernel_E_tilde(grid: Grid, i: int, a: float, b_ker: float, cell_average: bool = False) -> np.ndarray:
    """2^{2i} exp(-a (1 + 2^{2i}|y|^2)^{b/2}) on a 2D grid, optionally cell-averaged."""
    cs = site_coords(grid)
    if not cell_average:
        y2 = cs[0] ** 2 + cs[1] ** 2
        return 2.0 ** (2 * i) * np.exp(-a * (1 + 4.0**i * y2) ** (b_ker / 2))
    u, w = _cell_offsets(grid.spacings[0])
    out = np.zeros(grid.shape)
    for ua, wa in zip(u, w):
        for ub, wb in zip(u, w):
            y2 = (cs[0] + ua) ** 2 + (cs[1] + ub) ** 2
            out += wa * wb * np.exp(-a * (1 + 4.0**i * y2) ** (b_ker / 2))
    return 2.0 ** (2 * i) * out


def kernel_integral(a: float, b_ker: float, dim: int = 4) -> float:
    """int_{R^dim} exp(-a (1+|u|^2)^{b/2}) du by radial quadrature."""
    area = 2 * math.pi ** (dim / 2) / math.gamma(dim / 2)
    f = lambda r: r ** (dim - 1) * math.exp(-a * (1 + r * r) ** (b_ker / 2))
    v, _ = integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-11, limit=500)
    return area * v


def convolve(grid: Grid, kernel: np.ndarray, mass: np.ndarray, axes=None) -> np.ndarray:
    """sum_{y'} K(y - y') mass(y') over all axes, or over a subset of axes."""
    axes = tuple(range(mass.ndim)) if axes is None else tuple(axes)
    K = sfft.rfftn(kernel, axes=axes)
    M = sfft.rfftn(mass, axes=axes)
    return sfft.irfftn(K * M, s=[mass.shape[a] for a in axes], axes=axes)


def measure_functionals(eta, s: float, s_prime: float, p: float = 2.0, ell1: float = 0.0,
                        ell2: float = 0.0, ell: float = 0.0, a: float = 1.0,
                        b_ker: float = 0.5, s_N: float | None = None) -> dict:
    """Kernel functionals M^{s,s'} and N^{s} of a nonnegative cell measure on a Grid4.

    ``s`` weights the z shell index j and ``s_prime`` the x shell index i in M.
    N uses the diagonal kernels E_{r,r} for r <= J_z, x-only kernels for
    r from J_z up to the x truncation, and one z-only kernel at J_z.
    """
    from .fields import CellMeasure
    grid = eta.grid if isinstance(eta, CellMeasure) else None
    mass = eta.mass if isinstance(eta, CellMeasure) else None
    if grid is None or not isinstance(grid, Grid4):
        raise TypeError("measure_functionals needs a CellMeasure on a Grid4")
    if np.any(mass < 0):
        raise ValueError("negative mass")
    s_N = s if s_N is None else s_N
    Jx, Jz = cutoff_index(grid.hx), cutoff_index(grid.eps)
    cv = grid.cell_vol
    wm = mass * weight(grid, ell1, ell2)
    M = 0.0
    for i in range(0, Jx + 1):
        for j in range(0, Jz + 1):
            c = convolve(grid, kernel_E(grid, i, j, a, b_ker), wm)
            M += 2.0 ** (s * p * j + s_prime * p * i) * np.sum(c**p) * cv
    M = M ** (1.0 / p)

    w4 = mass * rho(grid, ell)
    n1 = 0.0
    for r in range(-1, Jz + 1):
        c = convolve(grid, kernel_E(grid, r, r, a, b_ker), w4)
        n1 += 2.0 ** (r * s_N * p) * np.sum(c**p) * cv
    n2 = 0.0
    xg = grid.xgrid
    for r in range(Jz, max(Jz, Jx) + 1):
        k = kernel_E_tilde(xg, r, a, b_ker, cell_average=True)[:, :, None, None]
        c = convolve(grid, np.broadcast_to(k, grid.shape), w4 / grid.eps**2, axes=(0, 1))
        n2 += 2.0 ** (r * s_N * p) * np.sum(c**p) * cv
    k = kernel_E_tilde(grid.zgrid, Jz, a, b_ker)[None, None, :, :]
    c = convolve(grid, np.broadcast_to(k, grid.shape), w4 / grid.hx**2, axes=(2, 3))
    n3 = np.sum(c**p) * cv
    N = n1 ** (1 / p) + n2 ** (1 / p) + n3 ** (1 / p)
    return {"M": float(M), "N": float(N), "N_parts": (float(n1 ** (1 / p)), float(n2 ** (1 / p)),
            float(n3 ** (1 / p))), "truncation_shell": {"x": Jx, "z": Jz}}


def shell_functional(grid: Grid4, mass: np.ndarray, r: int, a: float, b_ker: float,
                     p: float = 2.0) -> np.ndarray:
    """Per-site values of E_{r,r} * mass (the integrand of the N functional)."""
    return convolve(grid, kernel_E(grid, r, r, a, b_ker), mass)
