"""Periodic lattices, Fourier transforms and discrete differential operators.

Two geometries are used throughout the package:

* ``Grid4``: a torus with two "x" axes (spacing ``hx``, ``Mx`` sites each)
  followed by two "z" axes (spacing ``eps``, ``Nz`` sites each).
* ``Grid2``: the z-plane alone.

Fields are plain float64 arrays of shape ``grid.shape`` (row-major, x-axes
outermost).  The :class:`Field` wrapper only exists to tie an array to its
grid for serialization.

Fourier convention: ``F(k) = cell_vol * sum_y exp(i k.y) f(y)`` and
``f(y) = (1/volume) * sum_k exp(-i k.y) F(k)``, so the forward transform is
a Riemann sum of the continuum integral.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy import fft as sfft

from . import kernels


def _is_pow2(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid2:
    Nz: int
    eps: float

    def __post_init__(self):
        if not _is_pow2(int(self.Nz)):
            raise ValueError(f"Nz must be a power of two >= 2, got {self.Nz}")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")

    ndim = 2

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.Nz, self.Nz)

    @property
    def spacings(self) -> tuple[float, ...]:
        return (self.eps, self.eps)

    @property
    def Lz(self) -> float:
        return self.Nz * self.eps

    @property
    def cell_area(self) -> float:
        return self.eps**2

    @property
    def cell_vol(self) -> float:
        return self.eps**2

    @property
    def volume(self) -> float:
        return self.Lz**2

    @property
    def size(self) -> int:
        return self.Nz**2

    @property
    def tag(self) -> str:
        return f"z{self.Nz}e{_fmt(self.eps)}"

    def to_dict(self) -> dict:
        return {"kind": "Grid2", "Nz": self.Nz, "eps": self.eps}


@dataclass(frozen=True)
class Grid4:
    Mx: int
    hx: float
    Nz: int
    eps: float

    def __post_init__(self):
        for name in ("Mx", "Nz"):
            if not _is_pow2(int(getattr(self, name))):
                raise ValueError(f"{name} must be a power of two >= 2, got {getattr(self, name)}")
        if not (self.hx > 0 and self.eps > 0):
            raise ValueError("spacings must be positive")

    ndim = 4

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.Mx, self.Mx, self.Nz, self.Nz)

    @property
    def spacings(self) -> tuple[float, ...]:
        return (self.hx, self.hx, self.eps, self.eps)

    @property
    def Lx(self) -> float:
        return self.Mx * self.hx

    @property
    def Lz(self) -> float:
        return self.Nz * self.eps

    @property
    def cell_vol(self) -> float:
        return self.hx**2 * self.eps**2

    @property
    def volume(self) -> float:
        return self.Lx**2 * self.Lz**2

    @property
    def size(self) -> int:
        return self.Mx**2 * self.Nz**2

    @property
    def zgrid(self) -> Grid2:
        return Grid2(self.Nz, self.eps)

    @property
    def xgrid(self) -> Grid2:
        return Grid2(self.Mx, self.hx)

    @property
    def tag(self) -> str:
        return f"x{self.Mx}h{_fmt(self.hx)}z{self.Nz}e{_fmt(self.eps)}"

    def to_dict(self) -> dict:
        return {"kind": "Grid4", "Mx": self.Mx, "hx": self.hx, "Nz": self.Nz, "eps": self.eps}


Grid = Union[Grid2, Grid4]


def _fmt(v: float) -> str:
    return f"{v:.6g}".replace(".", "p")


def grid_from_dict(d: dict) -> Grid:
    if d.get("kind") == "Grid2" or "Mx" not in d:
        return Grid2(int(d["Nz"]), float(d["eps"]))
    return Grid4(int(d["Mx"]), float(d["hx"]), int(d["Nz"]), float(d["eps"]))


@dataclass(frozen=True)
class PhysicsParams:
    m: float = 1.0
    alpha: float = 0.0
    lam: float = 1.0
    gamma: float = 0.0
    allow_supercritical: bool = False

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError("mass m must be positive")
        if self.lam < 0 or self.gamma < 0:
            raise ValueError("lambda and gamma must be nonnegative")
        if self.alpha**2 >= (4 * math.pi) ** 2 and not self.allow_supercritical:
            raise ValueError("alpha^2 >= (4 pi)^2 is outside the L2 regime")

    @property
    def beta(self) -> float:
        return self.alpha / math.sqrt(4 * math.pi)

    @property
    def a2(self) -> float:
        """Normalized charge alpha^2/(4 pi)^2."""
        return self.alpha**2 / (4 * math.pi) ** 2

    @classmethod
    def from_a2(cls, a2: float, **kw) -> "PhysicsParams":
        return cls(alpha=4 * math.pi * math.sqrt(a2), **kw)


@dataclass
class Field:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(self.grid.shape)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")


@dataclass
class SpectralField:
    grid: Grid
    coeffs: np.ndarray


# ---------------------------------------------------------------- modes

def axis_modes(n: int, h: float) -> np.ndarray:
    """Angular frequencies of an n-site periodic axis with spacing h."""
    return 2 * np.pi * np.fft.fftfreq(n, d=h)


def mode_axes(grid: Grid, half: bool = False) -> list[np.ndarray]:
    """Broadcastable per-axis angular frequencies.

    With ``half=True`` the last axis is truncated to the rfft layout.
    """
    out = []
    nd = len(grid.shape)
    for ax, (n, h) in enumerate(zip(grid.shape, grid.spacings)):
        k = axis_modes(n, h)
        if half and ax == nd - 1:
            k = 2 * np.pi * np.fft.rfftfreq(n, d=h)
        sh = [1] * nd
        sh[ax] = k.size
        out.append(k.reshape(sh))
    return out


def axis_symbol(k: np.ndarray, h: float) -> np.ndarray:
    return (4.0 / h**2) * np.sin(h * k / 2) ** 2


def laplacian_symbol(grid: Grid, mode=None, half: bool = False):
    """Symbol of minus the lattice Laplacian.

    With ``mode`` given (a tuple of angular frequencies, one per axis) the
    scalar value is returned; otherwise the full table over the dual lattice.
    """
    if mode is not None:
        mode = tuple(mode)
        if len(mode) != len(grid.shape):
            raise ValueError("mode has wrong dimension")
        return float(sum(axis_symbol(np.float64(k), h) for k, h in zip(mode, grid.spacings)))
    ks = mode_axes(grid, half=half)
    sig = 0.0
    for k, h in zip(ks, grid.spacings):
        sig = sig + axis_symbol(k, h)
    return sig


def split_symbols(grid: Grid4, half: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """x-part and z-part of the 4D symbol, broadcastable."""
    ks = mode_axes(grid, half=half)
    sx = axis_symbol(ks[0], grid.hx) + axis_symbol(ks[1], grid.hx)
    sz = axis_symbol(ks[2], grid.eps) + axis_symbol(ks[3], grid.eps)
    return sx, sz


# ---------------------------------------------------------------- FFT

def _check(grid: Grid, f: np.ndarray):
    if tuple(f.shape) != tuple(grid.shape):
        raise ValueError(f"array shape {f.shape} does not match grid {grid.shape}")


def fft_forward(grid: Grid, f) -> np.ndarray:
    """F(k) = cell_vol * sum_y e^{i k.y} f(y) over the full dual lattice."""
    f = f.values if isinstance(f, Field) else np.asarray(f)
    _check(grid, f)
    return sfft.ifftn(f, norm="forward") * grid.cell_vol


def fft_inverse(grid: Grid, F: np.ndarray, real: bool = True) -> np.ndarray:
    _check(grid, F)
    out = sfft.fftn(F, norm="forward") / grid.cell_vol
    return out.real.copy() if real else out


def symbol_table(grid: Grid, sigma, half: bool = True) -> np.ndarray:
    """Evaluate a multiplier on the dual lattice.

    ``sigma`` may be a scalar, an array already laid out on the grid, or a
    callable taking the per-axis mode arrays and the Laplacian symbol.
    """
    if callable(sigma):
        ks = mode_axes(grid, half=half)
        val = sigma(ks, laplacian_symbol(grid, half=half))
    else:
        val = sigma
    val = np.asarray(val)
    if not np.all(np.isfinite(val)):
        raise ValueError("multiplier has non-finite values")
    return val


def apply_multiplier(grid: Grid, f, sigma) -> np.ndarray:
    """T f = F^{-1}(sigma * F f) for real f and real even sigma."""
    f = f.values if isinstance(f, Field) else np.asarray(f, dtype=np.float64)
    _check(grid, f)
    s = symbol_table(grid, sigma, half=True)
    return sfft.irfftn(sfft.rfftn(f) * s, s=f.shape, axes=range(f.ndim))


def resolvent_power(grid: Grid, c: float, power: float, half: bool = True) -> np.ndarray:
    """(c + sigma)^power as a table (c > 0 needed for negative powers)."""
    base = c + laplacian_symbol(grid, half=half)
    if power < 0 and np.any(base <= 0):
        raise ValueError("negative power of a vanishing symbol")
    return base**power


# ---------------------------------------------------------------- stencils

def apply_laplacian(grid: Grid, f) -> np.ndarray:
    """Periodic nearest-neighbour Laplacian."""
    f = f.values if isinstance(f, Field) else np.asarray(f, dtype=np.float64)
    _check(grid, f)
    return kernels.laplacian(np.ascontiguousarray(f), grid.spacings)


def shift(f: np.ndarray, h) -> np.ndarray:
    """(tau_h f)(y) = f(y + h) for an integer lattice vector h."""
    return np.roll(f, tuple(-int(s) for s in h), axis=tuple(range(len(h))))


def finite_difference(grid: Grid, f, h, s: float = 0.0) -> np.ndarray:
    """|h|^{-s} (tau_h f - f) for a lattice vector h given in site units."""
    f = f.values if isinstance(f, Field) else np.asarray(f)
    h = tuple(int(v) for v in h)
    if len(h) != f.ndim:
        raise ValueError("shift vector has wrong dimension")
    if not any(h):
        raise ValueError("zero shift vector")
    length = math.sqrt(sum((v * sp) ** 2 for v, sp in zip(h, grid.spacings)))
    return (shift(f, h) - f) * length ** (-s)


def second_difference(f: np.ndarray, h) -> np.ndarray:
    """Central second difference -f(y+h) + 2 f(y) - f(y-h)."""
    h = tuple(int(v) for v in h)
    return 2 * f - shift(f, h) - shift(f, tuple(-v for v in h))


def gradient(grid: Grid, f) -> list[np.ndarray]:
    """Forward differences along each axis, scaled by the axis spacing."""
    f = f.values if isinstance(f, Field) else np.asarray(f)
    out = []
    for ax, sp in enumerate(grid.spacings):
        out.append((np.roll(f, -1, axis=ax) - f) / sp)
    return out


def dirichlet_form(grid: Grid, f: np.ndarray) -> float:
    """sum |grad f|^2 * cell_vol."""
    return float(sum(np.sum(g * g) for g in gradient(grid, f)) * grid.cell_vol)


def site_coords(grid: Grid) -> list[np.ndarray]:
    """Minimum-image coordinates of each site, broadcastable per axis."""
    out = []
    nd = len(grid.shape)
    for ax, (n, h) in enumerate(zip(grid.shape, grid.spacings)):
        idx = np.arange(n)
        idx = np.where(idx > n // 2, idx - n, idx)
        sh = [1] * nd
        sh[ax] = n
        out.append((idx * h).reshape(sh).astype(np.float64))
    return out


def radius2(grid: Grid, axes=None) -> np.ndarray:
    """Squared minimum-image distance to the origin over the chosen axes."""
    cs = site_coords(grid)
    axes = range(len(cs)) if axes is None else axes
    r2 = np.zeros(grid.shape)
    for a in axes:
        r2 = r2 + cs[a] ** 2
    return r2


MultiplierFn = Callable[[list, np.ndarray], np.ndarray]
