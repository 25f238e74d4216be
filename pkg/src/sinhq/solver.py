"""Convex elliptic equation with exponential nonlinearities driven by
positive measures, and its tilted variants.

The unknown psi minimises

    J(psi) = 1/2 sum (|grad psi|^2 + m^2 psi^2) cell
             + lam sum (e^{alpha psi} mu_plus + e^{-alpha psi} mu_minus)
             - sum source psi cell

so that the residual (gradient / cell_vol) reads

    (m^2 - Delta) psi + lam alpha (e^{alpha psi} mu_plus - e^{-alpha psi} mu_minus) / cell - source.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from . import kernels
from .besov import clustering_weight, discretize, extend, rho
from .fields import CellMeasure, sample_gff
from .lattice import (Grid4, PhysicsParams, apply_laplacian, apply_multiplier,
                      dirichlet_form, resolvent_power)

EXP_CAP = 700.0


class SolverError(RuntimeError):
    """Raised on non-convergence, overflow or loss of convexity."""

    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


@dataclass
class EllipticProblem:
    grid: Grid4
    physics: PhysicsParams
    mu_plus: np.ndarray
    mu_minus: np.ndarray
    source: np.ndarray | None = None
    # symmetric quadratic tilt: -gamma/2 * Q(psi + shift), Q given as a
    # callable pair (value, gradient); used by the norm-tilted equation
    quad_tilt: object = None

    def __post_init__(self):
        for name in ("mu_plus", "mu_minus"):
            v = getattr(self, name)
            if isinstance(v, CellMeasure):
                v = v.mass
            v = np.asarray(v, dtype=np.float64)
            if v.shape != self.grid.shape:
                raise ValueError(f"{name} does not match grid")
            if np.any(v < 0) or not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be nonnegative and finite")
            setattr(self, name, v)
        if self.source is None:
            self.source = np.zeros(self.grid.shape)
        self.source = np.asarray(self.source, dtype=np.float64)

    def mirrored(self) -> "EllipticProblem":
        """(mu+, mu-, source) -> (mu-, mu+, -source)."""
        return EllipticProblem(self.grid, self.physics, self.mu_minus, self.mu_plus, -self.source,
                               self.quad_tilt)


@dataclass
class SolveReport:
    solution: np.ndarray
    residual_sup: float
    residual_l2: float
    energy: float
    iterations: int
    converged: bool
    energies: list = field(default_factory=list)
    apriori: dict | None = None
    restarts_agreement: float | None = None
    runtime_s: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("residual_sup", "residual_l2", "energy", "iterations",
                                           "converged", "restarts_agreement", "runtime_s")}
        d["apriori"] = self.apriori
        d["extra"] = self.extra
        return d


# ---------------------------------------------------------------- energy and derivatives

def _exp_terms(psi, prob):
    a = prob.physics.alpha
    try:
        return kernels.exp_pair(psi, prob.mu_plus, prob.mu_minus, a, EXP_CAP)
    except OverflowError as e:
        raise SolverError(str(e)) from None


def energy(psi: np.ndarray, prob: EllipticProblem) -> float:
    g, ph = prob.grid, prob.physics
    ep, em = _exp_terms(psi, prob)
    quad = 0.5 * (dirichlet_form(g, psi) + ph.m**2 * np.sum(psi * psi) * g.cell_vol)
    val = quad + ph.lam * float(np.sum(ep + em)) - float(np.sum(prob.source * psi)) * g.cell_vol
    if prob.quad_tilt is not None:
        val -= 0.5 * ph.gamma * prob.quad_tilt.value(psi)
    return float(val)


def residual(psi: np.ndarray, prob: EllipticProblem) -> np.ndarray:
    g, ph = prob.grid, prob.physics
    ep, em = _exp_terms(psi, prob)
    r = ph.m**2 * psi - apply_laplacian(g, psi) + ph.lam * ph.alpha * (ep - em) / g.cell_vol - prob.source
    if prob.quad_tilt is not None:
        r = r - 0.5 * ph.gamma * prob.quad_tilt.grad(psi) / g.cell_vol
    return r


def hessian_diag(psi: np.ndarray, prob: EllipticProblem) -> np.ndarray:
    """Diagonal (potential) part of the Hessian divided by cell_vol."""
    ph = prob.physics
    ep, em = _exp_terms(psi, prob)
    return ph.lam * ph.alpha**2 * (ep + em) / prob.grid.cell_vol


def hess_apply(v, psi_diag, prob):
    g, ph = prob.grid, prob.physics
    out = ph.m**2 * v - apply_laplacian(g, v) + psi_diag * v
    if prob.quad_tilt is not None:
        out = out - 0.5 * ph.gamma * prob.quad_tilt.hess(v) / g.cell_vol
    return out


# ---------------------------------------------------------------- Newton-Krylov

def _pcg(apply_A, b, precond, tol, maxiter):
    x = np.zeros_like(b)
    r = b.copy()
    z = precond(r)
    p = z.copy()
    rz = float(np.vdot(r, z))
    bn = float(np.linalg.norm(b))
    if bn == 0:
        return x, 0
    for it in range(1, maxiter + 1):
        Ap = apply_A(p)
        pAp = float(np.vdot(p, Ap))
        if pAp <= 0:
            raise SolverError("non-positive curvature in the Newton system")
        a = rz / pAp
        x += a * p
        r -= a * Ap
        if np.linalg.norm(r) <= tol * bn:
            return x, it
        z = precond(r)
        rz_new = float(np.vdot(r, z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, maxiter


def solve(prob: EllipticProblem, tol: float = 1e-9, max_iter: int = 100, psi0=None,
          cg_maxiter: int = 500, raise_on_fail: bool = False) -> SolveReport:
    """Damped Newton with spectrally preconditioned CG inner solves.

    Backtracking on the energy guarantees monotone decrease; if a Newton
    direction fails to decrease the energy, a preconditioned gradient step
    is tried instead.
    """
    t0 = time.perf_counter()
    g, ph = prob.grid, prob.physics
    psi = np.zeros(g.shape) if psi0 is None else np.array(psi0, dtype=np.float64)
    E = energy(psi, prob)
    energies = [E]
    res = residual(psi, prob)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        rsup = float(np.max(np.abs(res)))
        if rsup <= tol:
            converged = True
            it -= 1
            break
        d = hessian_diag(psi, prob)
        shift = ph.m**2 + float(np.mean(d))
        pre_sym = resolvent_power(g, shift, -1.0)
        precond = lambda r: apply_multiplier(g, r, pre_sym)
        inner_tol = min(1e-2, max(1e-12, 0.1 * rsup))
        step, _ = _pcg(lambda v: hess_apply(v, d, prob), -res, precond, inner_tol, cg_maxiter)
        accepted = False
        for direction in (step, -precond(res)):
            slope = float(np.vdot(res, direction)) * g.cell_vol
            if slope >= 0:
                continue
            t = 1.0
            while t > 1e-12:
                trial = psi + t * direction
                try:
                    Et = energy(trial, prob)
                except SolverError:
                    Et = math.inf
                # Armijo on the energy, with a roundoff allowance near the optimum
                if Et <= E + 1e-4 * t * slope or (Et <= E + 1e-13 * abs(E) and t == 1.0):
                    accepted = True
                    break
                t *= 0.5
            if accepted:
                break
        if not accepted:
            break
        psi = trial
        E = Et
        energies.append(E)
        res = residual(psi, prob)
    rsup = float(np.max(np.abs(res)))
    converged = converged or rsup <= tol
    rep = SolveReport(psi, rsup, float(np.sqrt(np.sum(res**2) * g.cell_vol)), E, it, converged,
                      energies, runtime_s=time.perf_counter() - t0)
    if raise_on_fail and not converged:
        raise SolverError(f"no convergence: residual {rsup:.3e} after {it} iterations", rep)
    return rep


def solve_with_restarts(prob: EllipticProblem, tol: float = 1e-9, restarts: int = 3,
                        seed: int = 0, scale: float = 1.0, **kw) -> SolveReport:
    """Solve from zero and from ``restarts`` random GFF-like starting points."""
    base = solve(prob, tol, **kw)
    sols = [base.solution]
    for k in range(restarts):
        start = scale * sample_gff(prob.grid, prob.physics.m, seed, 1000 + k)
        start /= max(1.0, float(np.max(np.abs(start))) * abs(prob.physics.alpha) / 20.0)
        sols.append(solve(prob, tol, psi0=start, **kw).solution)
    dist = max(float(np.max(np.abs(a - b))) for i, a in enumerate(sols) for b in sols[i + 1:]) \
        if len(sols) > 1 else 0.0
    base.restarts_agreement = dist
    return base


# ---------------------------------------------------------------- tilted equations

def x_constant(zeta2d: np.ndarray, grid: Grid4) -> np.ndarray:
    """Lift a z-plane function to the 4D grid, constant in x."""
    return np.broadcast_to(np.asarray(zeta2d, dtype=np.float64)[None, None], grid.shape).copy()


def solve_tilted(prob: EllipticProblem, gamma: float, zeta2d: np.ndarray, tol: float = 1e-9,
                 base: SolveReport | None = None, weight_params=(1.0, 4.0), **kw) -> SolveReport:
    """Add gamma * zeta (lifted constant in x) to the source and solve.

    Also reports the weighted distance to the untilted solution.
    """
    g = prob.grid
    if base is None:
        base = solve(prob, tol, **kw)
    tilted = EllipticProblem(g, prob.physics, prob.mu_plus, prob.mu_minus,
                             prob.source + gamma * x_constant(zeta2d, g), prob.quad_tilt)
    rep = solve(tilted, tol, psi0=base.solution, **kw)
    kappa, n = weight_params
    w = clustering_weight(g, kappa, n)
    diff = rep.solution - base.solution
    rep.extra["weighted_distance"] = float(np.sqrt(np.sum(w * diff**2) * g.cell_vol))
    rep.extra["gamma"] = gamma
    return rep


def linearized_response(prob: EllipticProblem, psi0: np.ndarray, rhs: np.ndarray,
                        tol: float = 1e-12) -> np.ndarray:
    """Solve (m^2 - Delta + V''(psi0)) u = rhs."""
    g = prob.grid
    d = hessian_diag(psi0, prob)
    pre = resolvent_power(g, prob.physics.m**2 + float(np.mean(d)), -1.0)
    u, _ = _pcg(lambda v: hess_apply(v, d, prob), rhs, lambda r: apply_multiplier(g, r, pre),
                tol, 5000)
    return u


class SliceNorm:
    """Q(psi) = sum_x hx^2 || rho_ell (1 - Delta_z)^{-1/2} (psi + shift)(x, .) ||^2_{L^2(z)}.

    A symmetric lattice form of the x-slice H^{-1} norm; its gradient in psi
    is 2 cell * rho (1-Delta_z)^{-1} rho (psi + shift).
    """

    def __init__(self, grid: Grid4, shift: np.ndarray | None = None, ell: float = 0.0):
        self.grid = grid
        self.shift = np.zeros(grid.shape) if shift is None else np.asarray(shift)
        self.w = rho(grid, ell, (2, 3))
        from .lattice import axis_symbol, mode_axes
        ks = mode_axes(grid, half=True)
        sz = axis_symbol(ks[2], grid.eps) + axis_symbol(ks[3], grid.eps)
        self.sym = np.broadcast_to(1.0 / (1.0 + sz), (1, 1) + sz.shape[2:])

    def _op(self, v):
        from scipy import fft as sfft
        F = sfft.rfftn(self.w * v, axes=(2, 3))
        return self.w * sfft.irfftn(F * self.sym, s=v.shape[2:], axes=(2, 3))

    def value(self, psi):
        u = psi + self.shift
        return float(np.sum(u * self._op(u)) * self.grid.cell_vol)

    def grad(self, psi):
        return 2.0 * self._op(psi + self.shift) * self.grid.cell_vol

    def hess(self, v):
        return 2.0 * self._op(v) * self.grid.cell_vol


def min_hessian_eig(prob: EllipticProblem, psi: np.ndarray) -> float:
    """Smallest eigenvalue of the Hessian (per cell) at psi, by Lanczos."""
    n = prob.grid.size
    d = hessian_diag(psi, prob)
    op = LinearOperator((n, n), matvec=lambda v: hess_apply(v.reshape(prob.grid.shape), d,
                                                           prob).ravel(), dtype=np.float64)
    vals = eigsh(op, k=1, which="SA", tol=1e-6, maxiter=5000, return_eigenvectors=False)
    return float(vals[0])


def solve_norm_tilted(prob: EllipticProblem, gamma: float, W: np.ndarray, tol: float = 1e-9,
                      ell: float = 0.0, check_convexity: bool = True, **kw) -> SolveReport:
    """Minimise J - gamma/2 * Q(psi + W): the quadratic tilt by the slice H^{-1}
    norm of the full field psi + W.  Convexity is verified by the smallest
    Hessian eigenvalue before and after the solve."""
    g = prob.grid
    ph = PhysicsParams(prob.physics.m, prob.physics.alpha, prob.physics.lam, gamma,
                       prob.physics.allow_supercritical)
    tilted = EllipticProblem(g, ph, prob.mu_plus, prob.mu_minus, prob.source,
                             SliceNorm(g, W, ell))
    if check_convexity:
        lo = min_hessian_eig(tilted, np.zeros(g.shape))
        if lo <= 0:
            raise SolverError(f"tilted energy is not convex (min eigenvalue {lo:.3e})")
    rep = solve(tilted, tol, **kw)
    if check_convexity:
        rep.extra["min_hessian_eig"] = min_hessian_eig(tilted, rep.solution)
        if rep.extra["min_hessian_eig"] <= 0:
            raise SolverError("convexity lost at the solution", rep)
    rep.extra["gamma"] = gamma
    rep.extra["slice_norm"] = tilted.quad_tilt.value(rep.solution)
    return rep


# ---------------------------------------------------------------- a priori diagnostics

def apriori_report(psi: np.ndarray, prob: EllipticProblem, ell: float = 0.0,
                   betas=(0.5, 0.75), besov_norm_eta: float | None = None) -> dict:
    """Left-hand sides of the energy estimates together with explicit
    right-hand side proxies and their ratios.

    First family: ||rho grad psi||^2 + ||rho psi||^2 + int rho |psi| e^{+-alpha psi} d eta_+-
    against int rho d eta_+ + int rho d eta_-.
    Second family (for each beta): ||grad e^{+-beta alpha psi}||^2
    + || |psi|^{1/2} e^{+-beta alpha psi} ||^2 + int rho e^{+-(1+2 beta) alpha psi} d eta_+-
    against (1 + total weighted mass + ||eta||)^2.
    """
    g, ph = prob.grid, prob.physics
    cv = g.cell_vol
    w = rho(g, ell)
    a = ph.alpha
    etap, etam = prob.mu_plus, prob.mu_minus
    grads = [(np.roll(psi, -1, ax) - psi) / h for ax, h in enumerate(g.spacings)]
    lhs1 = float(sum(np.sum((w * d) ** 2) for d in grads) * cv + np.sum((w * psi) ** 2) * cv)
    ep, em = _exp_terms(psi, prob)
    lhs1 += float(np.sum(w * np.abs(psi) * ep) + np.sum(w * np.abs(psi) * em))
    rhs1 = float(np.sum(w * etap) + np.sum(w * etam))
    out = {"apriori1": {"lhs": lhs1, "rhs": rhs1,
                        "ratio": lhs1 / rhs1 if rhs1 > 0 else None}}
    mass = rhs1
    nrm = 0.0 if besov_norm_eta is None else besov_norm_eta
    for b in betas:
        lhs = 0.0
        for sgn, eta in ((1, etap), (-1, etam)):
            t = sgn * b * a * psi
            if np.max(np.abs(t)) > EXP_CAP / 3:
                raise SolverError("overflow in a priori diagnostics")
            e = np.exp(t)
            gd = [(np.roll(e, -1, ax) - e) / h for ax, h in enumerate(g.spacings)]
            lhs += float(sum(np.sum((w * d) ** 2) for d in gd) * cv)
            lhs += float(np.sum(w**2 * np.abs(psi) * e**2) * cv)
            lhs += float(np.sum(w * np.exp(sgn * (1 + 2 * b) * a * psi) * eta))
        rhs = (1.0 + mass + nrm) ** 2
        out[f"apriori2_beta{b}"] = {"lhs": lhs, "rhs": rhs,
                                    "ratio": lhs / rhs if mass > 0 else None}
    if mass == 0:
        out["apriori1"]["ratio"] = None
        out["applicable"] = False
    else:
        out["applicable"] = True
    return out


# ---------------------------------------------------------------- extension helpers

def slice_field(phi: np.ndarray, x_index=(0, 0)) -> np.ndarray:
    """The z-plane phi(x0, .) at a fixed x site."""
    return np.asarray(phi)[x_index[0], x_index[1]].copy()


def refine_problem_z(prob: EllipticProblem, factor: int) -> EllipticProblem:
    """Refine the z-axes by piecewise-constant extension of densities."""
    from .besov import refine_grid
    g2 = refine_grid(prob.grid, factor)
    scale = g2.cell_vol / prob.grid.cell_vol
    return EllipticProblem(g2, prob.physics, extend(prob.mu_plus, factor) * scale,
                           extend(prob.mu_minus, factor) * scale, extend(prob.source, factor))


__all__ = ["EllipticProblem", "SolveReport", "SolverError", "energy", "residual", "solve",
           "solve_with_restarts", "solve_tilted", "solve_norm_tilted", "apriori_report",
           "linearized_response", "min_hessian_eig", "discretize"]
