import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sinhq import solver
from sinhq.lattice import Grid4, PhysicsParams, apply_multiplier, resolvent_power
from sinhq.verify import brute_force_minimize

G = Grid4(2, 0.5, 4, 0.5)


def problem(seed=0, alpha=1.5, lam=1.0, grid=G, source=False):
    r = np.random.default_rng(seed)
    mp = r.random(grid.shape) * grid.cell_vol
    mm = r.random(grid.shape) * grid.cell_vol
    src = r.standard_normal(grid.shape) if source else None
    return solver.EllipticProblem(grid, PhysicsParams(1.0, alpha, lam), mp, mm, src)


def test_energy_at_zero():
    p = problem()
    assert math.isclose(solver.energy(np.zeros(G.shape), p), p.mu_plus.sum() + p.mu_minus.sum(),
                        rel_tol=1e-13)


@given(seed=st.integers(0, 2**32 - 1), t=st.floats(0.0, 1.0))
def test_energy_convex_along_segments(seed, t):
    p = problem(seed, source=True)
    r = np.random.default_rng(seed + 1)
    a, b = r.standard_normal(G.shape), r.standard_normal(G.shape)
    lhs = solver.energy(t * a + (1 - t) * b, p)
    rhs = t * solver.energy(a, p) + (1 - t) * solver.energy(b, p)
    assert lhs <= rhs + 1e-10 * abs(rhs)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=10)
def test_residual_is_energy_gradient(seed):
    p = problem(seed, source=True)
    r = np.random.default_rng(seed)
    psi = 0.3 * r.standard_normal(G.shape)
    v = r.standard_normal(G.shape)
    h = 1e-5
    fd = (solver.energy(psi + h * v, p) - solver.energy(psi - h * v, p)) / (2 * h)
    an = float(np.sum(solver.residual(psi, p) * v) * G.cell_vol)
    assert abs(fd - an) <= 1e-6 * max(1.0, abs(an))


def test_zero_charge_is_linear_solve():
    r = np.random.default_rng(3)
    src = r.standard_normal(G.shape)
    p = solver.EllipticProblem(G, PhysicsParams(1.0, 0.0, 1.0), np.ones(G.shape) * G.cell_vol,
                               np.ones(G.shape) * G.cell_vol, src)
    rep = solver.solve(p, tol=1e-11)
    exact = apply_multiplier(G, src, resolvent_power(G, 1.0, -1.0))
    assert rep.converged and np.max(np.abs(rep.solution - exact)) < 1e-10


def test_symmetric_measures_give_zero():
    r = np.random.default_rng(1)
    mu = r.random(G.shape) * G.cell_vol
    p = solver.EllipticProblem(G, PhysicsParams(1.0, 2.0, 1.0), mu, mu)
    rep = solver.solve(p)
    assert np.max(np.abs(rep.solution)) < 1e-12


def test_newton_matches_coordinate_descent():
    p = problem(4, alpha=2.0, source=True)
    rep = solver.solve(p, tol=1e-11)
    ref = brute_force_minimize(p)
    assert rep.converged
    assert np.max(np.abs(rep.solution - ref)) < 1e-8


def test_energy_decreases_monotonically():
    rep = solver.solve(problem(5, alpha=3.0, lam=2.0, source=True))
    e = np.array(rep.energies)
    assert np.all(np.diff(e) <= 1e-12 * np.abs(e[:-1]))


def test_odd_symmetry():
    p = problem(6, alpha=2.5, source=True)
    a = solver.solve(p, tol=1e-11).solution
    b = solver.solve(p.mirrored(), tol=1e-11).solution
    assert np.max(np.abs(a + b)) < 1e-10


def test_restarts_agree():
    rep = solver.solve_with_restarts(problem(7, alpha=2.0, source=True), tol=1e-11, restarts=2)
    assert rep.restarts_agreement < 1e-9


def test_tilt_zero_and_linear_response():
    p = problem(8, alpha=2.0)
    base = solver.solve(p, tol=1e-12)
    zeta = np.random.default_rng(0).standard_normal(G.shape[2:])
    same = solver.solve_tilted(p, 0.0, zeta, tol=1e-12, base=base)
    assert np.max(np.abs(same.solution - base.solution)) < 1e-12
    assert same.extra["weighted_distance"] < 1e-12
    u = solver.linearized_response(p, base.solution, solver.x_constant(zeta, G))
    diffs = []
    for g in (1e-2, 5e-3):
        rep = solver.solve_tilted(p, g, zeta, tol=1e-12, base=base)
        diffs.append(np.max(np.abs((rep.solution - base.solution) / g - u)))
    # first-order response, remainder O(gamma)
    assert diffs[1] < 0.6 * diffs[0] and diffs[0] < 1e-2 * np.max(np.abs(u))


def test_norm_tilt():
    p = problem(9, alpha=1.0)
    W = np.random.default_rng(2).standard_normal(G.shape)
    base = solver.solve(p, tol=1e-11)
    zero = solver.solve_norm_tilted(p, 0.0, W, tol=1e-11)
    assert np.max(np.abs(zero.solution - base.solution)) < 1e-10
    small = solver.solve_norm_tilted(p, 0.1, W, tol=1e-11)
    assert small.converged and small.extra["min_hessian_eig"] > 0
    assert small.energy <= base.energy + 1e-12


def test_norm_tilt_loses_convexity():
    p = problem(9, alpha=1.0, lam=0.0)
    W = np.zeros(G.shape)
    with pytest.raises(solver.SolverError):
        solver.solve_norm_tilted(p, 1e3, W)


def test_apriori_report_cases():
    p = problem(10, alpha=1.0)
    rep = solver.apriori_report(solver.solve(p).solution, p)
    assert rep["applicable"] and rep["apriori1"]["ratio"] > 0
    empty = solver.EllipticProblem(G, PhysicsParams(1.0, 1.0, 1.0), np.zeros(G.shape),
                                   np.zeros(G.shape))
    rep0 = solver.apriori_report(np.zeros(G.shape), empty)
    assert not rep0["applicable"] and rep0["apriori1"]["ratio"] is None
    assert rep0["apriori1"]["lhs"] == 0.0


def test_overflow_raises():
    p = problem(11, alpha=2.0)
    with pytest.raises(solver.SolverError):
        solver.energy(np.full(G.shape, 1e3), p)


def test_problem_validation():
    with pytest.raises(ValueError):
        solver.EllipticProblem(G, PhysicsParams(), -np.ones(G.shape), np.zeros(G.shape))
    with pytest.raises(ValueError):
        solver.EllipticProblem(G, PhysicsParams(), np.ones((2, 2)), np.zeros(G.shape))


def test_refine_problem_keeps_mass():
    p = problem(12)
    q = solver.refine_problem_z(p, 2)
    assert q.grid.Nz == 2 * G.Nz
    assert math.isclose(q.mu_plus.sum(), p.mu_plus.sum(), rel_tol=1e-13)
