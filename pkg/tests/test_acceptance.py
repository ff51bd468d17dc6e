"""One test per acceptance criterion, on the reference models A and B."""
import math
import time

import numpy as np
import pytest

from conftest import EXIT_RATIO, GEOM_P, LF_CONST, U_CONST, W1, XSTAR_OCC, model_a
from levybranch import formulas, verify
from levybranch.levy_model import LevyModel, scale_W
from levybranch.measures import DiscreteJumps
from levybranch.paths import level_at, simulate_coupled
from levybranch.rng import derive_seed, stream
from levybranch.solver import (
    rho_bound, rho_ratio, semigroup_defect, solve_moment_pi, solve_occupation, solve_single_birth_U,
)
from levybranch.testfunctions import CappedLinear, Constant, Indicator

pytestmark = pytest.mark.acceptance


def _all_pass(records):
    return all(r.passed for r in records), "; ".join(r.line() for r in records)


def test_c01_pathwise_occupation_identity(ctx, verdict):
    t0 = time.perf_counter()
    batch = ctx.batch(1.0)
    one = Constant(1.0)
    total = batch.occupation(one, one)
    gap = float(np.max(np.abs(total - 2.0 * batch.tau0)))
    elapsed = time.perf_counter() - t0
    verdict("criterion 1 pathwise occupation identity",
            len(batch) == 100_000 and gap <= 1e-9 and elapsed < 30,
            f"paths={len(batch)} max gap={gap:.3g} runtime={elapsed:.1f}s")


def test_c02_hitting_laplace(ctx, verdict):
    recs = verify.suite_hitting(ctx, 1.0, (0.5, 1.5, 3.0))
    ok, detail = _all_pass(recs)
    exact = abs(recs[1].predicted - math.exp(-1.0)) < 1e-12
    verdict("criterion 2 hitting-time Laplace transform", ok and exact, detail)


def test_c03_two_sided_exit(ctx, verdict):
    (rec,) = verify.suite_exit(ctx, 1.0, 2.0)
    ok = rec.passed and abs(rec.predicted - EXIT_RATIO) < 1e-6
    verdict("criterion 3 two-sided exit", ok, rec.line())


def test_c04_geometric_total_mass(ctx, verdict):
    recs = verify.suite_geometric(ctx, 1.0, (2.0, 0.5))
    A = model_a()
    p = formulas.total_mass_pmf_X(A, 1.0, 2.0)[1]
    W = scale_W(A, 1.0)
    p0 = formulas.total_mass_pmf_X(A, 1.0, 0.5)[0]
    ok, detail = _all_pass(recs)
    ok = ok and abs(p - GEOM_P) < 1e-6 and abs(p0 - float(W(0.5) / W(1.0))) < 1e-12
    verdict("criterion 4 geometric total mass", ok, f"p={p:.8f}; {detail}")


def test_c05_atom_density(ctx, verdict):
    (rec,) = verify.suite_atoms(ctx, 2.0, 1.0)
    verdict("criterion 5 atom density", rec.passed and rec.n >= 20_000, rec.line())


def test_c06_laplace_functional_triangulation(ctx, verdict):
    A = model_a(2.0)
    theta = math.log(2.0)
    t0 = time.perf_counter()
    sol = solve_single_birth_U(A, Constant(theta), 1.0, step=1e-3, tol=1e-10)
    elapsed = time.perf_counter() - t0
    u = float(sol(1.0, 2.0))
    p = 1.0 / (2.0 * W1)
    closed = -math.log(p * 0.5 / (1.0 - (1.0 - p) * 0.5))
    mc = verify.check_laplace_functional(theta * ctx.batch(2.0).total_mass(1.0), u, "MC vs Picard")
    ok = abs(u - U_CONST) <= 1e-3 and abs(closed - U_CONST) < 1e-12 and mc.passed and elapsed < 10
    ok = ok and abs(math.exp(-u) - LF_CONST) < 1e-3
    verdict("criterion 6 Laplace functional triangulation", ok,
            f"Picard={u:.10f} closed={U_CONST:.10f} solver={elapsed:.2f}s; {mc.line()}")


def test_c07_moment_formula(ctx, verdict):
    A = model_a(2.0)
    f = CappedLinear(1.0, 10.0)
    mom = solve_moment_pi(A, f, 1.0)
    cum = solve_single_birth_U(A, f, 1.0)
    batch = ctx.batch(2.0)
    recs = [verify.check_moment(batch.integrate(t, f), float(mom(t, 2.0)), f"moment t={t}") for t in (0.5, 1.0)]
    grid_t = mom.curve.grid[::10]
    xs = np.concatenate([np.linspace(0.001, 12.0, 1200), [2.0]])
    T, X = np.meshgrid(grid_t, xs, indexing="ij")
    ordered = bool(np.all(cum(T, X) <= mom(T, X) + 1e-12))
    ok, detail = _all_pass(recs)
    verdict("criterion 7 moment formula", ok and ordered, f"U<=pi on grid: {ordered}; {detail}")


def test_c08_solver_laws(verdict):
    A = model_a(2.0)
    f = CappedLinear(1.0, 10.0)
    defects = {}
    for step in (1e-3, 5e-4):
        defects[step] = semigroup_defect(lambda g, T: solve_single_birth_U(A, g, T, step=step), f, 0.5, 0.5)
    ratio = defects[5e-4] / defects[1e-3]
    halves = 0.4 <= ratio <= 0.6
    sol = solve_single_birth_U(A, f, 1.0, keep_history=True)
    hist = np.array(sol.curve.history)
    cums = np.cumsum(hist, axis=1)
    monotone = bool(np.all(np.diff(hist, axis=0) >= -1e-14) and np.all(np.diff(cums, axis=0) >= -1e-13))
    bound = rho_bound(A, f)
    worst = max(rho_ratio(sol, t) for t in (0.25, 0.5, 1.0))
    rho_ok = worst <= 1.01 * bound
    x = np.linspace(0.0, 5.0, 51)
    ts = sol.curve.grid
    shifted = np.array([sol(t, x + t) for t in ts])
    shift_ok = bool(np.all(np.diff(shifted, axis=0) >= -1e-14))
    verdict("criterion 8 solver laws", halves and monotone and rho_ok and shift_ok,
            f"defect(1e-3)={defects[1e-3]:.3g} defect(5e-4)={defects[5e-4]:.3g} ratio={ratio:.3f}; "
            f"picard monotone={monotone}; sup U/rho={worst:.4f} bound={bound:.4f}; shifted monotone={shift_ok}")


def test_c09_truncation_monotonicity(verdict):
    A = model_a(1.0)
    seed = derive_seed(20261016, "coupled")
    worst = math.inf
    for k in range(10_000):
        fine, coarse = simulate_coupled(A, 0.01, 0.1, stream(seed, k))
        times = np.concatenate([[0.0], fine.times, coarse.times, [coarse.tau0, fine.tau0]])
        diff = level_at(fine, times) - level_at(coarse, times)
        worst = min(worst, float(diff.min()))
    paths_ok = worst >= -1e-12
    f = CappedLinear(1.0, 10.0)
    u_fine = solve_single_birth_U(A.with_measure(A.measure.restrict(0.01)), f, 1.0)
    u_coarse = solve_single_birth_U(A.with_measure(A.measure.restrict(0.1)), f, 1.0)
    grid = u_fine.curve.grid[::10]
    T, X = np.meshgrid(grid, np.linspace(0.01, 12.0, 600), indexing="ij")
    solver_ok = bool(np.all(u_fine(T, X) >= u_coarse(T, X)))
    verdict("criterion 9 truncation monotonicity", paths_ok and solver_ok,
            f"min S(0.01)-S(0.1)={worst:.3g} over 10000 coupled paths; U(0.01)>=U(0.1) nodewise: {solver_ok}")


def test_c10_xstar_initial_law(ctx, verdict):
    rec = verify.suite_xstar(ctx)[0]
    dens = float(formulas.xstar_initial_density(ctx.neg(), 0.7))
    verdict("criterion 10 X* initial law", rec.passed and abs(dens - 2 * math.exp(-1.4)) < 1e-12, rec.line())


def test_c11_xstar_total_occupation(ctx, verdict):
    rec = verify.suite_xstar(ctx)[1]
    verdict("criterion 11 X* total occupation", rec.passed and abs(rec.predicted - XSTAR_OCC) < 1e-12, rec.line())


def test_c12_time_reversal(ctx, verdict):
    (rec,) = verify.suite_reversal(ctx, 1.0)
    verdict("criterion 12 time-reversal equivalence", rec.passed and rec.n == 20_000, rec.line())


def test_c13_cmj_cross_route(ctx, verdict):
    recs = verify.suite_cmj_cross(ctx, 1.0, 1.0, 0.1)
    ok, detail = _all_pass(recs)
    verdict("criterion 13 CMJ cross-route", ok, detail)


def test_c14_occupation_equation(ctx, verdict):
    A = model_a(2.0)
    h, f = Indicator(0.0, 1.0), CappedLinear(1.0, 5.0)
    omega = solve_occupation(A, h, f)
    rec = verify.check_laplace_functional(ctx.batch(2.0).occupation(h, f), float(omega(0.0, 2.0)), "weighted occupation")
    empty = LevyModel(2.0, DiscreteJumps((), ()), start=1.0)
    deg = math.exp(-float(solve_occupation(empty, h, Constant(1.0))(0.0, 1.0)))
    ok = rec.passed and abs(deg - math.exp(-1.0)) <= 1e-6
    verdict("criterion 14 occupation equation", ok, f"degenerate={deg:.12f}; {rec.line()}")
