"""Kernel-curve solvers for the cumulant, moment and occupation equations.

Every equation here has the form

    V_t(x) = f(x - t) 1{x > t} + int_{max(0, t - x)}^t G(r) dr

where the nonlocal term G(r) depends on V_r only through an integral against
the jump measure (or the offspring position law).  The integral is independent
of x, so the whole two-dimensional problem collapses onto the one-dimensional
curve G on the uniform grid r_k = k * step.  x is never gridded: any V_t(x) is
recovered in closed form from the cumulative curve CG(r) = int_0^r G.

Cumulants are found by Picard sweeps over the whole curve starting from
G = 0 (the iterates increase to the solution); the linear moment equation is
marched forward; the occupation equation is marched backward from the end of
the support of the time weight.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidRegime, NotConverged, UnsupportedHorizon
from .levy_model import LevyModel
from .measures import JumpMeasure
from .offspring import OffspringLaw
from .testfunctions import FunctionOf, TestFunction, segment_integral

DEFAULT_STEP = 1e-3
DEFAULT_TOL = 1e-10
DEFAULT_MAX_SWEEPS = 200
QUAD_ORDER = 64


@dataclass(frozen=True)
class KernelCurve:
    """G(r_k) on r_k = k * step, k = 0..n, with its trapezoid cumulative."""

    step: float
    values: np.ndarray
    flavor: str
    cumulative: np.ndarray = None
    iterations: int = 0
    residual: float = 0.0
    tol: float = 0.0
    history: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.cumulative is None:
            object.__setattr__(self, "cumulative", _cumtrapz(self.values, self.step))

    @property
    def horizon(self) -> float:
        return self.step * (len(self.values) - 1)

    @property
    def grid(self) -> np.ndarray:
        return self.step * np.arange(len(self.values))

    def G(self, r):
        return _interp_uniform(self.values, self.step, r)

    def CG(self, r):
        return _interp_uniform(self.cumulative, self.step, r)

    def dump(self, fp, extra: dict | None = None):
        """Tab-separated (r, G, cumulative) with a commented header."""
        head = {"flavor": self.flavor, "step": self.step, "tol": self.tol,
                "iterations": self.iterations, "residual": self.residual}
        head.update(extra or {})
        fp.write("# " + " ".join(f"{k}={v}" for k, v in head.items()) + "\n")
        fp.write("r\tG\tcumulative\n")
        for r, g, cg in zip(self.grid, self.values, self.cumulative):
            fp.write(f"{r:.10g}\t{g:.17g}\t{cg:.17g}\n")


@dataclass(frozen=True)
class Solution:
    """V_t(x) = f(x - t) 1{x > t} + CG(t) - CG(max(0, t - x))."""

    curve: KernelCurve
    f: TestFunction

    def __call__(self, t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        if np.any(t > self.curve.horizon * (1 + 1e-12)) or np.any(t < 0):
            raise ValueError(f"t outside [0, {self.curve.horizon}]")
        free = np.where(x > t, self.f(np.maximum(x - t, 0.0)), 0.0)
        return free + self.curve.CG(t) - self.curve.CG(np.maximum(t - x, 0.0))

    def as_function(self, s: float) -> TestFunction:
        """x -> V_s(x) as a test function (for composing semigroup steps)."""
        cg = float(self.curve.CG(s))
        tail = self.f.tail_value
        bps = (s,) + tuple(s + b for b in self.f.breakpoints)
        return FunctionOf(lambda x, s=s: self(s, x), bps, None if tail is None else tail + cg)


# ---------------------------------------------------------------- helpers


def _cumtrapz(values, step):
    out = np.empty_like(values)
    out[0] = 0.0
    out[1:] = np.cumsum(0.5 * step * (values[1:] + values[:-1]))
    return out


def _interp_uniform(table, step, x):
    """Linear interpolation on a uniform grid starting at 0 (x clipped to range)."""
    x = np.asarray(x, dtype=float)
    n = len(table) - 1
    pos = np.clip(x / step, 0.0, n)
    i = np.minimum(pos.astype(np.int64), max(n - 1, 0))
    frac = pos - i
    if n == 0:
        return np.full_like(x, table[0])
    return table[i] * (1.0 - frac) + table[i + 1] * frac


def _tail_cutoff(measure: JumpMeasure, rel: float = 1e-16) -> float:
    """A level beyond which Pi has negligible mass."""
    mass = measure.total_mass()
    if mass == 0:
        return 1.0
    z = 1.0
    while measure.tail(z) > rel * mass and z < 1e8:
        z *= 2.0
    return z


def _grid(horizon, step):
    n = int(round(horizon / step))
    if n < 1 or abs(n * step - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError(f"horizon {horizon} is not a multiple of step {step}")
    return step * np.arange(n + 1)


@dataclass
class _RowRule:
    """<measure, F(r, .)> for every grid row r, with F split at z = r."""

    nodes: np.ndarray      # (n+1, P)
    weights: np.ndarray    # (n+1, P)
    tail: np.ndarray       # (n+1,) mass beyond the last knot
    above: np.ndarray      # nodes > r
    free: np.ndarray       # f(z - r) 1{z > r} at the nodes
    tail_free: np.ndarray  # value of f(z - r) beyond the last knot


def _row_rule(measure: JumpMeasure, f: TestFunction, r: np.ndarray) -> _RowRule:
    bps = [b for b in f.breakpoints if math.isfinite(b)]
    tail_value = f.tail_value
    cols = [np.zeros_like(r), r] + [r + b for b in bps]
    if tail_value is None:
        cols.append(np.maximum(r + _tail_cutoff(measure), cols[-1]))
    knots = np.stack(cols, axis=1)
    if measure.is_zero():
        nodes = np.zeros((len(r), 1))
        weights = np.zeros((len(r), 1))
        tail = np.zeros(len(r))
    else:
        nodes, weights, tail = measure.quadrature(knots, QUAD_ORDER)
        nodes = np.array(nodes, dtype=float)
        weights = np.array(weights, dtype=float)
        tail = np.asarray(tail, dtype=float)
    above = nodes > r[:, None]
    free = np.where(above, f(np.maximum(nodes - r[:, None], 0.0)), 0.0)
    last = knots[:, -1]
    if tail_value is None:
        tail_free = np.asarray(f(np.maximum(last - r, 0.0)), dtype=float)
    else:
        tail_free = np.full(len(r), float(tail_value))
    return _RowRule(nodes, weights, tail, above, free, tail_free)


def _row_u(rule: _RowRule, r, cum, step):
    """u(r, z) = f(z - r) 1{z > r} + CG(r) - CG(max(0, r - z)) at the nodes, and beyond the last knot."""
    cg_r = cum[: len(r)]
    inner = _interp_uniform(cum, step, np.maximum(r[:, None] - rule.nodes, 0.0))
    u = rule.free + cg_r[:, None] - inner
    u_tail = rule.tail_free + cg_r
    return u, u_tail


def _check_single_birth(model: LevyModel):
    m = model.measure.mean()
    if not m < model.c:
        raise InvalidRegime(
            f"single-birth solver needs <Pi,rho>={m:g} < c={model.c:g}; tilt a supercritical model first")


# ---------------------------------------------------------------- cumulant


def _picard(kernel, n, step, tol, max_sweeps, keep_history, flavor):
    g = np.zeros(n + 1)
    history = [g.copy()] if keep_history else []
    residual = math.inf
    for sweep in range(1, max_sweeps + 1):
        new = kernel(_cumtrapz(g, step))
        residual = float(np.max(np.abs(new - g)))
        g = new
        if keep_history:
            history.append(g.copy())
        if residual < tol:
            return KernelCurve(step, g, flavor, iterations=sweep, residual=residual, tol=tol, history=tuple(history))
    raise NotConverged(f"Picard sweeps did not reach tol={tol} in {max_sweeps} sweeps", residual=residual)


def solve_single_birth_U(
    model: LevyModel,
    f: TestFunction,
    horizon: float,
    step: float = DEFAULT_STEP,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    keep_history: bool = False,
) -> Solution:
    """Laplace cumulant U_t f(x) = -log E_{delta_x} exp(-<X_t, f>) of the single-birth system.

    G(r) = c^-1 <Pi, 1 - exp(-U_r f)>, solved by Picard sweeps from G = 0.
    """
    _check_single_birth(model)
    r = _grid(horizon, step)
    rule = _row_rule(model.measure, f, r)
    c = model.c

    def kernel(cum):
        u, u_tail = _row_u(rule, r, cum, step)
        return (np.sum(rule.weights * -np.expm1(-u), axis=1) - rule.tail * np.expm1(-u_tail)) / c

    return Solution(_picard(kernel, len(r) - 1, step, tol, max_sweeps, keep_history, "cumulant"), f)


def solve_finite_rate_U(
    offspring: OffspringLaw,
    f: TestFunction,
    horizon: float,
    step: float = DEFAULT_STEP,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    keep_history: bool = False,
) -> Solution:
    """Laplace cumulant of the finite-rate system with parameters (g, alpha, eta).

    G(r) = alpha [1 - g(<eta, exp(-U_r f)>)].
    """
    r = _grid(horizon, step)
    rule = _row_rule(offspring.position, f, r)
    alpha = offspring.rate

    def kernel(cum):
        u, u_tail = _row_u(rule, r, cum, step)
        miss = np.sum(rule.weights * -np.expm1(-u), axis=1) - rule.tail * np.expm1(-u_tail)
        return alpha * (1.0 - offspring.g(1.0 - miss))

    return Solution(_picard(kernel, len(r) - 1, step, tol, max_sweeps, keep_history, "cumulant"), f)


# ---------------------------------------------------------------- moment


def solve_moment_pi(
    system: LevyModel | OffspringLaw,
    f: TestFunction,
    horizon: float,
    step: float = DEFAULT_STEP,
) -> Solution:
    """First moment pi_t f(x) = E_{delta_x} <X_t, f>.

    M(r) = c^-1 <Pi, pi_r f> for a Levy model, alpha g'(1) <eta, pi_r f> for an
    offspring law.  The recursion is linear, so each grid step solves
    M_k = A + B M_k exactly.
    """
    if isinstance(system, OffspringLaw):
        measure, coef = system.position, system.rate * system.mean_offspring
    else:
        _check_single_birth(system)
        measure, coef = system.measure, 1.0 / system.c
    r = _grid(horizon, step)
    rule = _row_rule(measure, f, r)
    n = len(r) - 1
    m = np.zeros(n + 1)
    cum = np.zeros(n + 1)

    def moment_row(k):
        rk = r[k : k + 1]
        inner = _interp_uniform(cum[: k + 1], step, np.maximum(rk[:, None] - rule.nodes[k : k + 1], 0.0))
        v = rule.free[k] + cum[k] - inner[0]
        return coef * (np.sum(rule.weights[k] * v) + rule.tail[k] * (rule.tail_free[k] + cum[k]))

    m[0] = moment_row(0)
    for k in range(1, n + 1):
        cum[k] = cum[k - 1] + 0.5 * step * m[k - 1]
        a = moment_row(k)
        cum[k] += 0.5 * step
        b = moment_row(k) - a
        cum[k] -= 0.5 * step
        m[k] = a / (1.0 - b)
        cum[k] += 0.5 * step * m[k]
    return Solution(KernelCurve(step, m, "moment", cumulative=cum), f)


# ---------------------------------------------------------------- occupation


@dataclass(frozen=True)
class OccupationSolution:
    """omega_t(x) = -log E exp(-int_t^inf h(s) <X_s, f> ds) given X_t = delta_x."""

    step: float
    horizon: float
    H: np.ndarray
    back_cumulative: np.ndarray
    h: TestFunction
    f: TestFunction
    c: float

    def __call__(self, t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        t_b, x_b = np.broadcast_arrays(t, x)
        a = segment_integral(self.h, self.f, t_b.ravel(), (t_b + x_b).ravel()).reshape(t_b.shape)
        top = np.minimum(t_b + x_b, self.horizon)
        ch = _interp_uniform(self.back_cumulative, self.step, np.minimum(t_b, self.horizon))
        ch_top = _interp_uniform(self.back_cumulative, self.step, top)
        return a + (ch - ch_top) / self.c


def solve_occupation(
    model: LevyModel,
    h: TestFunction,
    f: TestFunction,
    step: float = DEFAULT_STEP,
    tol: float = 1e-13,
) -> OccupationSolution:
    """Backward marching for the weighted occupation functional.

    With H(s) = <Pi, 1 - exp(-omega_s)> and the backward cumulative
    CH(s) = int_s^T H, where T is the end of the support of h,

        omega_t(z) = int_t^{t+z} h(s) f(t + z - s) ds + c^-1 [CH(t) - CH(min(t + z, T))],

    and omega = 0 beyond T.  Each step is a scalar fixed point in H(t).
    """
    _check_single_birth(model)
    horizon = h.support_end
    if not math.isfinite(horizon):
        raise UnsupportedHorizon("time weight h must have compact support")
    if horizon <= 0:
        zero = np.zeros(2)
        return OccupationSolution(step, 0.0, zero, zero, h, f, model.c)
    n = max(1, int(math.ceil(horizon / step - 1e-9)))
    step = horizon / n
    r = step * np.arange(n + 1)
    c = model.c
    measure = model.measure
    H = np.zeros(n + 1)
    back = np.zeros(n + 1)
    if measure.is_zero():
        return OccupationSolution(step, horizon, H, back, h, f, c)
    bps_f = [b for b in f.breakpoints if math.isfinite(b)]
    bps_h = [b for b in h.breakpoints if 0 < b < horizon]
    cut = _tail_cutoff(measure)
    for k in range(n - 1, -1, -1):
        t = r[k]
        rem = horizon - t
        cols = [0.0, rem] + [b - t for b in bps_h if b > t] + list(bps_f) + [rem + b for b in bps_f]
        if f.tail_value is None:
            cols.append(rem + cut)
        knots = np.array(sorted(set(v for v in cols if v >= 0)))[None, :]
        nodes, weights, tail = measure.quadrature(knots, QUAD_ORDER)
        nodes, weights, tail = nodes[0], weights[0], float(tail[0])
        last = knots[0, -1]
        a_nodes = segment_integral(h, f, np.full_like(nodes, t), t + nodes)
        a_tail = float(segment_integral(h, f, [t], [t + last])[0])
        top = np.minimum(t + nodes, horizon)
        beyond = top >= horizon

        def evaluate(hk):
            back[k] = back[k + 1] + 0.5 * step * (H[k + 1] + hk)
            inner = np.where(beyond, 0.0, _interp_uniform(back, step, top))
            omega = a_nodes + (back[k] - inner) / c
            omega_tail = a_tail + back[k] / c
            return float(np.sum(weights * -np.expm1(-omega)) - tail * np.expm1(-omega_tail))

        hk = H[k + 1]
        for _ in range(100):
            new = evaluate(hk)
            if abs(new - hk) < tol:
                hk = new
                break
            hk = new
        else:
            raise NotConverged(f"occupation step at t={t} did not settle", residual=abs(new - hk))
        H[k] = hk
        back[k] = back[k + 1] + 0.5 * step * (H[k + 1] + hk)
    return OccupationSolution(step, horizon, H, back, h, f, c)


# ---------------------------------------------------------------- diagnostics


def rho_bound(model: LevyModel, f: TestFunction) -> float:
    """(c - <Pi, rho>)^-1 sup f / rho, the stated bound on sup U_t f / rho."""
    return f.rho_norm / (model.c - model.measure.mean())


def rho_ratio(sol: Solution, t: float, x=None) -> float:
    """sup_x U_t f(x) / x over a grid of positions."""
    if x is None:
        x = np.concatenate([np.geomspace(1e-4, 1.0, 400), np.linspace(1.0, 50.0, 2000)])
    return float(np.max(sol(t, x) / x))


def semigroup_defect(solve, f: TestFunction, t: float, s: float, x=None) -> float:
    """sup_x |U_{t+s} f(x) - U_t(U_s f)(x)| for a solver ``solve(f, horizon)``."""
    if x is None:
        x = np.linspace(0.0, 4.0 * (t + s) + 4.0, 4001)[1:]
    full = solve(f, t + s)
    inner = full.as_function(s) if s <= full.curve.horizon else solve(f, s).as_function(s)
    composed = solve(inner, t)
    return float(np.max(np.abs(full(t + s, x) - composed(t, x))))
