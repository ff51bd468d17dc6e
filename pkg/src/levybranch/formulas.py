"""Closed-form laws of the branching systems read off a Levy path.

Everything here is expressed through psi, Phi, the scale function W and the
jump measure.  Densities that involve an integral of W against the jump
density are computed by the trapezoid rule on the scale-table grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidRegime, UnsupportedMeasure
from .levy_model import LevyModel, Orientation, ScaleTable, phi, scale_W
from .measures import ExponentialJumps, JumpMeasure, gauss_legendre

PMF_MASS = 1.0 - 1e-9


@dataclass(frozen=True)
class Prediction:
    tag: str
    params: dict
    value: float
    note: str = ""

    def row(self) -> str:
        p = ",".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.tag}\t{p}\t{self.value:.12g}"


def _table(model: LevyModel, x_max: float, table: ScaleTable | None, step: float = 1e-3) -> ScaleTable:
    if table is not None and table.x_max >= x_max * (1 - 1e-12):
        return table
    return scale_W(model, max(x_max, step), step=step)


def _require_subordinator(model):
    if model.orientation is not Orientation.SUBORDINATOR:
        raise InvalidRegime("this identity is for the subordinator orientation")


def _require_density(measure: JumpMeasure):
    if not getattr(measure, "has_density", True):
        raise UnsupportedMeasure(f"{type(measure).__name__} has no density")


def _w_grid(table: ScaleTable, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Trapezoid nodes y and weights on [0, t], with W(y) on the nodes."""
    n = max(1, int(math.ceil(t / table.step - 1e-9)))
    y = np.linspace(0.0, t, n + 1)
    w = np.full(n + 1, t / n)
    w[[0, -1]] *= 0.5
    return y, w


# ------------------------------------------------------------------ exits


def hitting_laplace(model: LevyModel, x: float, q: float) -> float:
    """E_x exp(-q tau_0^-) = exp(-x Phi(q))."""
    _require_subordinator(model)
    return math.exp(-x * phi(model, q))


def exit_down_prob(model: LevyModel, x: float, t: float, table: ScaleTable | None = None) -> float:
    """P_x{tau_0^- < tau_t^+} = W(t - x) / W(t), 0 <= x <= t."""
    if not 0 <= x <= t:
        raise ValueError("need 0 <= x <= t")
    W = _table(model, t, table)
    return float(W(t - x) / W(t))


def joint_crossing_density(model: LevyModel, x: float, t: float, y, z, table: ScaleTable | None = None):
    """Density of (S_{tau_t^+ -}, S_{tau_t^+} - t) on {tau_t^+ < tau_0^-} from S_0 = x."""
    _require_density(model.measure)
    W = _table(model, t, table)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    ratio = float(W(t - x) / W(t))
    wy = W(np.clip(y, 0, t))
    wyx = np.where(y - x < 0, 0.0, W(np.clip(y - x, 0, t)))
    return (ratio * wy - wyx) * model.measure.density(t - y + z)


# ------------------------------------------------------------------ X_t


def upcross_prob(model: LevyModel, t: float, table: ScaleTable | None = None) -> float:
    """1 - 1/(c W(t)): another excursion above t follows a return to t."""
    W = _table(model, t, table)
    return 1.0 - 1.0 / (model.c * float(W(t)))


def total_mass_pmf_X(model: LevyModel, t: float, a: float, table: ScaleTable | None = None) -> np.ndarray:
    """P{<X_t, 1> = n} for n = 0, 1, ..., truncated once the mass reaches 1 - 1e-9."""
    _require_subordinator(model)
    if not (t > 0 and a > 0):
        raise ValueError("need t > 0 and a > 0")
    W = _table(model, t, table)
    p = 1.0 / (model.c * float(W(t)))
    if a > t:
        p0, lead = 0.0, 1.0
    else:
        p0 = float(W(t - a) / W(t))
        lead = 1.0 - p0
    n_max = 1
    while lead * (1.0 - (1.0 - p) ** n_max) + p0 < PMF_MASS and n_max < 100000:
        n_max += 1
    n = np.arange(1, n_max + 1)
    return np.concatenate([[p0], lead * p * (1.0 - p) ** (n - 1)])


def atom_density_X(model: LevyModel, t: float, z, table: ScaleTable | None = None):
    """Density of a non-ancestor atom of X_t: int_0^t W(y) pi(t - y + z) dy / (c W(t) - 1).

    The normalizing constant is the total mass of the integral, so this is the
    overshoot law at level t conditional on an upcrossing.
    """
    _require_subordinator(model)
    _require_density(model.measure)
    W = _table(model, t, table)
    y, w = _w_grid(W, t)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    kern = model.measure.density(t - y[None, :] + z[:, None])
    num = (kern * (w * W(y))[None, :]).sum(axis=1)
    out = num / (model.c * float(W(t)) - 1.0)
    return out if out.size > 1 else float(out[0])


def ancestor_density_X(model: LevyModel, t: float, a: float, z, table: ScaleTable | None = None):
    """Density of the first atom of X_t when a <= t, normalized to mass 1.

    Unnormalized it is int_0^t (W(t-a) W(y) / W(t) - W(y-a)) pi(t - y + z) dy,
    whose mass is the upcrossing probability 1 - W(t-a)/W(t).
    """
    _require_subordinator(model)
    _require_density(model.measure)
    if not a <= t:
        raise ValueError("ancestor density is for a <= t (for a > t the atom is a - t)")
    W = _table(model, t, table)
    ratio = float(W(t - a) / W(t))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    # W(y - a) jumps from 0 to 1/c at y = a, so integrate the two sides separately
    y1, w1 = _w_grid(W, a)
    y2, w2 = _w_grid(W, t - a)
    y2 = y2 + a
    y = np.concatenate([y1, y2])
    coef = np.concatenate([w1 * ratio * W(y1), w2 * (ratio * W(y2) - W(y2 - a))])
    kern = model.measure.density(t - y[None, :] + z[:, None])
    out = (kern * coef[None, :]).sum(axis=1) / (1.0 - ratio)
    return out if out.size > 1 else float(out[0])


def occupation_laplace_X(model: LevyModel, a: float, q: float) -> float:
    """E exp(-q int <X_t, 1> dt) = exp(-a Phi(q c)), since int <X_t, 1> dt = c tau_0^-."""
    return math.exp(-a * phi(model, q * model.c))


# ------------------------------------------------------------------ X*_t


def _require_negative(model):
    if model.orientation is not Orientation.SPECTRALLY_NEGATIVE:
        raise InvalidRegime("this identity is for the spectrally negative orientation")


def xstar_initial_density(model: LevyModel, a):
    """Law of S*_{tau_0^- -}: c^-1 exp(-Phi(0) a) Pi([a, inf))."""
    beta0 = phi(model, 0.0)
    a = np.asarray(a, dtype=float)
    return np.where(a > 0, np.exp(-beta0 * a) * model.measure.tail(np.maximum(a, 0.0), closed=True) / model.c, 0.0)


def sample_xstar_initial(model: LevyModel, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draws from ``xstar_initial_density``.

    Exact for an exponential measure without cutoff (an Exp(Phi(0) + decay)
    law); otherwise inverse CDF on a fine grid.
    """
    beta0 = phi(model, 0.0)
    m = model.measure
    if isinstance(m, ExponentialJumps) and m.lower == 0:
        return rng.exponential(1.0 / (beta0 + m.decay), n)
    top = 1.0
    while float(xstar_initial_density(model, top)) > 1e-14:
        top *= 2.0
    grid = np.linspace(0.0, top, 200001)
    dens = xstar_initial_density(model, grid)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    cdf /= cdf[-1]
    return np.interp(rng.random(n), cdf, grid)


@dataclass(frozen=True)
class XstarPredictions:
    t: float
    p_zero: float
    g_mass: float
    h_mass: float
    pmf: np.ndarray
    g: Callable
    h: Callable
    initial_density: Callable

    def atom_density(self, y):
        """Density of a non-final atom Y_i, i >= 1."""
        return self.g(self.t + np.asarray(y, dtype=float)) / self.g_mass

    def last_atom_density(self, y):
        return self.h(self.t + np.asarray(y, dtype=float)) / self.h_mass


def xstar_predictions(model: LevyModel, t: float, table: ScaleTable | None = None) -> XstarPredictions:
    """Total mass law and atom densities of X*_t."""
    _require_negative(model)
    _require_density(model.measure)
    W = _table(model, t, table)
    c = model.c
    beta0 = phi(model, 0.0)
    wt = float(W(t))
    zs, wz = _w_grid(W, t)
    frac = W(zs) / wt
    dens = model.measure.density

    def g(y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        k = dens(y[:, None] - zs[None, :])
        out = np.exp(-beta0 * (y - t)) * (k * (wz * frac)[None, :]).sum(axis=1) / c
        return np.where(y > t, out, 0.0)

    def h(y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        k = dens(y[:, None] - zs[None, :])
        inner = (k * (wz * (1.0 - frac))[None, :]).sum(axis=1) + model.measure.tail(y)
        out = np.exp(-beta0 * (y - t)) * inner / c
        return np.where(y > t, out, 0.0)

    g_mass = _half_line_mass(g, t)
    h_mass = _half_line_mass(h, t)
    p0 = 1.0 - 1.0 / (c * wt)
    lead = 1.0 / (c * wt)
    n_max = 1
    while p0 + lead * h_mass * (1 - g_mass ** n_max) / (1 - g_mass) < PMF_MASS and n_max < 100000:
        n_max += 1
    n = np.arange(1, n_max + 1)
    pmf = np.concatenate([[p0], lead * g_mass ** (n - 1) * h_mass])
    return XstarPredictions(t, p0, g_mass, h_mass, pmf, g, h, lambda a: xstar_initial_density(model, a))


def _half_line_mass(fn, t, rel=1e-14):
    """int_t^inf fn by Gauss-Legendre panels out to where fn is negligible."""
    top = 1.0
    while float(fn(t + top)[0]) > rel and top < 1e6:
        top *= 2.0
    edges = t + np.concatenate([[0.0], np.geomspace(1e-4, top, 400)])
    return float(binned_masses(fn, edges, order=8).sum())


def occupation_laplace_xstar(model: LevyModel, q: float) -> float:
    """E exp(-q int <X*_t, 1> dt) = 1 - q / Phi(q c)."""
    _require_negative(model)
    if q == 0:
        return 1.0
    return 1.0 - q / phi(model, q * model.c)


def occupation_laplace_xstar_mixture(model: LevyModel, q: float, tilted: LevyModel | None = None) -> float:
    """The same transform computed through the tilted single-birth system:
    int p(a) exp(-a Phi_tilted(q c)) da with p the initial law."""
    _require_negative(model)
    beta0 = phi(model, 0.0)
    if tilted is None:
        from .levy_model import tilt
        tilted = tilt(model)
    rate = phi(tilted, q * model.c)
    m = model.measure
    if isinstance(m, ExponentialJumps) and m.lower == 0:
        # p(a) = (rate / c) exp(-(beta0 + decay) a)
        return (m.rate / model.c) / (beta0 + m.decay + rate)
    top = 1.0
    while float(xstar_initial_density(model, top)) > 1e-14:
        top *= 2.0
    edges = np.linspace(0.0, top, 2001)
    return float(binned_masses(lambda a: xstar_initial_density(model, a) * np.exp(-a * rate), edges).sum())


# ------------------------------------------------------------------ binning


def binned_masses(density: Callable, edges, order: int = 16) -> np.ndarray:
    """int over each [edges[i], edges[i+1]) of ``density`` by Gauss-Legendre."""
    edges = np.asarray(edges, dtype=float)
    xg, wg = gauss_legendre(order)
    left = edges[:-1, None]
    width = np.diff(edges)[:, None]
    nodes = left + width * xg
    vals = np.asarray(density(nodes.ravel()), dtype=float).reshape(nodes.shape)
    return (vals * width * wg).sum(axis=1)
