"""Bounded-variation spectrally one-sided Levy models.

A model is a drift ``c`` plus a jump measure ``Pi``.  In the
``SUBORDINATOR`` orientation the process is ``S_t = a + (jumps) - c t`` with
upward jumps; in the ``SPECTRALLY_NEGATIVE`` orientation it is
``S*_t = c t - (jumps)`` started at 0.  Both share the Laplace exponent

    psi(beta) = c beta - int (1 - exp(-beta z)) Pi(dz).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq
from scipy.signal import fftconvolve

from .errors import ConvergenceFailure, ModelError
from .measures import JumpMeasure, measure_from_dict


class Orientation(str, enum.Enum):
    SUBORDINATOR = "subordinator_negative_drift"
    SPECTRALLY_NEGATIVE = "negative_subordinator_positive_drift"


@dataclass(frozen=True)
class LevyModel:
    c: float
    measure: JumpMeasure
    orientation: Orientation = Orientation.SUBORDINATOR
    start: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "orientation", Orientation(self.orientation))
        if not self.c > 0:
            raise ModelError(f"drift must be positive, got {self.c}")
        m = self.measure.mean()
        if not math.isfinite(m):
            raise ModelError("jump measure has infinite first moment")
        if self.orientation is Orientation.SUBORDINATOR:
            if not self.start > 0:
                raise ModelError("subordinator orientation needs a start level a > 0")
            if m == self.c:
                raise ModelError(f"critical drift not supported (<Pi,rho>={m:g} = c)")
            if m > self.c:
                raise ModelError(f"subordinator orientation needs <Pi,rho>={m:g} < c={self.c:g}")
        else:
            if self.start != 0:
                raise ModelError("spectrally negative orientation starts at 0")
            if m == self.c:
                raise ModelError(f"critical drift not supported (<Pi,rho>={m:g} = c)")
            if not m > self.c:
                raise ModelError(f"spectrally negative orientation needs c={self.c:g} < <Pi,rho>={m:g}")

    @property
    def subcritical(self) -> bool:
        return self.measure.mean() < self.c

    def with_measure(self, measure: JumpMeasure) -> "LevyModel":
        return replace(self, measure=measure)

    def to_dict(self) -> dict:
        return {
            "orientation": self.orientation.value,
            "c": self.c,
            "start": self.start,
            "measure": self.measure.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LevyModel":
        return cls(
            c=float(doc["c"]),
            measure=measure_from_dict(doc["measure"]),
            orientation=Orientation(doc.get("orientation", Orientation.SUBORDINATOR.value)),
            start=float(doc.get("start", 1.0)),
        )


def mean_jump(measure: JumpMeasure) -> float:
    return measure.mean()


def laplace_exponent(model: LevyModel, beta: float) -> float:
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    return model.c * beta - model.measure.laplace_integral(beta)


def laplace_exponent_derivative(model: LevyModel, beta: float) -> float:
    return model.c - model.measure.tilted_mean(beta)


def _subcritical_root(c, measure, q):
    """Root of c b - <Pi, 1 - e^{-b z}> = q when <Pi, rho> < c."""
    if q == 0:
        return 0.0
    m = measure.mean()
    lo, hi = q / c, q / (c - m)

    def fn(b):
        return c * b - measure.laplace_integral(b) - q

    if fn(lo) >= 0:
        return lo
    if fn(hi) <= 0:
        return hi
    try:
        root = brentq(fn, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500)
    except (RuntimeError, ValueError) as exc:
        raise ConvergenceFailure(f"root bracket failed for q={q}") from exc
    for _ in range(2):
        slope = c - measure.tilted_mean(root)
        if slope <= 0:
            break
        step = fn(root) / slope
        if not (lo <= root - step <= hi):
            break
        root -= step
    return root


def _largest_zero(model: LevyModel) -> float:
    """Phi(0) > 0 for a model with <Pi, rho> > c."""
    def psi(b):
        return laplace_exponent(model, b)

    hi = 1.0
    for _ in range(200):
        if psi(hi) > 0:
            break
        hi *= 2.0
    else:
        raise ConvergenceFailure("could not bracket Phi(0) from above")
    lo = hi
    for _ in range(200):
        lo /= 2.0
        if psi(lo) < 0:
            break
    else:
        raise ConvergenceFailure("could not bracket Phi(0) from below")
    try:
        root = brentq(psi, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500)
    except (RuntimeError, ValueError) as exc:
        raise ConvergenceFailure("Phi(0) root search failed") from exc
    for _ in range(2):
        slope = laplace_exponent_derivative(model, root)
        if slope <= 0:
            break
        root -= psi(root) / slope
    return root


def phi(model: LevyModel, q: float) -> float:
    """Largest root of psi(beta) = q."""
    if q < 0:
        raise ValueError("q must be nonnegative")
    if model.subcritical:
        return _subcritical_root(model.c, model.measure, q)
    beta0 = _largest_zero(model)
    # psi(beta0 + b) is the exponent of the tilted, subcritical model
    return beta0 + _subcritical_root(model.c, model.measure.tilt(beta0), q)


def tilt(model: LevyModel, start: float | None = None) -> LevyModel:
    """Exponential tilt Pi+(dz) = exp(-Phi(0) z) Pi(dz), subordinator orientation.

    The result always has <Pi+, rho> = c - psi'(Phi(0)) < c.  ``start`` sets the
    start level of the returned model; it defaults to the original start when
    positive and to 1 otherwise.
    """
    beta0 = phi(model, 0.0)
    if start is None:
        start = model.start if model.start > 0 else 1.0
    tilted = model.measure.tilt(beta0)
    if beta0 == 0 and model.orientation is Orientation.SUBORDINATOR and start == model.start:
        return model
    return LevyModel(model.c, tilted, Orientation.SUBORDINATOR, start)


@dataclass(frozen=True)
class ScaleTable:
    """Scale function W tabulated on the uniform grid [0, x_max].

    ``truncation_bound`` bounds the dropped tail of the renewal series (before
    any exponential factor from tilting).  Evaluation is by linear
    interpolation; W is 0 on the negative half line.
    """

    step: float
    values: np.ndarray
    n_terms: int
    truncation_bound: float
    phi0: float = 0.0

    @property
    def x_max(self) -> float:
        return self.step * (len(self.values) - 1)

    @property
    def grid(self) -> np.ndarray:
        return self.step * np.arange(len(self.values))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x > self.x_max * (1 + 1e-12)):
            raise ValueError(f"W requested beyond tabulated range x_max={self.x_max}")
        out = np.interp(x, self.grid, self.values)
        return np.where(x < 0, 0.0, out)


def _trapezoid_convolve(kernel: np.ndarray, g: np.ndarray, step: float) -> np.ndarray:
    """(kernel * g)(x_i) = int_0^{x_i} kernel(y) g(x_i - y) dy, trapezoid rule."""
    full = fftconvolve(kernel, g)[: len(g)]
    out = full - 0.5 * (kernel[0] * g + kernel * g[0])
    out[0] = 0.0
    return step * out


def scale_W(model: LevyModel, x_max: float, tol: float = 1e-10, step: float = 1e-3) -> ScaleTable:
    """Scale function via the renewal series W = c^-1 sum_n K_n.

    K_0 = 1 and K_n = kappa * K_{n-1} with kappa = Pi-bar / c.  Supercritical
    models are handled through W(x) = exp(Phi(0) x) W_tilted(x).
    """
    if not model.subcritical:
        beta0 = phi(model, 0.0)
        tilted = LevyModel(model.c, model.measure.tilt(beta0), Orientation.SUBORDINATOR, 1.0)
        base = scale_W(tilted, x_max, tol * math.exp(-beta0 * x_max), step)
        values = base.values * np.exp(beta0 * base.grid)
        return ScaleTable(step, values, base.n_terms, base.truncation_bound, beta0)

    c = model.c
    theta = model.measure.mean() / c
    if not theta < 1:
        raise ConvergenceFailure(f"renewal ratio {theta} >= 1 after tilting")
    n = int(math.ceil(x_max / step - 1e-9)) + 1
    grid = step * np.arange(n)
    kappa = np.asarray(model.measure.tail(grid), dtype=float) / c
    term = np.ones(n)
    total = term.copy()
    n_terms = 0
    bound = theta / (1.0 - theta) / c
    while bound >= tol:
        term = _trapezoid_convolve(kappa, term, step)
        total += term
        n_terms += 1
        bound = theta ** (n_terms + 1) / (1.0 - theta) / c
        if n_terms > 100000:
            raise ConvergenceFailure("renewal series did not reach tolerance")
    return ScaleTable(step, total / c, n_terms, bound)
