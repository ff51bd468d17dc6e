"""Test functions f on (0, inf) and weights h over time.

Each function knows its breakpoints and, when it is constant beyond the last
breakpoint, its ``tail_value``.  The named families are piecewise affine, which
lets ``segment_integral`` integrate products of them exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import QuadratureFailure
from .measures import gauss_legendre


class TestFunction:
    __test__ = False  # keep pytest from collecting this as a test class

    breakpoints: tuple = ()
    piecewise_affine = False

    def __call__(self, x):
        raise NotImplementedError

    @property
    def tail_value(self) -> float | None:
        """Value on (max breakpoint, inf), or None if not eventually constant."""
        return None

    @property
    def support_end(self) -> float:
        """Sup of the support (inf when not compactly supported)."""
        return math.inf

    @property
    def rho_norm(self) -> float:
        """sup_x f(x) / x."""
        return math.inf


@dataclass(frozen=True)
class Constant(TestFunction):
    theta: float

    piecewise_affine = True

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, self.theta, 0.0)

    @property
    def breakpoints(self):
        return ()

    @property
    def tail_value(self):
        return self.theta

    @property
    def support_end(self):
        return 0.0 if self.theta == 0 else math.inf

    @property
    def rho_norm(self):
        return 0.0 if self.theta == 0 else math.inf


@dataclass(frozen=True)
class CappedLinear(TestFunction):
    """f(x) = min(slope * x, cap)."""

    slope: float
    cap: float = math.inf

    piecewise_affine = True

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, np.minimum(self.slope * x, self.cap), 0.0)

    @property
    def breakpoints(self):
        if math.isfinite(self.cap) and self.slope > 0:
            return (self.cap / self.slope,)
        return ()

    @property
    def tail_value(self):
        if self.slope == 0:
            return 0.0
        return self.cap if math.isfinite(self.cap) else None

    @property
    def support_end(self):
        return 0.0 if self.slope == 0 or self.cap == 0 else math.inf

    @property
    def rho_norm(self):
        return self.slope


@dataclass(frozen=True)
class Indicator(TestFunction):
    """f(x) = 1{lo <= x < hi}."""

    lo: float
    hi: float = math.inf

    piecewise_affine = True

    def __post_init__(self):
        if not 0 <= self.lo < self.hi:
            raise ValueError("need 0 <= lo < hi")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.lo) & (x < self.hi) & (x > 0), 1.0, 0.0)

    @property
    def breakpoints(self):
        return tuple(v for v in (self.lo, self.hi) if 0 < v < math.inf)

    @property
    def tail_value(self):
        return 1.0 if self.hi == math.inf else 0.0

    @property
    def support_end(self):
        return self.hi

    @property
    def rho_norm(self):
        return math.inf if self.lo == 0 else 1.0 / self.lo


@dataclass(frozen=True)
class FunctionOf(TestFunction):
    """Wraps an arbitrary vectorized callable with optional structure hints."""

    fn: Callable
    breakpoints: tuple = ()
    tail: float | None = None
    support: float = math.inf

    def __call__(self, x):
        return self.fn(np.asarray(x, dtype=float))

    @property
    def tail_value(self):
        return self.tail

    @property
    def support_end(self):
        return self.support


def family_from_dict(doc: dict) -> TestFunction:
    fam = doc.get("family")
    if fam == "constant":
        return Constant(float(doc["theta"]))
    if fam == "capped_linear":
        return CappedLinear(float(doc.get("slope", 1.0)), float(doc.get("cap", math.inf)))
    if fam == "indicator":
        return Indicator(float(doc.get("lo", 0.0)), float(doc.get("hi", math.inf)))
    raise ValueError(f"unknown test function family {fam!r}")


def segment_integral(h: TestFunction, f: TestFunction, birth, death) -> np.ndarray:
    """int_{birth}^{death} h(t) f(death - t) dt, elementwise over arrays.

    Exact for piecewise-affine ``h`` and ``f``: both are affine between the
    merged breakpoints, so two-point Gauss-Legendre on each piece is exact.
    """
    birth = np.atleast_1d(np.asarray(birth, dtype=float))
    death = np.atleast_1d(np.asarray(death, dtype=float))
    if not (h.piecewise_affine and f.piecewise_affine):
        return _segment_integral_quad(h, f, birth, death)
    cuts = [birth, death]
    cuts += [np.full_like(birth, bp) for bp in h.breakpoints]
    cuts += [death - bp for bp in f.breakpoints]
    pts = np.stack(cuts, axis=1)
    pts = np.clip(pts, birth[:, None], death[:, None])
    pts.sort(axis=1)
    xg, wg = gauss_legendre(2)
    left = pts[:, :-1, None]
    width = np.diff(pts, axis=1)[:, :, None]
    t = left + width * xg
    vals = h(t) * f(death[:, None, None] - t)
    return (vals * width * wg).sum(axis=(1, 2))


def _segment_integral_quad(h, f, birth, death):
    out = np.empty_like(birth)
    for i, (b, d) in enumerate(zip(birth, death)):
        pts = sorted({bp for bp in h.breakpoints if b < bp < d} | {d - bp for bp in f.breakpoints if b < d - bp < d})
        val, err = integrate.quad(lambda s: float(h(s) * f(d - s)), b, d, points=pts or None, epsabs=1e-12, epsrel=1e-10, limit=200)
        if not np.isfinite(val) or err > 1e-10 * max(1.0, abs(val)):
            raise QuadratureFailure(f"adaptive quadrature did not converge on [{b}, {d}]")
        out[i] = val
    return out
