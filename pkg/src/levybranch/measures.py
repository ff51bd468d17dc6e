"""Jump measures Pi(dz) on (0, inf).

Three concrete kinds are supported: an exponential density, a finite list of
atoms, and a tabulated density with an exponential tail.  Every measure here
has finite total mass, so small-jump truncation only removes mass; it never
turns an infinite-activity measure into a finite one.

All measures may carry a lower cutoff ``lower`` so that ``restrict(eps)``
(the measure 1{z >= eps} Pi(dz)) stays inside its own family.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .errors import ModelError, UnsupportedMeasure


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return (x + 1.0) / 2.0, w / 2.0


@lru_cache(maxsize=None)
def gauss_laguerre(order: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.laguerre.laggauss(order)


def _panel_rule(knots: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre panels between consecutive knots, row by row.

    ``knots`` has shape (K, m) with sorted rows; returns nodes and interval
    weights of shape (K, (m - 1) * order).
    """
    xg, wg = gauss_legendre(order)
    left = knots[:, :-1, None]
    width = np.diff(knots, axis=1)[:, :, None]
    nodes = left + width * xg
    weights = width * wg
    k = knots.shape[0]
    return nodes.reshape(k, -1), weights.reshape(k, -1)


class JumpMeasure:
    """Interface shared by the concrete jump measures."""

    has_density = True

    def total_mass(self) -> float:
        raise NotImplementedError

    def tail(self, x, closed: bool = False):
        """Pi((x, inf)), or Pi([x, inf)) when ``closed``."""
        raise NotImplementedError

    def mean(self) -> float:
        """First moment <Pi, rho> with rho(z) = z."""
        raise NotImplementedError

    def laplace_integral(self, beta: float) -> float:
        """int (1 - exp(-beta z)) Pi(dz)."""
        raise NotImplementedError

    def tilted_mean(self, beta: float) -> float:
        """int z exp(-beta z) Pi(dz), the derivative of laplace_integral."""
        raise NotImplementedError

    def tilt(self, theta: float) -> "JumpMeasure":
        """The measure exp(-theta z) Pi(dz)."""
        raise NotImplementedError

    def restrict(self, eps: float) -> "JumpMeasure":
        """The measure 1{z >= eps} Pi(dz)."""
        raise NotImplementedError

    def scale(self, k: float) -> "JumpMeasure":
        raise NotImplementedError

    def normalized(self) -> "JumpMeasure":
        mass = self.total_mass()
        if mass <= 0:
            raise ModelError("cannot normalize a zero measure")
        return self.scale(1.0 / mass)

    def density(self, z):
        raise UnsupportedMeasure(f"{type(self).__name__} has no density")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw ``n`` sizes from the normalized measure."""
        raise NotImplementedError

    def breakpoints(self) -> np.ndarray:
        """Points where the density is not smooth."""
        return np.empty(0)

    def quadrature(self, knots, order: int = 64):
        """Quadrature rule for z -> <Pi, F> row by row.

        ``knots`` (K, m) are points where the caller's integrand is not smooth;
        the last knot of each row is where the integrand becomes constant.
        Returns ``(nodes, weights, tail)``: the integral is
        ``sum(weights * F(nodes)) + tail * F_const``.
        """
        raise NotImplementedError

    def is_zero(self) -> bool:
        return self.total_mass() == 0.0

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ExponentialJumps(JumpMeasure):
    """Density ``rate * decay * exp(-decay z)`` on ``z >= lower``.

    ``rate`` is the total mass when ``lower == 0``.
    """

    rate: float
    decay: float
    lower: float = 0.0

    def __post_init__(self):
        if not (self.rate >= 0 and self.decay > 0 and self.lower >= 0):
            raise ModelError(f"bad exponential measure {self}")

    def total_mass(self):
        return self.rate * np.exp(-self.decay * self.lower)

    def tail(self, x, closed=False):
        x = np.maximum(np.asarray(x, dtype=float), self.lower)
        return self.rate * np.exp(-self.decay * x)

    def mean(self):
        return self.total_mass() * (self.lower + 1.0 / self.decay)

    def laplace_integral(self, beta):
        k = self.decay + beta
        return self.total_mass() - self.rate * self.decay * np.exp(-k * self.lower) / k

    def tilted_mean(self, beta):
        k = self.decay + beta
        return self.rate * self.decay * np.exp(-k * self.lower) * (self.lower / k + 1.0 / k**2)

    def tilt(self, theta):
        if theta == 0:
            return self
        k = self.decay + theta
        return ExponentialJumps(self.rate * self.decay / k, k, self.lower)

    def restrict(self, eps):
        return replace(self, lower=max(self.lower, float(eps)))

    def scale(self, k):
        return replace(self, rate=self.rate * k)

    def density(self, z):
        z = np.asarray(z, dtype=float)
        return np.where(z >= self.lower, self.rate * self.decay * np.exp(-self.decay * z), 0.0)

    def sample(self, rng, n):
        # memoryless: the restriction to [lower, inf) is lower + Exp(decay)
        return self.lower + rng.standard_exponential(n) / self.decay

    def breakpoints(self):
        return np.array([self.lower]) if self.lower > 0 else np.empty(0)

    def quadrature(self, knots, order=64):
        knots = np.asarray(knots, dtype=float)
        extra = self.breakpoints()
        if extra.size:
            top = knots[:, -1:]
            knots = np.concatenate([knots, np.minimum(extra[None, :], top)], axis=1)
        knots = np.sort(knots, axis=1)
        nodes, w = _panel_rule(knots, order)
        return nodes, w * self.density(nodes), self.tail(knots[:, -1])

    def to_dict(self):
        d = {"kind": "exponential", "rate": float(self.rate), "decay": float(self.decay)}
        if self.lower:
            d["lower"] = float(self.lower)
        return d


@dataclass(frozen=True)
class DiscreteJumps(JumpMeasure):
    """Finite sum of point masses ``sum_i w_i delta_{z_i}``.

    An empty atom list is the zero measure.
    """

    sizes: tuple = ()
    weights: tuple = ()

    has_density = False

    def __post_init__(self):
        z = np.asarray(self.sizes, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if z.shape != w.shape or z.ndim != 1:
            raise ModelError("sizes and weights must be 1-d and of equal length")
        if np.any(z <= 0) or np.any(w <= 0):
            raise ModelError("atom sizes and weights must be strictly positive")
        order = np.argsort(z, kind="stable")
        object.__setattr__(self, "sizes", tuple(float(v) for v in z[order]))
        object.__setattr__(self, "weights", tuple(float(v) for v in w[order]))

    @property
    def _z(self):
        return np.asarray(self.sizes, dtype=float)

    @property
    def _w(self):
        return np.asarray(self.weights, dtype=float)

    def total_mass(self):
        return float(self._w.sum())

    def tail(self, x, closed=False):
        x = np.asarray(x, dtype=float)
        z, w = self._z, self._w
        mask = z[None, :] >= x[..., None] if closed else z[None, :] > x[..., None]
        return (mask * w).sum(axis=-1) if x.ndim else float((mask * w).sum())

    def mean(self):
        return float((self._z * self._w).sum())

    def laplace_integral(self, beta):
        return float(((1.0 - np.exp(-beta * self._z)) * self._w).sum())

    def tilted_mean(self, beta):
        return float((self._z * np.exp(-beta * self._z) * self._w).sum())

    def tilt(self, theta):
        if theta == 0:
            return self
        return DiscreteJumps(self.sizes, tuple(self._w * np.exp(-theta * self._z)))

    def restrict(self, eps):
        keep = self._z >= eps
        return DiscreteJumps(tuple(self._z[keep]), tuple(self._w[keep]))

    def scale(self, k):
        return DiscreteJumps(self.sizes, tuple(self._w * k))

    def sample(self, rng, n):
        cdf = np.cumsum(self._w)
        u = rng.random(n) * cdf[-1]
        idx = np.searchsorted(cdf, u, side="right")
        return self._z[np.minimum(idx, len(cdf) - 1)]

    def quadrature(self, knots, order=64):
        k = np.asarray(knots).shape[0]
        nodes = np.broadcast_to(self._z, (k, len(self.sizes)))
        weights = np.broadcast_to(self._w, (k, len(self.sizes)))
        return nodes, weights, np.zeros(k)

    def to_dict(self):
        return {"kind": "discrete", "atoms": [[float(z), float(w)] for z, w in zip(self.sizes, self.weights)]}


@dataclass(frozen=True)
class TabulatedJumps(JumpMeasure):
    """Piecewise-linear density on a grid with an exponential tail.

    Beyond the last grid point the density continues as
    ``d[-1] * exp(-k (z - z[-1]))`` with ``k`` fitted to the last two points.
    Below the first grid point the density is zero.  ``tilt_rate`` multiplies
    the whole density by ``exp(-tilt_rate z)`` exactly.
    """

    grid: tuple
    values: tuple
    lower: float = 0.0
    tilt_rate: float = 0.0
    factor: float = 1.0
    _tail_rate: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        z = np.asarray(self.grid, dtype=float)
        d = np.asarray(self.values, dtype=float)
        if z.ndim != 1 or z.shape != d.shape or len(z) < 2:
            raise ModelError("tabulated density needs at least two grid points")
        if np.any(z <= 0) or np.any(np.diff(z) <= 0):
            raise ModelError("grid must be strictly positive and increasing")
        if np.any(d < 0) or d[-1] <= 0 or d[-2] <= 0:
            raise ModelError("density values must be nonnegative, last two positive")
        k = np.log(d[-2] / d[-1]) / (z[-1] - z[-2])
        if not k + self.tilt_rate > 0:
            raise ModelError("fitted tail is not decaying: first moment would be infinite")
        object.__setattr__(self, "grid", tuple(float(v) for v in z))
        object.__setattr__(self, "values", tuple(float(v) for v in d))
        object.__setattr__(self, "_tail_rate", float(k))

    @property
    def _z(self):
        return np.asarray(self.grid)

    @property
    def _d(self):
        return np.asarray(self.values)

    def _start(self):
        return max(self.lower, self.grid[0])

    def density(self, z):
        z = np.asarray(z, dtype=float)
        zg, d = self._z, self._d
        inside = np.interp(z, zg, d)
        tail = d[-1] * np.exp(-self._tail_rate * (z - zg[-1]))
        raw = np.where(z > zg[-1], tail, inside)
        raw = np.where(z >= self._start(), raw, 0.0)
        return self.factor * raw * np.exp(-self.tilt_rate * z)

    def _integrate(self, fn, lo=None):
        """int_{z >= lo} fn(z) Pi(dz) for a vectorized ``fn``."""
        lo = self._start() if lo is None else max(lo, self._start())
        zg = self._z
        total = 0.0
        if lo < zg[-1]:
            pts = np.concatenate([[lo], zg[zg > lo]])
            nodes, w = _panel_rule(pts[None, :], 16)
            total += float((w * fn(nodes) * self.density(nodes)).sum())
        start = max(lo, zg[-1])
        kappa = self._tail_rate + self.tilt_rate
        x, w = gauss_laguerre(64)
        c0 = self.density(start)
        total += float(c0 / kappa * (w * fn(start + x / kappa)).sum())
        return total

    def total_mass(self):
        return self._integrate(np.ones_like)

    def tail(self, x, closed=False):
        x = np.asarray(x, dtype=float)
        flat = np.array([self._integrate(np.ones_like, lo=float(v)) for v in x.ravel()])
        return flat.reshape(x.shape) if x.ndim else float(flat[0])

    def mean(self):
        return self._integrate(lambda z: z)

    def laplace_integral(self, beta):
        return self._integrate(lambda z: 1.0 - np.exp(-beta * z))

    def tilted_mean(self, beta):
        return self._integrate(lambda z: z * np.exp(-beta * z))

    def tilt(self, theta):
        if theta == 0:
            return self
        return replace(self, tilt_rate=self.tilt_rate + theta)

    def restrict(self, eps):
        return replace(self, lower=max(self.lower, float(eps)))

    def scale(self, k):
        return replace(self, factor=self.factor * k)

    def breakpoints(self):
        pts = self._z
        if self.lower > 0:
            pts = np.concatenate([[self.lower], pts[pts > self.lower]])
        return pts

    def _inverse_cdf_table(self):
        zg = self._z
        start = self._start()
        pts = np.concatenate([[start], zg[zg > start]])
        fine = np.unique(np.concatenate([np.linspace(a, b, 33) for a, b in zip(pts[:-1], pts[1:])]))
        nodes, w = _panel_rule(fine[None, :], 8)
        cell = (w * self.density(nodes)).reshape(len(fine) - 1, 8).sum(axis=1)
        return fine, np.concatenate([[0.0], np.cumsum(cell)])

    def sample(self, rng, n):
        fine, cdf = self._inverse_cdf_table()
        body = cdf[-1]
        total = body + self.tail(fine[-1])
        u = rng.random(n) * total
        e = rng.standard_exponential(n)
        out = np.interp(u, cdf, fine)
        kappa = self._tail_rate + self.tilt_rate
        return np.where(u > body, fine[-1] + e / kappa, out)

    def quadrature(self, knots, order=64):
        knots = np.asarray(knots, dtype=float)
        top = knots[:, -1:]
        extra = np.minimum(self.breakpoints()[None, :], top)
        knots = np.sort(np.concatenate([knots, np.broadcast_to(extra, (knots.shape[0], extra.shape[1]))], axis=1), axis=1)
        nodes, w = _panel_rule(knots, min(order, 16))
        return nodes, w * self.density(nodes), self.tail(knots[:, -1])

    def to_dict(self):
        d = {"kind": "tabulated", "grid": list(self.grid), "density": list(self.values)}
        if self.lower:
            d["lower"] = float(self.lower)
        return d


def measure_from_dict(doc: dict) -> JumpMeasure:
    kind = doc.get("kind")
    if kind == "exponential":
        return ExponentialJumps(float(doc["rate"]), float(doc["decay"]), float(doc.get("lower", 0.0)))
    if kind == "discrete":
        atoms = doc.get("atoms", [])
        return DiscreteJumps(tuple(a[0] for a in atoms), tuple(a[1] for a in atoms))
    if kind == "tabulated":
        return TabulatedJumps(tuple(doc["grid"]), tuple(doc["density"]), float(doc.get("lower", 0.0)))
    raise ModelError(f"unknown measure kind {kind!r}")
