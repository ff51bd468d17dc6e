"""Offspring laws of the finite-rate branching system."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ModelError
from .levy_model import LevyModel
from .measures import JumpMeasure


@dataclass(frozen=True)
class OffspringLaw:
    """Birth events at rate ``rate`` during a particle's life; each event
    produces K children, P{K = k} = probs[k], at i.i.d. positions ~ ``position``.
    """

    probs: tuple
    rate: float
    position: JumpMeasure

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or len(p) == 0 or np.any(p < 0):
            raise ModelError("offspring probabilities must be a nonnegative vector")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ModelError(f"offspring probabilities sum to {p.sum()}, not 1")
        if not self.rate > 0:
            raise ModelError("birth rate must be positive")
        if abs(self.position.total_mass() - 1.0) > 1e-9:
            raise ModelError("position law must have mass 1")
        object.__setattr__(self, "probs", tuple(float(v) for v in p))

    def g(self, s):
        """Generating function sum_k p_k s^k."""
        return np.polynomial.polynomial.polyval(s, self.probs)

    @property
    def mean_offspring(self) -> float:
        """g'(1)."""
        return float(sum(k * p for k, p in enumerate(self.probs)))

    def sample_counts(self, rng: np.random.Generator, n: int) -> np.ndarray:
        cdf = np.cumsum(self.probs)
        cdf[-1] = 1.0
        return np.searchsorted(cdf, rng.random(n), side="right")

    @classmethod
    def single_birth(cls, model: LevyModel, eps: float) -> "OffspringLaw":
        """The single-birth system coded by the eps-truncated path: g(s) = s,
        rate Pi_eps(0, inf) / c, positions Pi_eps / Pi_eps(0, inf)."""
        restricted = model.measure.restrict(eps)
        lam = restricted.total_mass()
        if not lam > 0:
            raise ModelError("truncated measure has no mass")
        return cls((0.0, 1.0), lam / model.c, restricted.normalized())

    def to_dict(self) -> dict:
        return {"probs": list(self.probs), "rate": self.rate, "position": self.position.to_dict()}
