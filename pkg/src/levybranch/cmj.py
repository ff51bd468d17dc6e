"""Event-driven simulation of the finite-rate branching system.

A particle at position x drifts to 0 at unit speed (so it lives exactly x time
units), produces birth events at Poisson rate alpha during its life, and at
each event releases K ~ g children at i.i.d. positions drawn from eta.  The
population count Z(t) is the Crump-Mode-Jagers process of the system.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .errors import PopulationBudgetExceeded
from .extract import AtomMeasure
from .offspring import OffspringLaw


@dataclass(frozen=True)
class CmjRun:
    """Particles in the order they were processed (ancestors first)."""

    ids: np.ndarray
    parents: np.ndarray
    births: np.ndarray
    positions: np.ndarray
    horizon: float
    gap_room: np.ndarray  # time left in the particle's window when each wait started
    gap_obs: np.ndarray   # the wait, censored at gap_room

    def gaps(self, window: float) -> np.ndarray:
        """Waits shorter than ``window`` among those that started with at least ``window`` to go.

        Whether a wait starts with room >= window is decided by the past, so
        these are draws from the exponential law truncated at ``window``.
        """
        keep = (self.gap_room >= window) & (self.gap_obs < window)
        return self.gap_obs[keep]

    @property
    def deaths(self) -> np.ndarray:
        return self.births + self.positions

    def snapshot(self, t: float) -> AtomMeasure:
        if t > self.horizon:
            raise ValueError(f"snapshot at {t} beyond simulated horizon {self.horizon}")
        alive = (self.births <= t) & (t < self.deaths)
        return AtomMeasure(self.deaths[alive] - t, t)

    def write_log(self, fp):
        for row in zip(self.ids, self.parents, self.births, self.positions):
            fp.write("%d\t%d\t%.17g\t%.17g\n" % row)


def simulate_cmj(
    offspring: OffspringLaw,
    initial,
    horizon: float,
    rng: np.random.Generator,
    max_population: int = 1_000_000,
) -> CmjRun:
    """Run the system from the atoms of ``initial`` up to time ``horizon``.

    Particles are processed in (birth time, id) order.  Births after
    ``horizon`` are never generated, so snapshots are exact on [0, horizon].
    """
    atoms = initial.atoms if isinstance(initial, AtomMeasure) else np.asarray(initial, dtype=float)
    alpha = offspring.rate
    heap = [(0.0, i, -1, float(x)) for i, x in enumerate(atoms)]
    heapq.heapify(heap)
    next_id = len(heap)
    ids, parents, births, positions, rooms, waits = [], [], [], [], [], []
    while heap:
        birth, pid, parent, x = heapq.heappop(heap)
        ids.append(pid)
        parents.append(parent)
        births.append(birth)
        positions.append(x)
        end = min(birth + x, horizon)
        if end <= birth:
            continue
        # Poisson birth events on [birth, end) as successive exponential gaps
        t = birth
        while True:
            w = rng.exponential(1.0 / alpha)
            rooms.append(end - t)
            waits.append(min(w, end - t))
            if t + w >= end:
                break
            t += w
            k = int(offspring.sample_counts(rng, 1)[0])
            if k == 0:
                continue
            for z in offspring.position.sample(rng, k):
                heapq.heappush(heap, (t, next_id, pid, float(z)))
                next_id += 1
            if next_id > max_population:
                raise PopulationBudgetExceeded(f"population passed {max_population} particles before t={t:.4g}")
    return CmjRun(
        np.asarray(ids), np.asarray(parents), np.asarray(births), np.asarray(positions),
        horizon, np.asarray(rooms), np.asarray(waits),
    )


def total_mass_series(run: CmjRun, grid) -> np.ndarray:
    """Z(t) = #{particles with birth <= t < death} on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    births = np.sort(run.births)
    deaths = np.sort(run.deaths)
    return np.searchsorted(births, grid, side="right") - np.searchsorted(deaths, grid, side="right")
