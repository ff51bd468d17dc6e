"""Reading the branching particle system off a simulated path.

For the subordinator orientation a jump from pre-level l with size z is a
particle born at time l with residual life z; it sits at position l + z - t at
every time t in [l, l + z).  The start level a is the ancestor, alive on
[0, a).  For the spectrally negative orientation a downward jump from l to
l - z contributes the atom l - t for t in [l - z, l) (clipped at 0), and the
killing jump is included so that X*_0 = delta at the pre-kill level.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OrphanEvent
from .levy_model import Orientation
from .paths import PathRecord
from .testfunctions import TestFunction, segment_integral

ATOM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class AtomMeasure:
    """Finite counting measure sum_i delta_{atoms[i]} on (0, inf), atoms sorted."""

    atoms: np.ndarray
    level: float = 0.0

    def __post_init__(self):
        atoms = np.sort(np.asarray(self.atoms, dtype=float))
        if np.any(atoms <= 0):
            raise ValueError("atoms must be strictly positive")
        object.__setattr__(self, "atoms", atoms)

    @property
    def mass(self) -> int:
        return len(self.atoms)

    def integrate(self, f) -> float:
        return float(np.sum(f(self.atoms))) if len(self.atoms) else 0.0

    @property
    def rho_mass(self) -> float:
        return float(self.atoms.sum())

    def __eq__(self, other):
        if not isinstance(other, AtomMeasure):
            return NotImplemented
        return len(self.atoms) == len(other.atoms) and bool(np.all(np.abs(self.atoms - other.atoms) <= ATOM_TOL))

    def __len__(self):
        return len(self.atoms)


def particle_intervals(path: PathRecord) -> tuple[np.ndarray, np.ndarray]:
    """(birth, death) times of every particle the path encodes."""
    if path.orientation is Orientation.SUBORDINATOR:
        birth = np.concatenate([[0.0], path.pre_levels])
        death = np.concatenate([[path.start], path.pre_levels + path.sizes])
    else:
        birth = np.maximum(path.pre_levels - path.sizes, 0.0)
        death = path.pre_levels.copy()
    return birth, death


def extract_X(path: PathRecord, t: float) -> AtomMeasure:
    if path.orientation is not Orientation.SUBORDINATOR:
        raise ValueError("extract_X needs a subordinator-orientation path")
    lo = path.pre_levels
    hi = lo + path.sizes
    alive = (lo <= t) & (t < hi)
    atoms = hi[alive] - t
    if t < path.start:
        atoms = np.concatenate([[path.start - t], atoms])
    return AtomMeasure(atoms, t)


def extract_Xstar(path: PathRecord, t: float) -> AtomMeasure:
    if path.orientation is not Orientation.SPECTRALLY_NEGATIVE:
        raise ValueError("extract_Xstar needs a spectrally negative path")
    hi = path.pre_levels
    lo = hi - path.sizes
    alive = (lo <= t) & (t < hi)
    return AtomMeasure(hi[alive] - t, t)


def extract(path: PathRecord, t: float) -> AtomMeasure:
    if path.orientation is Orientation.SUBORDINATOR:
        return extract_X(path, t)
    return extract_Xstar(path, t)


def total_mass(path: PathRecord, t: float) -> int:
    """<X_t, 1> without building the atom array."""
    birth, death = particle_intervals(path)
    return int(np.count_nonzero((birth <= t) & (t < death)))


def occupation(path: PathRecord, h: TestFunction, f: TestFunction) -> float:
    """int_0^inf h(t) <X_t, f> dt, summed particle by particle."""
    birth, death = particle_intervals(path)
    if len(birth) == 0:
        return 0.0
    return float(np.sum(segment_integral(h, f, birth, death)))


@dataclass(frozen=True)
class GenealogyTree:
    """Node 0 is the ancestor; node i >= 1 is the i-th jump event.  Parent of the ancestor is -1."""

    parent: np.ndarray
    birth: np.ndarray
    position: np.ndarray

    @property
    def death(self) -> np.ndarray:
        return self.birth + self.position

    def __len__(self):
        return len(self.parent)

    def children(self, node: int) -> np.ndarray:
        return np.flatnonzero(self.parent == node)

    def rows(self):
        for i in range(len(self.parent)):
            yield i, int(self.parent[i]), float(self.birth[i]), float(self.position[i]), float(self.death[i])


def genealogy(path: PathRecord) -> GenealogyTree:
    """Splitting tree of a subordinator-orientation path.

    The parent of event i is the latest earlier event j with
    l_j <= l_i < l_j + z_j, or the ancestor when there is none.  A stack of
    open excursions finds it in one pass.
    """
    if path.orientation is not Orientation.SUBORDINATOR:
        raise ValueError("genealogy needs a subordinator-orientation path")
    n = path.n_events
    lo = path.pre_levels
    hi = lo + path.sizes
    parent = np.empty(n + 1, dtype=int)
    parent[0] = -1
    stack: list[int] = []
    for i in range(n):
        level = lo[i]
        while stack and level < lo[stack[-1]]:
            stack.pop()
        if stack:
            j = stack[-1]
            if not level < hi[j]:
                raise OrphanEvent(f"event {i} at level {level} lies above its open excursion")
            parent[i + 1] = j + 1
        else:
            if not level < path.start:
                raise OrphanEvent(f"event {i} at level {level} has no parent (start {path.start})")
            parent[i + 1] = 0
        stack.append(i)
    birth = np.concatenate([[0.0], lo])
    position = np.concatenate([[path.start], path.sizes])
    return GenealogyTree(parent, birth, position)


@dataclass(frozen=True)
class PathBatch:
    """Many paths of one orientation flattened into event arrays for vectorized functionals."""

    orientation: Orientation
    starts: np.ndarray
    tau0: np.ndarray
    owner: np.ndarray      # path index (0-based within the batch) of every event
    pre_levels: np.ndarray
    sizes: np.ndarray
    c: float

    @classmethod
    def from_paths(cls, paths) -> "PathBatch":
        paths = list(paths)
        if not paths:
            raise ValueError("empty batch")
        orient = paths[0].orientation
        counts = np.array([p.n_events for p in paths])
        return cls(
            orient,
            np.array([p.start for p in paths]),
            np.array([p.tau0 for p in paths]),
            np.repeat(np.arange(len(paths)), counts),
            np.concatenate([p.pre_levels for p in paths]) if counts.sum() else np.empty(0),
            np.concatenate([p.sizes for p in paths]) if counts.sum() else np.empty(0),
            paths[0].c,
        )

    def __len__(self):
        return len(self.starts)

    def intervals(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(owner, birth, death) of every particle, ancestors included."""
        if self.orientation is Orientation.SUBORDINATOR:
            owner = np.concatenate([np.arange(len(self)), self.owner])
            birth = np.concatenate([np.zeros(len(self)), self.pre_levels])
            death = np.concatenate([self.starts, self.pre_levels + self.sizes])
        else:
            owner = self.owner
            birth = np.maximum(self.pre_levels - self.sizes, 0.0)
            death = self.pre_levels
        return owner, birth, death

    def atoms(self, t: float, ancestors: bool = True) -> tuple[np.ndarray, np.ndarray]:
        """(owner, position) of all atoms of X_t (or X*_t) across the batch."""
        owner, birth, death = self.intervals()
        alive = (birth <= t) & (t < death)
        if not ancestors and self.orientation is Orientation.SUBORDINATOR:
            alive[: len(self)] = False
        return owner[alive], death[alive] - t

    def total_mass(self, t: float) -> np.ndarray:
        owner, _ = self.atoms(t)
        return np.bincount(owner, minlength=len(self))

    def integrate(self, t: float, f) -> np.ndarray:
        """<X_t, f> per path."""
        owner, pos = self.atoms(t)
        return np.bincount(owner, weights=f(pos), minlength=len(self)) if len(pos) else np.zeros(len(self))

    def occupation(self, h: TestFunction, f: TestFunction) -> np.ndarray:
        """int h(t) <X_t, f> dt per path."""
        owner, birth, death = self.intervals()
        vals = segment_integral(h, f, birth, death) if len(birth) else np.empty(0)
        return np.bincount(owner, weights=vals, minlength=len(self))

    def initial_levels(self) -> np.ndarray:
        """Pre-kill level S*_{tau_0^- -} of every spectrally negative path."""
        if self.orientation is Orientation.SUBORDINATOR:
            raise ValueError("initial levels are defined for spectrally negative paths")
        last = np.r_[np.flatnonzero(np.diff(self.owner)), len(self.owner) - 1]
        return self.pre_levels[last]
