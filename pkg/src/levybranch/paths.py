"""Exact event-list simulation of killed one-sided Levy paths.

A path is stored as its jump events (time u, pre-jump level, size z) plus the
killing time tau0.  Between events the level moves linearly at rate c, so the
event list determines the whole trajectory.  Jumps smaller than ``eps`` are
dropped, i.e. the path is driven by the restricted measure 1{z >= eps} Pi(dz).
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .errors import PathBudgetExceeded
from .levy_model import LevyModel, Orientation
from .rng import RNG_ID, stream

DEFAULT_MAX_EVENTS = 1_000_000
_BLOCK = 16


class JumpEvent(NamedTuple):
    u: float
    pre_level: float
    z: float


@dataclass(frozen=True, eq=False)
class PathRecord:
    c: float
    start: float
    orientation: Orientation
    eps: float
    times: np.ndarray
    pre_levels: np.ndarray
    sizes: np.ndarray
    tau0: float
    index: int = 0
    seed: int | None = None
    dropped_drift: float = field(default=0.0, compare=False)

    @property
    def events(self) -> list[JumpEvent]:
        return [JumpEvent(*e) for e in zip(self.times.tolist(), self.pre_levels.tolist(), self.sizes.tolist())]

    @property
    def n_events(self) -> int:
        return len(self.times)

    @property
    def post_levels(self) -> np.ndarray:
        if self.orientation is Orientation.SUBORDINATOR:
            return self.pre_levels + self.sizes
        return self.pre_levels - self.sizes

    def __eq__(self, other):
        if not isinstance(other, PathRecord):
            return NotImplemented
        return (
            (self.c, self.start, self.orientation, self.eps, self.tau0, self.index)
            == (other.c, other.start, other.orientation, other.eps, other.tau0, other.index)
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.pre_levels, other.pre_levels)
            and np.array_equal(self.sizes, other.sizes)
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "index": self.index,
                "tau0": self.tau0,
                "events": [[u, l, z] for u, l, z in zip(self.times.tolist(), self.pre_levels.tolist(), self.sizes.tolist())],
            }
        )


def path_from_json(line: str, header: dict) -> PathRecord:
    rec = json.loads(line)
    ev = np.asarray(rec["events"], dtype=float).reshape(-1, 3)
    return PathRecord(
        c=header["c"],
        start=header["start"],
        orientation=Orientation(header["orientation"]),
        eps=header["eps"],
        times=ev[:, 0].copy(),
        pre_levels=ev[:, 1].copy(),
        sizes=ev[:, 2].copy(),
        tau0=rec["tau0"],
        index=rec["index"],
        seed=header.get("seed"),
    )


def default_eps(model: LevyModel, max_rate: float = 1e6, drift_fraction: float = 1e-4) -> float:
    """Largest eps in {10^-k} with rate Pi(eps, inf) <= max_rate and dropped drift <= fraction * c."""
    measure = model.measure
    for k in range(1, 13):
        eps = 10.0 ** (-k)
        kept = measure.restrict(eps)
        dropped = measure.mean() - kept.mean()
        if kept.total_mass() <= max_rate and dropped <= drift_fraction * model.c:
            return eps
    return 1e-12


class _Draws:
    """Block-buffered gap and size draws from one stream."""

    def __init__(self, rng, rate, measure):
        self.rng, self.rate, self.measure = rng, rate, measure
        self._gaps = np.empty(0)
        self._sizes = np.empty(0)
        self._i = 0

    def next(self):
        if self._i == len(self._gaps):
            self._gaps = self.rng.standard_exponential(_BLOCK) / self.rate
            self._sizes = self.measure.sample(self.rng, _BLOCK)
            self._i = 0
        i = self._i
        self._i += 1
        return self._gaps[i], self._sizes[i]


def simulate_path(
    model: LevyModel,
    eps: float,
    rng: np.random.Generator,
    *,
    index: int = 0,
    seed: int | None = None,
    start: float | None = None,
    max_events: int = DEFAULT_MAX_EVENTS,
) -> PathRecord:
    """One killed path driven by the measure restricted to [eps, inf).

    ``start`` overrides the model's start level (subordinator orientation only).
    """
    if not eps > 0:
        raise ValueError("truncation eps must be positive")
    kept = model.measure.restrict(eps)
    rate = kept.total_mass()
    c = model.c
    times, levels, sizes = [], [], []
    time = 0.0
    if model.orientation is Orientation.SUBORDINATOR:
        a = model.start if start is None else float(start)
        level = a
        if rate > 0:
            draws = _Draws(rng, rate, kept)
            while True:
                w, z = draws.next()
                if level - c * w <= 0:
                    break
                time += w
                level -= c * w
                times.append(time)
                levels.append(level)
                sizes.append(z)
                level += z
                if len(times) > max_events:
                    raise PathBudgetExceeded(f"more than {max_events} events", index)
        tau0 = time + level / c
    else:
        a = 0.0
        if rate == 0:
            raise PathBudgetExceeded("no jumps: the path is never killed", index)
        draws = _Draws(rng, rate, kept)
        level = 0.0
        while True:
            w, z = draws.next()
            time += w
            level += c * w
            times.append(time)
            levels.append(level)
            sizes.append(z)
            level -= z
            if level <= 0:
                break
            if len(times) > max_events:
                raise PathBudgetExceeded(f"more than {max_events} events", index)
        tau0 = time
    return PathRecord(
        c=c,
        start=a,
        orientation=model.orientation,
        eps=eps,
        times=np.asarray(times, dtype=float),
        pre_levels=np.asarray(levels, dtype=float),
        sizes=np.asarray(sizes, dtype=float),
        tau0=tau0,
        index=index,
        seed=seed,
        dropped_drift=model.measure.mean() - kept.mean(),
    )


def _simulate_chunk(args):
    model, eps, seed, lo, hi, max_events = args
    out = []
    for k in range(lo, hi):
        out.append(simulate_path(model, eps, stream(seed, k), index=k, seed=seed, max_events=max_events))
    return out


def batch_simulate(
    model: LevyModel,
    eps: float,
    n_paths: int,
    seed: int,
    *,
    threads: int = 1,
    max_events: int = DEFAULT_MAX_EVENTS,
) -> Iterator[PathRecord]:
    """Paths 0..n_paths-1, path k drawn from stream (seed, k), yielded in index order."""
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if threads <= 1:
        for k in range(n_paths):
            yield simulate_path(model, eps, stream(seed, k), index=k, seed=seed, max_events=max_events)
        return
    chunk = max(1, math.ceil(n_paths / (4 * threads)))
    jobs = [(model, eps, seed, lo, min(lo + chunk, n_paths), max_events) for lo in range(0, n_paths, chunk)]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        for part in pool.map(_simulate_chunk, jobs):
            yield from part


def simulate_coupled(model: LevyModel, eps_fine: float, eps_coarse: float, rng, **kw) -> tuple[PathRecord, PathRecord]:
    """A fine path and the coarse path obtained by deleting its jumps below ``eps_coarse``.

    Both are driven by one Poisson random measure, so the unkilled coarse path
    never exceeds the fine one.  Subordinator orientation only.
    """
    if model.orientation is not Orientation.SUBORDINATOR:
        raise ValueError("coupling is defined for the subordinator orientation")
    if not eps_fine < eps_coarse:
        raise ValueError("need eps_fine < eps_coarse")
    fine = simulate_path(model, eps_fine, rng, **kw)
    keep = fine.sizes >= eps_coarse
    c, a = model.c, fine.start
    times, levels, sizes = [], [], []
    time, level = 0.0, a
    for u, z in zip(fine.times[keep].tolist(), fine.sizes[keep].tolist()):
        if level - c * (u - time) <= 0:
            break
        level -= c * (u - time)
        time = u
        times.append(u)
        levels.append(level)
        sizes.append(z)
        level += z
    coarse = PathRecord(
        c=c,
        start=a,
        orientation=fine.orientation,
        eps=eps_coarse,
        times=np.asarray(times, dtype=float),
        pre_levels=np.asarray(levels, dtype=float),
        sizes=np.asarray(sizes, dtype=float),
        tau0=time + level / c,
        index=fine.index,
        seed=fine.seed,
        dropped_drift=model.measure.mean() - model.measure.restrict(eps_coarse).mean(),
    )
    return fine, coarse


def level_at(path: PathRecord, t) -> np.ndarray:
    """Unkilled level S_t (right-continuous) from the recorded events."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    n_jumps = np.searchsorted(path.times, t, side="right")
    cum = np.concatenate([[0.0], np.cumsum(path.sizes)])
    if path.orientation is Orientation.SUBORDINATOR:
        return path.start + cum[n_jumps] - path.c * t
    return path.c * t - cum[n_jumps]


@dataclass(frozen=True)
class ExitInfo:
    """First passage data; ``inf`` marks passages that do not happen before the kill.

    ``up_pre``/``up_post`` are S_{tau+ -} and S_{tau+} when the upward passage is
    by a jump; ``down_pre``/``down_post`` likewise for a downward passage by jump.
    """

    tau_down: float
    tau_up: float
    up_pre: float = math.nan
    up_post: float = math.nan
    down_pre: float = math.nan
    down_post: float = math.nan
    up_overshoot: float = math.nan

    def down_first(self) -> bool:
        return self.tau_down < self.tau_up


def exit_times(path: PathRecord, lower: float, upper: float) -> ExitInfo:
    """tau_lower^- = inf{s>0: S_s <= lower} and tau_upper^+ = inf{s>0: S_s > upper}."""
    if not 0 <= lower < upper:
        raise ValueError("need 0 <= lower < upper")
    inf = math.inf
    u, pre, z = path.times, path.pre_levels, path.sizes
    c = path.c
    if path.orientation is Orientation.SUBORDINATOR:
        a = path.start
        seg_start_time = np.concatenate([[0.0], u])
        seg_start_level = np.concatenate([[a], pre + z])
        seg_end_level = np.concatenate([pre, [0.0]])
        if a <= lower:
            tau_down = 0.0
        else:
            hit = np.flatnonzero(seg_end_level <= lower)
            k = hit[0]
            tau_down = seg_start_time[k] + (seg_start_level[k] - lower) / c
        if a > upper:
            return ExitInfo(tau_down, 0.0)
        up = np.flatnonzero(pre + z > upper)
        if up.size == 0:
            return ExitInfo(tau_down, inf)
        k = up[0]
        post = float(pre[k] + z[k])
        return ExitInfo(tau_down, float(u[k]), up_pre=float(pre[k]), up_post=post, up_overshoot=post - upper)
    # spectrally negative: continuous upward passage, downward passage by jumps
    seg_start_time = np.concatenate([[0.0], u[:-1]])
    seg_start_level = np.concatenate([[0.0], (pre - z)[:-1]])
    up = np.flatnonzero(pre > upper)
    tau_up = inf if up.size == 0 else float(seg_start_time[up[0]] + (upper - seg_start_level[up[0]]) / c)
    if lower > 0:
        return ExitInfo(0.0, tau_up)
    down = np.flatnonzero(pre - z <= lower)
    k = down[0]
    return ExitInfo(float(u[k]), tau_up, down_pre=float(pre[k]), down_post=float(pre[k] - z[k]))


def write_paths(fp, paths, model: LevyModel, eps: float, seed: int, extra_header: dict | None = None):
    header = {
        "type": "paths",
        "c": model.c,
        "start": model.start,
        "orientation": model.orientation.value,
        "model": model.to_dict(),
        "eps": eps,
        "seed": seed,
        "rng": RNG_ID,
    }
    if extra_header:
        header.update(extra_header)
    fp.write(json.dumps(header, sort_keys=True) + "\n")
    for p in paths:
        fp.write(p.to_json() + "\n")


def read_paths(fp) -> tuple[dict, list[PathRecord]]:
    header = None
    paths = []
    for line in fp:
        if not line.strip() or line.startswith("#"):
            continue
        if header is None:
            header = json.loads(line)
            continue
        paths.append(path_from_json(line, header))
    return header, paths
