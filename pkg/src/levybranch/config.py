"""Run configuration documents.

A run is described by one JSON object::

    {
      "model": {"orientation": "subordinator_negative_drift", "c": 2.0, "start": 1.0,
                "measure": {"kind": "exponential", "rate": 1.0, "decay": 1.0}},
      "xstar_model": {...},                       # optional second model for X* suites
      "eps": 1e-6,
      "grid": {"step": 0.001, "horizon": 1.0, "x_max": 5.0, "tol": 1e-10},
      "rng": {"seed": 20261016, "generator": "<rng id>"},
      "suite": "all",
      "n_paths": 100000,
      "n_two_sample": 10000,
      "levels": [0.5, 1.0],
      "test_function": {"family": "constant", "theta": 0.6931471805599453},
      "offspring": {"probs": [0.5, 0, 0.5], "rate": 1.0,
                    "position": {"kind": "discrete", "atoms": [[1.0, 1.0]]}},
      "output": {"dir": "out"}
    }

Every key except ``model`` is optional.  Unknown keys are rejected with the
dotted path of the offending field.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

from .errors import ConfigError, LevyBranchError
from .levy_model import LevyModel, Orientation
from .measures import measure_from_dict
from .offspring import OffspringLaw
from .rng import RNG_ID
from .testfunctions import TestFunction, family_from_dict

_TOP = {"model", "xstar_model", "eps", "grid", "rng", "suite", "n_paths", "n_two_sample", "levels",
        "test_function", "offspring", "output"}
_MODEL = {"orientation", "c", "start", "measure"}
_MEASURE = {
    "exponential": {"kind", "rate", "decay", "lower"},
    "discrete": {"kind", "atoms"},
    "tabulated": {"kind", "grid", "density", "lower"},
}
_GRID = {"step", "horizon", "x_max", "tol"}
_RNG = {"seed", "generator"}
_TEST = {
    "constant": {"family", "theta"},
    "capped_linear": {"family", "slope", "cap"},
    "indicator": {"family", "lo", "hi"},
}
_OFFSPRING = {"probs", "rate", "position"}
_OUTPUT = {"dir"}


def _check_keys(doc, allowed, path):
    if not isinstance(doc, dict):
        raise ConfigError(f"expected an object at {path or '<root>'}", path)
    for key in doc:
        if key not in allowed:
            where = f"{path}.{key}" if path else key
            raise ConfigError(f"unknown field {where}", where)


def _build(fn, path):
    try:
        return fn()
    except ConfigError:
        raise
    except (LevyBranchError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}", path) from exc


def _model(doc, path):
    _check_keys(doc, _MODEL, path)
    meas = doc.get("measure")
    if meas is None:
        raise ConfigError(f"missing field {path}.measure", f"{path}.measure")
    _check_keys(meas, _MEASURE.get(meas.get("kind"), {"kind"}), f"{path}.measure")
    orient = doc.get("orientation", Orientation.SUBORDINATOR.value)
    start = doc.get("start", 1.0 if orient == Orientation.SUBORDINATOR.value else 0.0)
    return _build(lambda: LevyModel(float(doc["c"]), measure_from_dict(meas), Orientation(orient), float(start)), path)


@dataclass(frozen=True)
class RunConfig:
    model: LevyModel
    xstar_model: LevyModel | None = None
    eps: float = 1e-6
    step: float = 1e-3
    horizon: float = 1.0
    x_max: float = 5.0
    tol: float = 1e-10
    seed: int = 20261016
    generator: str = RNG_ID
    suite: str = "all"
    n_paths: int = 100_000
    n_two_sample: int = 10_000
    levels: tuple = (0.5, 1.0)
    test_function: TestFunction | None = None
    offspring: OffspringLaw | None = None
    out_dir: str = "out"
    source: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def digest(self) -> str:
        """Short hash of the canonical config document."""
        text = json.dumps(self.source, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        _check_keys(doc, _TOP, "")
        if "model" not in doc:
            raise ConfigError("missing field model", "model")
        kw = {"model": _model(doc["model"], "model"), "source": doc}
        if "xstar_model" in doc:
            kw["xstar_model"] = _model(doc["xstar_model"], "xstar_model")
        grid = doc.get("grid", {})
        _check_keys(grid, _GRID, "grid")
        for key in _GRID:
            if key in grid:
                kw[key] = _positive(grid[key], f"grid.{key}")
        rng = doc.get("rng", {})
        _check_keys(rng, _RNG, "rng")
        if "seed" in rng:
            kw["seed"] = _count(rng["seed"], "rng.seed", allow_zero=True)
        if "generator" in rng and rng["generator"] != RNG_ID:
            raise ConfigError(f"rng.generator {rng['generator']!r} is not available (have {RNG_ID!r})", "rng.generator")
        if "eps" in doc:
            kw["eps"] = _positive(doc["eps"], "eps")
        for key in ("n_paths", "n_two_sample"):
            if key in doc:
                kw[key] = _count(doc[key], key)
        if "suite" in doc:
            kw["suite"] = str(doc["suite"])
        if "levels" in doc:
            kw["levels"] = parse_levels(doc["levels"], "levels")
        if "test_function" in doc:
            tf = doc["test_function"]
            _check_keys(tf, _TEST.get(tf.get("family") if isinstance(tf, dict) else None, {"family"}), "test_function")
            kw["test_function"] = _build(lambda: family_from_dict(tf), "test_function")
        if "offspring" in doc:
            off = doc["offspring"]
            _check_keys(off, _OFFSPRING, "offspring")
            pos = off.get("position", {})
            _check_keys(pos, _MEASURE.get(pos.get("kind"), {"kind"}), "offspring.position")
            kw["offspring"] = _build(
                lambda: OffspringLaw(tuple(off["probs"]), float(off["rate"]), measure_from_dict(pos)), "offspring")
        out = doc.get("output", {})
        _check_keys(out, _OUTPUT, "output")
        if "dir" in out:
            kw["out_dir"] = str(out["dir"])
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fp:
                doc = json.load(fp)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})", "") from exc
        return cls.from_dict(doc)


def _positive(v, path):
    try:
        x = float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{path} must be a number", path) from None
    if not (x > 0 and math.isfinite(x)):
        raise ConfigError(f"{path} must be positive and finite", path)
    return x


def _count(v, path, allow_zero=False):
    if isinstance(v, bool) or not isinstance(v, int) or v < (0 if allow_zero else 1):
        raise ConfigError(f"{path} must be a {'nonnegative' if allow_zero else 'positive'} integer", path)
    return v


def parse_levels(v, path="levels") -> tuple:
    if isinstance(v, str):
        v = [s for s in v.split(",") if s.strip()]
    try:
        levels = tuple(float(x) for x in v)
    except (TypeError, ValueError):
        raise ConfigError(f"{path} must be a list of numbers", path) from None
    if not levels or any(t < 0 for t in levels):
        raise ConfigError(f"{path} must be nonnegative levels", path)
    return levels
