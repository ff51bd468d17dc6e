"""Monte Carlo checks of simulated branching systems against formulas and solvers.

Each ``check_*`` function turns samples plus a prediction into a
``CheckRecord``.  Suites bundle checks for the reference models; a
``SuiteContext`` caches the path batches so that suites run together share
their simulations.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import formulas
from .cmj import simulate_cmj
from .errors import ConfigError, DegenerateVariance, InsufficientSamples
from .extract import PathBatch
from .levy_model import LevyModel, Orientation, scale_W, tilt
from .measures import DiscreteJumps
from .offspring import OffspringLaw
from .paths import batch_simulate, exit_times, simulate_path
from .rng import RNG_ID, derive_seed, stream
from .solver import solve_finite_rate_U, solve_moment_pi, solve_occupation, solve_single_birth_U
from .testfunctions import CappedLinear, Constant, Indicator

Z_CAP = 3.0
P_FLOOR = 0.01
MIN_SAMPLES = 1000
SUITES = ("hitting", "exit", "geometric", "atoms", "occupation", "xstar", "reversal", "cmj_cross", "solver_cross")


@dataclass(frozen=True)
class CheckRecord:
    name: str
    kind: str
    estimate: float
    se: float
    predicted: float
    statistic: float
    p_value: float
    passed: bool
    n: int
    note: str = ""

    def __post_init__(self):
        # plain Python scalars so reports serialize regardless of how the check was computed
        for name in ("estimate", "se", "predicted", "statistic", "p_value"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "passed", bool(self.passed))
        object.__setattr__(self, "n", int(self.n))

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def line(self) -> str:
        return (f"{self.verdict} {self.name}: est={self.estimate:.6g} se={self.se:.3g} "
                f"pred={self.predicted:.6g} stat={self.statistic:.4g} p={self.p_value:.4g} n={self.n}")


@dataclass
class McReport:
    suite: str
    n_paths: int
    seed: int
    checks: list = field(default_factory=list)
    runtime: float = 0.0
    rng: str = RNG_ID

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self, runtime: bool = False) -> str:
        """Deterministic serialization; the runtime is left out unless asked for."""
        doc = {"suite": self.suite, "n_paths": self.n_paths, "seed": self.seed, "rng": self.rng,
               "passed": self.passed, "checks": [asdict(c) for c in self.checks]}
        if runtime:
            doc["runtime"] = self.runtime
        return json.dumps(doc, indent=1, sort_keys=True)

    def table(self) -> str:
        cols = ("name", "kind", "estimate", "se", "predicted", "statistic", "p_value", "verdict", "n")
        rows = ["\t".join(cols)]
        for c in self.checks:
            rows.append("\t".join([c.name, c.kind, repr(c.estimate), repr(c.se), repr(c.predicted),
                                   repr(c.statistic), repr(c.p_value), c.verdict, str(c.n)]))
        return "\n".join(rows) + "\n"


# ------------------------------------------------------------------ checks


def _z_record(name, kind, values, predicted, z_cap, note="", min_n=MIN_SAMPLES):
    values = np.asarray(values, dtype=float)
    n = len(values)
    if n < min_n:
        raise InsufficientSamples(f"{name}: {n} samples, need {min_n}")
    est = math.fsum(values) / n
    se = float(values.std(ddof=1) / math.sqrt(n))
    if se == 0.0:
        if abs(est - predicted) > 1e-12:
            raise DegenerateVariance(f"{name}: constant samples {est} differ from prediction {predicted}")
        return CheckRecord(name, kind, est, 0.0, predicted, 0.0, 1.0, True, n, note)
    z = (est - predicted) / se
    p = float(2 * stats.norm.sf(abs(z)))
    return CheckRecord(name, kind, est, se, predicted, float(z), p, abs(z) <= z_cap, n, note)


def check_scalar_laplace(samples, q: float, predicted: float, name: str = "laplace", z_cap: float = Z_CAP):
    """Mean of exp(-q X) against a predicted Laplace transform."""
    return _z_record(name, "laplace", np.exp(-q * np.asarray(samples, dtype=float)), predicted, z_cap)


def check_mean(samples, predicted: float, name: str = "mean", z_cap: float = Z_CAP, kind: str = "mean"):
    return _z_record(name, kind, samples, predicted, z_cap)


def check_laplace_functional(values, cumulant: float, name: str = "laplace_functional", z_cap: float = Z_CAP):
    """MC mean of exp(-<X_t, f>) against exp(-U_t f(a))."""
    return _z_record(name, "laplace_functional", np.exp(-np.asarray(values, dtype=float)), math.exp(-cumulant), z_cap)


def check_moment(values, moment: float, name: str = "moment", z_cap: float = Z_CAP):
    return _z_record(name, "moment", values, moment, z_cap)


def _pool(expected, observed, min_expected=5.0):
    """Merge adjacent cells (from the right, then the left) until every expected count is >= 5."""
    e = list(expected)
    o = list(observed)
    i = len(e) - 1
    while i > 0:
        if e[i] < min_expected:
            e[i - 1] += e[i]
            o[i - 1] += o[i]
            del e[i], o[i]
        i -= 1
    while len(e) > 1 and e[0] < min_expected:
        e[1] += e[0]
        o[1] += o[0]
        del e[0], o[0]
    return np.array(e), np.array(o)


def check_pmf(counts, pmf, name: str = "pmf", p_floor: float = P_FLOOR) -> CheckRecord:
    """Pearson chi-square of integer counts against a pmf on 0..len(pmf)-1 (leftover mass in the last cell)."""
    counts = np.asarray(counts)
    n = len(counts)
    pmf = np.asarray(pmf, dtype=float).copy()
    pmf[-1] += max(0.0, 1.0 - pmf.sum())
    obs = np.bincount(np.minimum(counts, len(pmf) - 1), minlength=len(pmf)).astype(float)
    return _chi_square(name, "pmf", obs, n * pmf, n, p_floor)


def _chi_square(name, kind, obs, expected, n, p_floor, note=""):
    expected, obs = _pool(expected, obs)
    keep = expected > 0
    expected, obs = expected[keep], obs[keep]
    if len(expected) < 2 or expected.min() < 5:
        raise InsufficientSamples(f"{name}: fewer than two cells with expected count >= 5")
    chi2 = float(((obs - expected) ** 2 / expected).sum())
    dof = len(expected) - 1
    p = float(stats.chi2.sf(chi2, dof))
    return CheckRecord(name, kind, chi2, 0.0, float(dof), chi2, p, p >= p_floor, int(n), note or f"dof={dof}")


def check_density(samples, density, edges, name: str = "density", p_floor: float = P_FLOOR, masses=None) -> CheckRecord:
    """Binned chi-square of continuous samples against a density.

    ``edges`` cover the bulk; samples beyond the last edge (or below the
    first) fall into overflow cells whose mass is the remainder.
    """
    samples = np.asarray(samples, dtype=float)
    n = len(samples)
    edges = np.asarray(edges, dtype=float)
    inner = formulas.binned_masses(density, edges) if masses is None else np.asarray(masses)
    rest = max(0.0, 1.0 - inner.sum())
    probs = np.concatenate([inner, [rest]])
    idx = np.searchsorted(edges, samples, side="right") - 1
    idx = np.where((idx < 0) | (idx >= len(inner)), len(inner), idx)
    obs = np.bincount(idx, minlength=len(probs)).astype(float)
    low = np.count_nonzero(samples < edges[0])
    note = "" if low == 0 else f"{low} samples below the first edge"
    return _chi_square(name, "density", obs, n * probs, n, p_floor, note)


def check_two_sample(a, b, name: str = "two_sample", p_floor: float = P_FLOOR, jitter_seed: int | None = None,
                     min_n: int = MIN_SAMPLES) -> CheckRecord:
    """Two-sample Kolmogorov-Smirnov test.

    Integer-valued functionals tie heavily; with ``jitter_seed`` each side
    gets an independent uniform perturbation far below the lattice spacing,
    which breaks ties at random without moving any mass across lattice points.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < min_n or len(b) < min_n:
        raise InsufficientSamples(f"{name}: need {min_n} samples per side")
    if jitter_seed is not None:
        a = a + 1e-9 * stream(jitter_seed, 0).random(len(a))
        b = b + 1e-9 * stream(jitter_seed, 1).random(len(b))
    res = stats.ks_2samp(a, b)
    p = float(res.pvalue)
    return CheckRecord(name, "ks2", float(res.statistic), 0.0, 0.0, float(res.statistic), p, p >= p_floor,
                       len(a) + len(b), "jittered" if jitter_seed is not None else "")


def check_exponential_gaps(gaps, rate: float, window: float = math.inf, name: str = "gaps",
                           p_floor: float = P_FLOOR) -> CheckRecord:
    """One-sample KS of waiting times against Exp(rate) truncated at ``window``."""
    gaps = np.asarray(gaps, dtype=float)
    if len(gaps) < MIN_SAMPLES:
        raise InsufficientSamples(f"{name}: {len(gaps)} gaps")
    norm = -math.expm1(-rate * window) if math.isfinite(window) else 1.0
    res = stats.kstest(gaps, lambda x: -np.expm1(-rate * np.asarray(x)) / norm)
    p = float(res.pvalue)
    return CheckRecord(name, "ks1", float(res.statistic), 0.0, 0.0, float(res.statistic), p, p >= p_floor, len(gaps))


def check_bound(name: str, value: float, bound: float, kind: str = "bound", note: str = "") -> CheckRecord:
    """Deterministic check value <= bound."""
    return CheckRecord(name, kind, float(value), 0.0, float(bound), float(value - bound), math.nan,
                       bool(value <= bound), 1, note)


def check_range(name: str, value: float, lo: float, hi: float, note: str = "") -> CheckRecord:
    return CheckRecord(name, "range", float(value), 0.0, 0.5 * (lo + hi), float(value), math.nan,
                       bool(lo <= value <= hi), 1, note or f"[{lo}, {hi}]")


# ------------------------------------------------------------------ suites


@dataclass
class SuiteContext:
    """Models, sizes and cached simulations shared by the suites."""

    model: LevyModel | None = None
    xstar_model: LevyModel | None = None
    seed: int = 20261016
    n_paths: int = 100_000
    n_two_sample: int = 10_000
    eps: float = 1e-6
    step: float = 1e-3
    tol: float = 1e-10
    threads: int = 1
    _cache: dict = field(default_factory=dict, repr=False)

    def sub(self, a: float) -> LevyModel:
        if self.model is None or self.model.orientation is not Orientation.SUBORDINATOR:
            raise ConfigError("suite needs a subordinator-orientation model", "model")
        return LevyModel(self.model.c, self.model.measure, Orientation.SUBORDINATOR, a)

    def neg(self) -> LevyModel:
        m = self.xstar_model
        if m is None and self.model is not None and self.model.orientation is Orientation.SPECTRALLY_NEGATIVE:
            m = self.model
        if m is None:
            raise ConfigError("suite needs a spectrally negative model", "xstar_model")
        return m

    def cached(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def paths(self, a: float, n: int | None = None, eps: float | None = None, tag: str = "sub"):
        n = self.n_paths if n is None else n
        eps = self.eps if eps is None else eps
        seed = derive_seed(self.seed, f"{tag}:a={a}:eps={eps}")
        return self.cached(("paths", tag, a, n, eps), lambda: list(
            batch_simulate(self.sub(a), eps, n, seed, threads=self.threads)))

    def batch(self, a: float, n: int | None = None, eps: float | None = None, tag: str = "sub") -> PathBatch:
        return self.cached(("batch", tag, a, n, eps), lambda: PathBatch.from_paths(self.paths(a, n, eps, tag)))

    def neg_paths(self, n: int | None = None):
        n = self.n_paths if n is None else n
        seed = derive_seed(self.seed, "neg")
        return self.cached(("neg", n), lambda: list(batch_simulate(self.neg(), self.eps, n, seed, threads=self.threads)))

    def neg_batch(self, n: int | None = None) -> PathBatch:
        return self.cached(("negbatch", n), lambda: PathBatch.from_paths(self.neg_paths(n)))

    def table(self, model: LevyModel, x_max: float = 4.0):
        return self.cached(("W", id(model.measure), model.c, x_max), lambda: scale_W(model, x_max, step=self.step))


def suite_hitting(ctx: SuiteContext, a: float = 1.0, qs=(0.5, 1.5, 3.0)) -> list:
    model = ctx.sub(a)
    tau = ctx.batch(a).tau0
    return [check_scalar_laplace(tau, q, formulas.hitting_laplace(model, a, q), f"hitting a={a} q={q}") for q in qs]


def suite_exit(ctx: SuiteContext, x: float = 1.0, t: float = 2.0) -> list:
    model = ctx.sub(x)
    down = np.array([exit_times(p, 0.0, t).down_first() for p in ctx.paths(x)], dtype=float)
    pred = formulas.exit_down_prob(model, x, t, ctx.table(model))
    return [check_mean(down, pred, f"exit x={x} t={t}", kind="frequency")]


def suite_geometric(ctx: SuiteContext, t: float = 1.0, starts=(2.0, 0.5)) -> list:
    out = []
    for a in starts:
        model = ctx.sub(a)
        counts = ctx.batch(a).total_mass(t)
        out.append(check_pmf(counts, formulas.total_mass_pmf_X(model, t, a, ctx.table(model)), f"total mass a={a} t={t}"))
    return out


def atom_edges(n_atoms: int, hi: float = 8.0) -> np.ndarray:
    n_bins = int(min(60, max(8, n_atoms // 400)))
    return np.concatenate([np.linspace(0.0, 3.0, n_bins // 2 + 1), np.linspace(3.0, hi, n_bins // 2 + 1)[1:]])


def suite_atoms(ctx: SuiteContext, a: float = 2.0, t: float = 1.0) -> list:
    model = ctx.sub(a)
    _, pos = ctx.batch(a).atoms(t, ancestors=False)
    table = ctx.table(model)
    edges = atom_edges(len(pos))
    rec = check_density(pos, lambda z: formulas.atom_density_X(model, t, z, table), edges, f"atom density a={a} t={t}")
    return [rec]


def suite_occupation(ctx: SuiteContext, a: float = 2.0, q: float = 0.5) -> list:
    model = ctx.sub(a)
    batch = ctx.batch(a)
    one = Constant(1.0)
    total = batch.occupation(one, one)
    gap = float(np.max(np.abs(total - model.c * batch.tau0)))
    out = [check_bound("pathwise occupation identity", gap, 1e-9, kind="identity")]
    out.append(check_scalar_laplace(total, q, formulas.occupation_laplace_X(model, a, q), f"total occupation a={a} q={q}"))
    h, f = Indicator(0.0, 1.0), CappedLinear(1.0, 5.0)
    omega = solve_occupation(model, h, f, step=ctx.step)
    out.append(check_laplace_functional(batch.occupation(h, f), float(omega(0.0, a)), f"weighted occupation a={a}"))
    return out


def suite_xstar(ctx: SuiteContext, t: float = 1.0, q: float = 1.0) -> list:
    model = ctx.neg()
    batch = ctx.neg_batch()
    init = batch.initial_levels()
    edges = np.linspace(0.0, 3.0, 41)
    out = [check_density(init, lambda y: formulas.xstar_initial_density(model, y), edges, "xstar initial law")]
    out.append(check_scalar_laplace(model.c * batch.tau0, q, formulas.occupation_laplace_xstar(model, q),
                                    f"xstar total occupation q={q}"))
    pred = formulas.xstar_predictions(model, t, ctx.table(model, max(t, 1.0)))
    out.append(check_pmf(batch.total_mass(t), pred.pmf, f"xstar total mass t={t}"))
    return out


def tilted_batch(ctx: SuiteContext, n: int) -> PathBatch:
    """The tilted single-birth system started from the law of S*_{tau_0^- -}."""
    model = ctx.neg()

    def build():
        tilted = tilt(model)
        seed = derive_seed(ctx.seed, "tilted")
        starts = formulas.sample_xstar_initial(model, stream(seed, 2**62), n)
        return PathBatch.from_paths(
            simulate_path(tilted, ctx.eps, stream(seed, k), index=k, seed=seed, start=float(starts[k]))
            for k in range(n))

    return ctx.cached(("tilted", n), build)


def suite_reversal(ctx: SuiteContext, t: float = 1.0) -> list:
    n = ctx.n_two_sample
    direct = ctx.neg_batch().total_mass(t)[:n]
    reversed_ = tilted_batch(ctx, n).total_mass(t)
    return [check_two_sample(direct, reversed_, f"time reversal <X*_{t},1>", jitter_seed=derive_seed(ctx.seed, "jit-rev"))]


def cmj_route(ctx: SuiteContext, offspring: OffspringLaw, a: float, t: float, n: int, tag: str):
    seed = derive_seed(ctx.seed, tag)
    return ctx.cached(("cmj", tag, n, a, t), lambda: [
        simulate_cmj(offspring, [a], t, stream(seed, k)) for k in range(n)])


GAP_WINDOW = 0.25


def gap_sample(ctx: SuiteContext, law: OffspringLaw, a: float, t: float, n_gaps: int = 10_000) -> np.ndarray:
    """Pooled truncated waits from fresh replicas until ``n_gaps`` are collected."""
    def build():
        seed = derive_seed(ctx.seed, "cmj-gaps")
        parts, total, k = [], 0, 0
        while total < n_gaps:
            g = simulate_cmj(law, [a], t, stream(seed, k)).gaps(GAP_WINDOW)
            parts.append(g)
            total += len(g)
            k += 1
        return np.concatenate(parts)[:n_gaps]

    return ctx.cached(("gaps", a, t, n_gaps), build)


def suite_cmj_cross(ctx: SuiteContext, a: float = 1.0, t: float = 1.0, eps: float = 0.1) -> list:
    n = ctx.n_two_sample
    model = ctx.sub(a)
    f = CappedLinear(1.0, 5.0)
    lev = ctx.batch(a, n, eps, tag="cmj-levy")
    runs = cmj_route(ctx, OffspringLaw.single_birth(model, eps), a, t, n, "cmj-single")
    snaps = [r.snapshot(t) for r in runs]
    cm_mass = np.array([s.mass for s in snaps])
    cm_f = np.array([s.integrate(f) for s in snaps])
    jit = derive_seed(ctx.seed, "jit-cmj")
    out = [
        check_two_sample(lev.total_mass(t), cm_mass, f"cmj vs path <X_{t},1>", jitter_seed=jit),
        check_two_sample(lev.integrate(t, f), cm_f, f"cmj vs path <X_{t},f>"),
    ]
    law = OffspringLaw((0.5, 0.0, 0.5), 1.0, DiscreteJumps((1.0,), (1.0,)))
    theta = math.log(2.0)
    fr = cmj_route(ctx, law, 1.0, t, n, "cmj-finite")
    u = solve_finite_rate_U(law, Constant(theta), t, step=ctx.step, tol=ctx.tol)
    vals = np.array([theta * r.snapshot(t).mass for r in fr])
    out.append(check_laplace_functional(vals, float(u(t, 1.0)), "finite-rate laplace functional"))
    out.append(check_exponential_gaps(gap_sample(ctx, law, 1.0, t), law.rate, GAP_WINDOW, "birth gaps exponential"))
    return out


def suite_solver_cross(ctx: SuiteContext, a: float = 2.0, t: float = 1.0, levels=(0.5, 1.0)) -> list:
    model = ctx.sub(a)
    batch = ctx.batch(a)
    theta = math.log(2.0)
    sol = solve_single_birth_U(model, Constant(theta), t, step=ctx.step, tol=ctx.tol)
    u = float(sol(t, a))
    W = ctx.table(model)
    p = 1.0 / (model.c * float(W(t)))
    closed = -math.log(p * math.exp(-theta) / (1.0 - (1.0 - p) * math.exp(-theta)))
    out = [check_bound("picard vs closed form", abs(u - closed), 1e-3, note=f"U={u:.10g} closed={closed:.10g}")]
    out.append(check_laplace_functional(theta * batch.total_mass(t), u, f"laplace functional a={a} t={t}"))
    f = CappedLinear(1.0, 10.0)
    horizon = max(levels)
    mom = solve_moment_pi(model, f, horizon, step=ctx.step)
    for s in levels:
        out.append(check_moment(batch.integrate(s, f), float(mom(s, a)), f"moment a={a} t={s}"))
    return out


SUITE_FUNCS = {
    "hitting": suite_hitting,
    "exit": suite_exit,
    "geometric": suite_geometric,
    "atoms": suite_atoms,
    "occupation": suite_occupation,
    "xstar": suite_xstar,
    "reversal": suite_reversal,
    "cmj_cross": suite_cmj_cross,
    "solver_cross": suite_solver_cross,
}

_NEEDS_NEG = {"xstar", "reversal"}


def run_suite(name: str, ctx: SuiteContext) -> McReport:
    """Run one suite (or ``all``); suites whose model is missing are skipped under ``all``."""
    if name != "all" and name not in SUITE_FUNCS:
        raise ConfigError(f"unknown suite {name!r}; choose from {', '.join(SUITES + ('all',))}", "suite")
    names = SUITES if name == "all" else (name,)
    report = McReport(name, ctx.n_paths, ctx.seed)
    start = time.perf_counter()
    for s in names:
        if name == "all":
            try:
                ctx.neg() if s in _NEEDS_NEG else ctx.sub(1.0)
            except ConfigError:
                continue
        try:
            report.checks.extend(SUITE_FUNCS[s](ctx))
        except ConfigError as exc:
            raise ConfigError(f"suite {s}: {exc}", exc.path) from exc
    report.runtime = time.perf_counter() - start
    return report
