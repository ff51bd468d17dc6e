import io
import math

import numpy as np
import pytest
from scipy import stats

from levybranch.cmj import simulate_cmj, total_mass_series
from levybranch.errors import PopulationBudgetExceeded
from levybranch.extract import AtomMeasure
from levybranch.measures import DiscreteJumps
from levybranch.offspring import OffspringLaw
from levybranch.rng import stream
from levybranch.solver import solve_finite_rate_U, solve_moment_pi
from levybranch.testfunctions import CappedLinear

UNIT = DiscreteJumps((1.0,), (1.0,))
BINARY = OffspringLaw((0.5, 0.0, 0.5), 1.0, UNIT)


def test_no_births():
    run = simulate_cmj(OffspringLaw((1.0,), 2.0, UNIT), [1.0], 2.0, stream(1))
    assert len(run.ids) == 1
    assert run.snapshot(0.3) == AtomMeasure(np.array([0.7]))
    assert run.snapshot(1.0).mass == 0
    assert list(total_mass_series(run, [0.0, 0.5, 0.999, 1.0, 1.5])) == [1, 1, 1, 0, 0]


def test_initial_count():
    run = simulate_cmj(BINARY, [0.5, 1.0, 2.0], 1.0, stream(2))
    assert total_mass_series(run, [0.0])[0] == 3


def test_pathwise_lifetimes():
    for k in range(50):
        run = simulate_cmj(BINARY, [1.0], 2.0, stream(3, k))
        assert np.all(run.births <= run.horizon)
        for i, par in zip(run.ids, run.parents):
            if par >= 0:
                j = np.flatnonzero(run.ids == par)[0]
                b = run.births[np.flatnonzero(run.ids == i)[0]]
                assert run.births[j] <= b < run.deaths[j]
        for t in (0.2, 1.0, 1.7):
            snap = run.snapshot(t)
            assert np.all(snap.atoms > 0)
        with pytest.raises(ValueError):
            run.snapshot(2.5)


def test_population_budget():
    boom = OffspringLaw((0.0, 0.0, 0.0, 0.0, 1.0), 5.0, DiscreteJumps((3.0,), (1.0,)))
    with pytest.raises(PopulationBudgetExceeded):
        simulate_cmj(boom, [3.0], 3.0, stream(4), max_population=1000)


def test_log_rows():
    run = simulate_cmj(BINARY, [1.0], 1.0, stream(5))
    buf = io.StringIO()
    run.write_log(buf)
    assert len(buf.getvalue().splitlines()) == len(run.ids)


def test_gaps_exponential():
    window = 0.25
    gaps = np.concatenate([simulate_cmj(BINARY, [1.0], 1.5, stream(6, k)).gaps(window) for k in range(4000)])
    cdf = lambda x: stats.expon.cdf(x, scale=1.0) / stats.expon.cdf(window, scale=1.0)
    assert len(gaps) > 500
    assert stats.kstest(gaps, cdf).pvalue > 0.001


def test_moment_and_cumulant_oracles():
    f = CappedLinear(1.0, 2.0)
    t = 0.8
    vals = np.array([simulate_cmj(BINARY, [1.0], t, stream(7, k)).snapshot(t).integrate(f) for k in range(6000)])
    pi = float(solve_moment_pi(BINARY, f, t)(t, 1.0))
    u = float(solve_finite_rate_U(BINARY, f, t)(t, 1.0))
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean() - pi) < 3 * se
    e = np.exp(-vals)
    assert abs(e.mean() - math.exp(-u)) < 3 * e.std(ddof=1) / math.sqrt(len(e))
