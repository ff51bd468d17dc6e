import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_path, model_a, model_b
from levybranch.errors import PathBudgetExceeded
from levybranch.levy_model import LevyModel
from levybranch.measures import DiscreteJumps
from levybranch.paths import (
    batch_simulate, default_eps, exit_times, level_at, read_paths, simulate_coupled, simulate_path, write_paths,
)
from levybranch.rng import derive_seed, stream


def test_pure_drift_path():
    model = LevyModel(2.0, DiscreteJumps((), ()), start=1.0)
    p = simulate_path(model, 1e-3, stream(1))
    assert p.n_events == 0 and p.tau0 == 0.5
    info = exit_times(p, 0.0, 2.0)
    assert info.tau_down == 0.5 and info.tau_up == math.inf


def test_exit_single_event():
    p = make_path([(0.15, 0.7, 2.0)])
    info = exit_times(p, 0.0, 2.0)
    assert info.tau_up == pytest.approx(0.15)
    assert info.up_overshoot == pytest.approx(0.7)
    assert info.up_pre == pytest.approx(0.7)
    assert info.tau_down == pytest.approx(1.5) and p.tau0 == pytest.approx(1.5)
    assert exit_times(p, 0.0, 3.0).tau_up == math.inf
    assert exit_times(p, 0.5, 3.0).tau_down == pytest.approx(0.15 + 2.2 / 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.1, 3.0))
def test_accounting_identity(seed, a):
    A = model_a(a)
    p = simulate_path(A, 1e-6, stream(seed))
    assert abs(A.c * p.tau0 - (a + p.sizes.sum())) <= 1e-9 * max(1.0, A.c * p.tau0)
    assert float(level_at(p, p.tau0)[0]) == pytest.approx(0.0, abs=1e-9)
    assert np.all(np.diff(p.times) > 0)
    # the level is positive just before every jump
    assert np.all(p.pre_levels > 0)
    assert np.allclose(level_at(p, p.times - 1e-13), p.pre_levels, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32))
def test_negative_orientation_straddle(seed):
    B = model_b()
    p = simulate_path(B, 1e-6, stream(seed))
    assert np.all(p.pre_levels > 0)
    post = p.post_levels
    assert np.all(post[:-1] > 0) and post[-1] <= 0
    assert p.tau0 == p.times[-1]


def test_determinism_and_batch(A):
    seed = 77
    one = list(batch_simulate(A, 1e-6, 5, seed))
    two = list(batch_simulate(A, 1e-6, 5, seed))
    assert one == two
    assert one[0] == simulate_path(A, 1e-6, stream(seed, 0), index=0, seed=seed)
    assert [p.index for p in one] == list(range(5))
    assert one[1] != one[2]
    par = list(batch_simulate(A, 1e-6, 5, seed, threads=2))
    assert par == one


def test_batch_rejects_empty(A):
    with pytest.raises(ValueError):
        list(batch_simulate(A, 1e-6, 0, 1))


def test_budget():
    # near-critical: c barely above the mean jump, tiny cap
    model = LevyModel(1.001, DiscreteJumps((1.0,), (1.0,)), start=5.0)
    with pytest.raises(PathBudgetExceeded) as exc:
        list(batch_simulate(model, 1e-3, 3, 1, max_events=3))
    assert exc.value.index == 0


def test_roundtrip_file(A):
    paths = list(batch_simulate(A, 1e-6, 4, 9))
    buf = io.StringIO()
    write_paths(buf, paths, A, 1e-6, 9)
    buf.seek(0)
    header, back = read_paths(buf)
    assert header["seed"] == 9 and header["rng"]
    assert back == paths


def test_coupling_dominates(A):
    seed = derive_seed(3, "coupled")
    for k in range(200):
        fine, coarse = simulate_coupled(A, 0.01, 0.1, stream(seed, k))
        t = np.concatenate([fine.times, coarse.times, [0.0, coarse.tau0]])
        assert np.all(level_at(fine, t) >= level_at(coarse, t) - 1e-12)
        assert coarse.tau0 <= fine.tau0 + 1e-12


def test_default_eps():
    A = model_a()
    eps = default_eps(A)
    dropped = A.measure.mean() - A.measure.restrict(eps).mean()
    assert dropped <= 1e-4 * A.c and A.measure.restrict(eps).total_mass() <= 1e6


def test_mean_tau0_matches_phi_derivative(A):
    # E tau0 = a Phi'(0) = a / (c - m) = 1 for model A
    taus = np.array([simulate_path(A, 1e-6, stream(5, k)).tau0 for k in range(4000)])
    se = taus.std(ddof=1) / math.sqrt(len(taus))
    assert abs(taus.mean() - 1.0) < 4 * se
