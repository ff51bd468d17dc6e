import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levybranch.errors import ModelError
from levybranch.measures import DiscreteJumps, ExponentialJumps, TabulatedJumps, measure_from_dict
from levybranch.rng import stream

TAB_GRID = np.linspace(0.02, 5.0, 300)
MEASURES = {
    "exp": ExponentialJumps(1.5, 2.0),
    "exp_lower": ExponentialJumps(1.0, 1.0, 0.3),
    "discrete": DiscreteJumps((0.5, 1.0, 2.5), (0.2, 1.0, 0.4)),
    "tab": TabulatedJumps(tuple(TAB_GRID), tuple(np.exp(-TAB_GRID) * (1 + TAB_GRID))),
}


@pytest.mark.parametrize("name", sorted(MEASURES))
def test_laplace_integral_consistency(name):
    m = MEASURES[name]
    # int (1 - e^{-beta z}) Pi(dz) -> <Pi, rho> as beta -> 0 after dividing by beta
    b = 1e-6
    assert m.laplace_integral(b) / b == pytest.approx(m.mean(), rel=1e-4)
    assert m.laplace_integral(50.0) == pytest.approx(m.total_mass(), rel=0.05)


@pytest.mark.parametrize("name", sorted(MEASURES))
def test_roundtrip(name):
    m = MEASURES[name]
    back = measure_from_dict(m.to_dict())
    assert back.total_mass() == pytest.approx(m.total_mass(), rel=1e-12)
    assert back.mean() == pytest.approx(m.mean(), rel=1e-12)


@pytest.mark.parametrize("name", sorted(MEASURES))
def test_sampler_mean(name):
    m = MEASURES[name]
    law = m.normalized()
    assert law.total_mass() == pytest.approx(1.0, rel=1e-9)
    x = law.sample(stream(12), 40_000)
    target = law.mean()
    assert abs(x.mean() - target) < 4 * x.std() / math.sqrt(len(x))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 3.0))
def test_tail_and_restrict(eps):
    m = MEASURES["exp"]
    r = m.restrict(eps)
    assert r.total_mass() == pytest.approx(m.tail(eps), rel=1e-12)
    assert r.total_mass() == pytest.approx(1.5 * math.exp(-2 * eps), rel=1e-12)
    assert r.mean() <= m.mean() + 1e-15


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 5.0))
def test_tilt_identity(theta):
    m = MEASURES["discrete"]
    t = m.tilt(theta)
    b = 0.7
    assert t.laplace_integral(b) == pytest.approx(m.laplace_integral(b + theta) - m.laplace_integral(theta), rel=1e-10, abs=1e-14)


def test_discrete_tail_closed():
    m = MEASURES["discrete"]
    assert m.tail(1.0) == pytest.approx(0.4)
    assert m.tail(1.0, closed=True) == pytest.approx(1.4)


def test_invalid():
    with pytest.raises(ModelError):
        ExponentialJumps(-1.0, 1.0)
    with pytest.raises(ModelError):
        DiscreteJumps((-1.0,), (1.0,))
    with pytest.raises((ModelError, ValueError, KeyError)):
        measure_from_dict({"kind": "stable"})
