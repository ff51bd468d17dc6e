import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_path, model_a, model_b
from levybranch.errors import OrphanEvent
from levybranch.extract import (
    AtomMeasure, PathBatch, extract, extract_X, extract_Xstar, genealogy, occupation, total_mass,
)
from levybranch.levy_model import Orientation
from levybranch.paths import simulate_path
from levybranch.rng import stream
from levybranch.testfunctions import CappedLinear, Constant, Indicator

NEG = Orientation.SPECTRALLY_NEGATIVE
DRIFT = make_path([])
ONE = make_path([(0.15, 0.7, 2.0)])


def atoms(*xs):
    return AtomMeasure(np.array(xs, dtype=float))


def test_extract_x_examples():
    assert extract_X(DRIFT, 0.5) == atoms(0.5)
    assert extract_X(ONE, 1.0) == atoms(1.7)
    assert extract_X(ONE, 0.5) == atoms(0.5)
    assert extract_X(ONE, 0.0) == atoms(1.0)
    assert extract_X(ONE, 2.7) == atoms()


def test_extract_xstar_examples():
    p = make_path([(0.3, 1.4, 2.0)], a=0.0, c=1.0, orientation=NEG)
    assert extract_Xstar(p, 0.0) == atoms(1.4)
    assert extract_Xstar(p, 1.0) == atoms(0.4)
    assert extract_Xstar(p, 1.5) == atoms()
    assert extract(p, 1.0) == extract_Xstar(p, 1.0)


def test_half_open_straddle():
    p = make_path([(0.1, 0.5, 1.0)])
    assert extract_X(p, 0.5) == atoms(0.5, 1.0)   # born exactly at 0.5 counts
    assert extract_X(p, 1.5) == atoms()           # dies exactly at 1.5


def test_multiset_kept():
    p = make_path([(0.1, 0.8, 1.0), (0.2, 0.8, 1.0)], a=1.0)
    assert extract_X(p, 0.9).mass == 3
    assert np.allclose(extract_X(p, 0.9).atoms, [0.1, 0.9, 0.9])


def test_atom_measure_rules():
    with pytest.raises(ValueError):
        atoms(0.0)
    m = atoms(2.0, 0.5)
    assert list(m.atoms) == [0.5, 2.0] and m.rho_mass == 2.5
    assert atoms(1.0) == atoms(1.0 + 5e-13) and atoms(1.0) != atoms(1.0 + 1e-11)


def test_occupation_examples():
    one = Constant(1.0)
    assert occupation(DRIFT, one, one) == pytest.approx(1.0)
    assert occupation(DRIFT, Indicator(0.0, 0.5), one) == pytest.approx(0.5)
    assert occupation(ONE, one, one) == pytest.approx(2.0 * ONE.tau0)


def test_genealogy_examples():
    assert len(genealogy(DRIFT)) == 1
    tree = genealogy(make_path([(0.1, 0.8, 1.0), (0.3, 1.2, 0.5)]))
    assert list(tree.parent) == [-1, 0, 1]
    assert tree.birth[0] == 0.0 and tree.death[0] == 1.0
    assert list(tree.children(0)) == [1]


def test_orphan():
    with pytest.raises(OrphanEvent):
        genealogy(make_path([(0.1, 1.5, 1.0)]))


def _levels(p):
    ends = np.concatenate([p.pre_levels, p.pre_levels + p.sizes, [p.start]])
    return np.unique(np.concatenate([ends, ends + 1e-7, np.linspace(0, ends.max() + 0.1, 7)]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.2, 2.5))
def test_tree_consistency(seed, a):
    p = simulate_path(model_a(a), 1e-3, stream(seed))
    tree = genealogy(p)
    assert np.allclose(tree.death - tree.birth, tree.position)
    for i in range(1, len(tree)):
        j = tree.parent[i]
        assert tree.birth[j] <= tree.birth[i] < tree.death[j]
    for t in _levels(p):
        alive = (tree.birth <= t) & (t < tree.death)
        assert extract_X(p, t) == AtomMeasure(tree.death[alive] - t)
        assert total_mass(p, t) == np.count_nonzero((p.pre_levels <= t) & (t < p.pre_levels + p.sizes)) + (t < a)
    assert extract_X(p, 0.0) == atoms(a)
    assert occupation(p, Constant(1.0), Constant(1.0)) == pytest.approx(p.c * p.tau0, abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32))
def test_batch_matches_single(seed):
    paths = [simulate_path(model_a(), 1e-3, stream(seed, k)) for k in range(6)]
    batch = PathBatch.from_paths(paths)
    f = CappedLinear(1.0, 2.0)
    h = Indicator(0.2, 0.9)
    for t in (0.0, 0.4, 1.3):
        assert np.array_equal(batch.total_mass(t), [total_mass(p, t) for p in paths])
        assert np.allclose(batch.integrate(t, f), [extract_X(p, t).integrate(f) for p in paths])
    assert np.allclose(batch.occupation(h, f), [occupation(p, h, f) for p in paths], atol=1e-12)


def test_batch_initial_levels():
    paths = [simulate_path(model_b(), 1e-3, stream(11, k)) for k in range(5)]
    batch = PathBatch.from_paths(paths)
    assert np.allclose(batch.initial_levels(), [extract_Xstar(p, 0.0).atoms[0] for p in paths])
    for p in paths:
        assert extract_Xstar(p, 0.0).mass == 1
