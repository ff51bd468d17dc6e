import json

import pytest
from hypothesis import given, strategies as st

from levybranch.config import RunConfig, parse_levels
from levybranch.errors import ConfigError
from levybranch.levy_model import Orientation
from levybranch.testfunctions import CappedLinear

BASE = {"model": {"c": 2.0, "start": 1.0, "measure": {"kind": "exponential", "rate": 1.0, "decay": 1.0}}}


def doc(**extra):
    d = json.loads(json.dumps(BASE))
    d.update(extra)
    return d


def test_defaults():
    cfg = RunConfig.from_dict(doc())
    assert cfg.model.orientation is Orientation.SUBORDINATOR
    assert cfg.eps == 1e-6 and cfg.levels == (0.5, 1.0) and cfg.suite == "all"


def test_shipped_configs():
    for name in ("model_a", "model_b", "reference"):
        cfg = RunConfig.load(f"configs/{name}.json")
        assert cfg.n_paths >= 1
    ref = RunConfig.load("configs/reference.json")
    assert ref.xstar_model.orientation is Orientation.SPECTRALLY_NEGATIVE


@pytest.mark.parametrize("patch,path", [
    ({"bogus": 1}, "bogus"),
    ({"grid": {"stepp": 0.1}}, "grid.stepp"),
    ({"rng": {"seed": 1, "extra": 2}}, "rng.extra"),
    ({"test_function": {"family": "constant", "theta": 1, "slope": 2}}, "test_function.slope"),
])
def test_unknown_field_path(patch, path):
    with pytest.raises(ConfigError) as exc:
        RunConfig.from_dict(doc(**patch))
    assert exc.value.path == path


def test_unknown_model_field():
    d = doc()
    d["model"]["measure"]["shape"] = 2
    with pytest.raises(ConfigError) as exc:
        RunConfig.from_dict(d)
    assert exc.value.path == "model.measure.shape"


def test_critical_model():
    d = doc()
    d["model"]["c"] = 1.0
    with pytest.raises(ConfigError, match="critical drift not supported"):
        RunConfig.from_dict(d)


@pytest.mark.parametrize("patch", [
    {"eps": -1}, {"n_paths": 0}, {"n_paths": 1.5}, {"grid": {"step": 0}}, {"rng": {"seed": -3}},
    {"rng": {"generator": "mt19937"}}, {"levels": [-1.0]}, {"levels": []},
    {"offspring": {"probs": [0.5, 0.6], "rate": 1.0, "position": {"kind": "discrete", "atoms": [[1.0, 1.0]]}}},
])
def test_bad_values(patch):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(doc(**patch))


def test_optional_sections():
    cfg = RunConfig.from_dict(doc(
        test_function={"family": "capped_linear", "slope": 1.0, "cap": 10.0},
        offspring={"probs": [0.5, 0.0, 0.5], "rate": 1.0, "position": {"kind": "discrete", "atoms": [[1.0, 1.0]]}},
        output={"dir": "somewhere"},
    ))
    assert cfg.test_function == CappedLinear(1.0, 10.0)
    assert cfg.offspring.mean_offspring == 1.0 and cfg.out_dir == "somewhere"


def test_digest_stable():
    a = RunConfig.from_dict(doc(eps=1e-3))
    b = RunConfig.from_dict(json.loads(json.dumps(doc(eps=1e-3))))
    assert a.digest == b.digest and a.digest != RunConfig.from_dict(doc()).digest


def test_bad_json(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        RunConfig.load(p)


@given(st.lists(st.floats(0.0, 100.0), min_size=1, max_size=6))
def test_levels_roundtrip(levels):
    text = ",".join(repr(x) for x in levels)
    assert parse_levels(text) == tuple(levels) == parse_levels(levels)
