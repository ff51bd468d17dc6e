import math

import numpy as np
import pytest

from levybranch.levy_model import LevyModel, Orientation
from levybranch.measures import ExponentialJumps
from levybranch.paths import PathRecord
from levybranch.verify import SuiteContext

SEED = 20261016

# frozen reference values (independent high-precision evaluation of the closed forms)
W1 = 0.696734670143683           # model A: W(1) = 1 - exp(-1/2)/2
W2 = 0.816060279414279           # model A: W(2) = 1 - exp(-1)/2
EXIT_RATIO = 0.853778437352397   # W(1)/W(2)
GEOM_P = 0.717633299196792       # 1/(c W(1)), c = 2
U_CONST = 0.872743920195526      # U_1 f(2), f = ln 2
LF_CONST = 0.417803555352807     # exp(-U_CONST)
XSTAR_OCC = 2.0 - math.sqrt(2.0)  # 1 - 1/Phi(1) for model B

_LINES = []


def model_a(a=1.0):
    return LevyModel(2.0, ExponentialJumps(1.0, 1.0), Orientation.SUBORDINATOR, a)


def model_b():
    return LevyModel(1.0, ExponentialJumps(2.0, 1.0), Orientation.SPECTRALLY_NEGATIVE, 0.0)


@pytest.fixture
def A():
    return model_a()


@pytest.fixture
def B():
    return model_b()


@pytest.fixture(scope="session")
def ctx():
    return SuiteContext(model_a(), model_b(), seed=SEED)


@pytest.fixture
def verdict():
    """Record a PASS/FAIL line for the acceptance summary and assert it."""
    def record(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} {label}" + (f": {detail}" if detail else "")
        print(line)
        _LINES.append(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)


def make_path(events, a=1.0, c=2.0, orientation=Orientation.SUBORDINATOR, tau0=None):
    """Hand-built path from (u, pre_level, z) triples."""
    ev = np.asarray(events, dtype=float).reshape(-1, 3)
    if tau0 is None:
        tau0 = (a + ev[:, 2].sum()) / c if orientation is Orientation.SUBORDINATOR else float(ev[-1, 0])
    return PathRecord(c, a, orientation, 1e-6, ev[:, 0].copy(), ev[:, 1].copy(), ev[:, 2].copy(), tau0)
