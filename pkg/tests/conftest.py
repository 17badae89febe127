import numpy as np
import pytest

from tubegas.geometry import RoughRandom, StraightStrip, build_tube, make_finite

from oracles import OracleTube

REF_SPEC = RoughRandom(w_min_half=0.5, w_max_half=0.5, tooth_min=0.2, tooth_max=0.3)
REF_SEED = 42


@pytest.fixture(scope="session")
def ref_tube():
    return build_tube(REF_SPEC, REF_SEED)


@pytest.fixture(scope="session")
def ref_oracle():
    return OracleTube(1, 0.5, 0.5, 0.2, 0.3, REF_SEED)


@pytest.fixture(scope="session")
def strip_tube():
    return build_tube(StraightStrip(width=1.0), REF_SEED)


@pytest.fixture(scope="session")
def ref_finite_50(ref_tube):
    return make_finite(ref_tube, 50)


@pytest.fixture()
def np_rng():
    return np.random.default_rng(20240817)


def pytest_terminal_summary(terminalreporter):
    """Echo the one-line acceptance verdicts even when their tests pass."""
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance verdicts")
        for line in VERDICTS:
            terminalreporter.write_line(line)
