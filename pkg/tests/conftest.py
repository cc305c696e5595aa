import json
import os
import sys

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

from tpeprecoding.channel import build_covariance  # noqa: E402
from tpeprecoding.config import CovarianceSpec  # noqa: E402

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

DATA = os.path.join(os.path.dirname(__file__), "data")


def exp_cov(M, a=0.1):
    return build_covariance(CovarianceSpec("exponential", a), M)


def load_data(name):
    with open(os.path.join(DATA, name)) as fh:
        return json.load(fh)


def complex_gaussian(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: s.split("criterion ")[1]):
        terminalreporter.write_line(line)
