import os

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_rbf(rng, n=None, d=None):
    """Small RBF Gram matrix on random points, bandwidth scaled to the data."""
    from ksc.kernels import KernelSpec, gram

    n = n or int(rng.integers(8, 40))
    d = d or int(rng.integers(1, 5))
    X = rng.normal(size=(n, d))
    sq = ((X[:, None] - X[None]) ** 2).sum(-1)
    bw = float(np.median(sq[sq > 0])) * rng.uniform(0.2, 2.0)
    return gram(KernelSpec("rbf", bw), X)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = sorted(getattr(mod, "ACCEPT_LINES", []), key=lambda l: int(l.split()[1].rstrip("]")))
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
