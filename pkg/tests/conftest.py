import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from finsler_quartic.config import catalog_names, catalog_patch  # noqa: E402

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

CLOSED = ["riemannian-only", "euclidean-exact", "exact-bump", "exact-mixed", "conformal"]


@pytest.fixture(params=catalog_names())
def any_patch(request):
    return catalog_patch(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_samples(rng, count, n=2, radius=2.5):
    X = rng.uniform(-radius, radius, size=(count, n))
    Y = rng.normal(size=(count, n))
    Y /= np.linalg.norm(Y, axis=1, keepdims=True)
    return X, Y


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
