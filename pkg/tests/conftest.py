import warnings

import numpy as np
import pytest

from gnbp.dist import ProbabilityClampWarning


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(autouse=True)
def _quiet_clamp():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ProbabilityClampWarning)
        yield


def tv(p, q):
    p, q = np.asarray(p, float), np.asarray(q, float)
    n = max(p.size, q.size)
    p = np.pad(p, (0, n - p.size))
    q = np.pad(q, (0, n - q.size))
    return 0.5 * float(np.abs(p - q).sum())
