"""Shared oracles: dense state vectors and brute-force reference computations."""

from functools import reduce

import numpy as np
import pytest


def dense_state(mps):
    """Contract an MPS into its full ``2**m`` amplitude vector (site 0 most significant)."""
    vec = np.ones((1, 1))
    for site in mps.sites:
        left, phys, right = site.shape
        vec = (vec @ site.reshape(left, phys * right)).reshape(-1, right)
    return vec[:, 0]


def dense_product(amps):
    """Kronecker product of per-site amplitude pairs."""
    return reduce(np.kron, [np.asarray(a, dtype=float) for a in amps])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
