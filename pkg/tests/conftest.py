import numpy as np
import pytest

from distsketch.dist import DiscreteDistribution


def random_discrete(rng, n_atoms, scale=1.0, max_mass=None, zero_prob=0.0):
    """Random atomic law; with ``max_mass`` the weights are near-uniform so no atom exceeds it."""
    values = np.unique(np.round(rng.exponential(scale, n_atoms) + 1e-3, 9))
    while values.size < n_atoms:
        extra = np.round(rng.exponential(scale, n_atoms - values.size) + 1e-3, 9)
        values = np.unique(np.concatenate([values, extra]))
    if max_mass is None:
        probs = rng.dirichlet(np.ones(values.size))
    else:
        w = rng.uniform(0.5, 1.0, values.size)
        probs = w / w.sum()
        assert probs.max() <= max_mass
    if zero_prob > 0:
        values = np.concatenate([[0.0], values])
        probs = np.concatenate([[zero_prob], probs * (1 - zero_prob)])
    return DiscreteDistribution(values, probs)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.summary_lines():
        terminalreporter.write_line(line)
