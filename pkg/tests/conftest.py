import sys

import hypothesis
import numpy as np
import pytest

hypothesis.settings.register_profile("default", max_examples=40, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def brute_force_neighbors(X):
    """Full pairwise matrix, then every row sorted by (distance, index)."""
    X = np.asarray(X, dtype=float)
    sq = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=2)
    n = len(X)
    order = [sorted((j for j in range(n) if j != i), key=lambda j: (sq[i, j], j)) for i in range(n)]
    idx = np.array(order)
    dist = np.sqrt(np.take_along_axis(sq, idx, axis=1))
    return dist, idx, sq


def random_rotation(dim, rng):
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(results):
        cases = results[n]
        ok = all(c[0] for c in cases)
        tr.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n:>2}: {cases[0][1]}")
        for good, _, detail in cases:
            tr.write_line(f"    [{'ok' if good else 'x '}] {detail}")
