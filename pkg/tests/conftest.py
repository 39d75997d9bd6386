import numpy as np
import pytest

from bregopt.objectives import generate_instance


def fd_gradient(fun, x, eps=None):
    """Central-difference gradient, independent of any library code."""
    x = np.asarray(x, dtype=float)
    if eps is None:
        eps = np.finfo(float).eps ** (1.0 / 3.0) * (1.0 + np.linalg.norm(x))
    g = np.empty_like(x)
    e = np.zeros_like(x)
    for i in range(x.size):
        e[i] = eps
        g[i] = (fun(x + e) - fun(x - e)) / (2.0 * eps)
        e[i] = 0.0
    return g


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def desk_symmetric():
    return generate_instance(50, rank=2, lam=1.0, symmetric=True, seed=0)


@pytest.fixture(scope="session")
def desk_nonsymmetric(desk_symmetric):
    from bregopt.objectives import MatrixPcaInstance
    inst = desk_symmetric
    return MatrixPcaInstance(inst.A, inst.lam, inst.rank, False, inst.seed, inst.scaling)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = next((m for name, m in list(sys.modules.items())
                if name.endswith("test_acceptance") and hasattr(m, "REPORT_LINES")), None)
    if mod is None or not mod.REPORT_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.REPORT_LINES):
        terminalreporter.write_line(mod.REPORT_LINES[number])
