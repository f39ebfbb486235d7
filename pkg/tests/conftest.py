import numba
import numpy as np
import pytest

from spectra.bands import ModelParams


@numba.njit(cache=True)
def _jacobi(a, max_sweeps):
    n = a.shape[0]
    stop = 1e-12 * np.sqrt(np.sum(a * a))
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(n):
                if p != q:
                    off += a[p, q] * a[p, q]
        if np.sqrt(off) <= stop:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for r in range(n):
                    arp, arq = a[r, p], a[r, q]
                    a[r, p] = c * arp - s * arq
                    a[r, q] = s * arp + c * arq
                for r in range(n):
                    apr, aqr = a[p, r], a[q, r]
                    a[p, r] = c * apr - s * aqr
                    a[q, r] = s * apr + c * aqr
    return np.sort(np.diag(a).copy())


def jacobi_eigenvalues(a, max_sweeps: int = 100) -> np.ndarray:
    """Cyclic Jacobi for real symmetric matrices; stops at off-norm <= 1e-12 ||A||_F."""
    return _jacobi(np.array(a, dtype=float), max_sweeps)


@pytest.fixture(scope="session")
def params1():
    return ModelParams.for_field(1.0)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(test_acceptance.LINES):
            terminalreporter.write_line(test_acceptance.LINES[number])
