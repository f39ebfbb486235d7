import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import jacobi_eigenvalues
from spectra.errors import InputError
from spectra.numerics import (
    HermitianGram,
    Tridiagonal,
    composite_gauss_legendre,
    count_above_many,
    euler_beta,
    gauss_legendre,
    hermitian_count_above,
    lowest_eigenpair,
    singular_count,
    solve_increasing,
    sturm_count_below,
)

LAPLACE3 = Tridiagonal([2.0, 2.0, 2.0], [-1.0, -1.0])


def test_tridiagonal_validation():
    with pytest.raises(InputError):
        Tridiagonal([1.0, 2.0], [0.0, 1.0])
    with pytest.raises(InputError):
        Tridiagonal([1.0, np.nan], [0.0])


def test_sturm_examples():
    assert sturm_count_below(Tridiagonal([1.0, 3.0], [0.0]), 2.0) == 1
    assert sturm_count_below(LAPLACE3, 2.0) == 1
    with pytest.raises(InputError):
        sturm_count_below(LAPLACE3, math.inf)


def test_sturm_strict_at_eigenvalue():
    # eigenvalue exactly 1 is not counted below 1
    assert sturm_count_below(Tridiagonal([1.0, 3.0], [0.0]), 1.0) == 0


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_gershgorin_floor_counts_zero(n, seed):
    rng = np.random.default_rng(seed)
    T = Tridiagonal(rng.normal(size=n), rng.normal(size=n - 1))
    m = np.abs(T.offdiag).max() if n > 1 else 0.0
    assert sturm_count_below(T, T.diag.min() - 2 * m - 1) == 0


def test_sturm_against_jacobi():
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = 50
        T = Tridiagonal(rng.normal(size=n), rng.normal(size=n - 1))
        ev = jacobi_eigenvalues(T.dense())
        for x in rng.uniform(ev[0] - 1, ev[-1] + 1, size=4):
            if np.min(np.abs(ev - x)) > 1e-9:
                assert sturm_count_below(T, x) == int(np.sum(ev < x))


def test_lowest_eigenpair_examples():
    val, vec = lowest_eigenpair(Tridiagonal([1.0, 3.0], [0.0]))
    assert val == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(vec, [1.0, 0.0])
    val, vec = lowest_eigenpair(LAPLACE3, tol=1e-12)
    assert abs(val - (2 - math.sqrt(2))) <= 1e-12
    again = lowest_eigenpair(LAPLACE3, tol=1e-10)
    assert lowest_eigenpair(LAPLACE3, tol=1e-10)[0] == again[0]
    assert np.array_equal(lowest_eigenpair(LAPLACE3, tol=1e-10)[1], again[1])


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 60), st.integers(0, 2**32 - 1))
def test_lowest_eigenpair_residual(n, seed):
    rng = np.random.default_rng(seed)
    T = Tridiagonal(rng.normal(size=n) * 3, rng.uniform(0.1, 1.0, size=n - 1))
    tol = 1e-10
    val, vec = lowest_eigenpair(T, tol)
    r = T.matvec(vec) - val * vec
    assert np.linalg.norm(r) <= 10 * tol * T.inf_norm() * np.linalg.norm(vec)


def test_hermitian_examples():
    z = HermitianGram(np.zeros((3, 3)), np.ones(3), np.arange(3.0))
    assert hermitian_count_above(z, 0.1) == 0
    one = HermitianGram(np.array([[4.0]]), np.ones(1), np.zeros(1))
    assert hermitian_count_above(one, 3.0) == 1
    assert hermitian_count_above(one, 5.0) == 0
    g = HermitianGram(np.array([[0, 1j], [-1j, 0]]), np.ones(2), np.arange(2.0))
    assert hermitian_count_above(g, 0.5) == 1
    assert singular_count(one, 1.9) == 1 and singular_count(one, 2.1) == 0


def test_hermitian_validation():
    with pytest.raises(InputError):
        HermitianGram(np.eye(2), np.array([1.0, -1.0]), np.arange(2.0))
    with pytest.raises(InputError):
        HermitianGram(np.eye(3), np.ones(2), np.arange(2.0))


def test_embedded_count_against_dense():
    rng = np.random.default_rng(11)
    for _ in range(50):
        a = rng.normal(size=(20, 20)) + 1j * rng.normal(size=(20, 20))
        a = a + a.conj().T
        ev = np.linalg.eigvalsh(a)
        xs = [x for x in rng.uniform(ev[0] - 1, ev[-1] + 1, size=6) if np.min(np.abs(ev - x)) > 1e-8]
        assert count_above_many(a, xs) == [int(np.sum(ev > x)) for x in xs]


def test_real_symmetric_count_against_jacobi():
    rng = np.random.default_rng(3)
    for _ in range(10):
        a = rng.normal(size=(12, 12))
        a = a + a.T
        ev = jacobi_eigenvalues(a)
        assert count_above_many(a, [0.3]) == [int(np.sum(ev > 0.3))]


def test_counts_are_strict_at_threshold():
    assert count_above_many(np.diag([1.0, 2.0]), [1.0]) == [1]
    assert count_above_many(np.diag([1.0, 2.0]).astype(complex), [2.0]) == [0]


def test_gauss_legendre_examples():
    q = gauss_legendre(2)
    assert q.integrate(lambda x: x**2) == pytest.approx(2 / 3, abs=1e-15)
    q1 = gauss_legendre(1)
    assert q1.nodes[0] == 0.0 and q1.weights[0] == 2.0
    q20 = gauss_legendre(20)
    assert abs(q20.integrate(np.exp) - (math.e - 1 / math.e)) <= 1e-14
    assert abs(q20.weights.sum() - 2) <= 1e-12
    assert np.all(np.diff(q20.nodes) > 0)


@pytest.mark.parametrize("n", [1, 3, 8, 15])
def test_gauss_legendre_monomials(n):
    q = gauss_legendre(n)
    for p in range(2 * n):
        exact = (1 - (-1) ** (p + 1)) / (p + 1)
        assert abs(q.integrate(lambda x: x**p) - exact) <= 1e-13 * max(1.0, abs(exact))


def test_composite_rule():
    x, w = composite_gauss_legendre([0.0, 0.5, 2.0], 6)
    assert abs(np.dot(w, x**3) - 4.0) < 1e-13


def test_euler_beta():
    assert euler_beta(1, 1) == pytest.approx(1.0, rel=1e-15)
    assert euler_beta(1.5, 0.5) == pytest.approx(math.pi / 2, rel=1e-14)
    assert euler_beta(0.7, 2.3) == pytest.approx(euler_beta(2.3, 0.7), rel=1e-15)
    with pytest.raises(InputError):
        euler_beta(0.0, 1.0)


def test_solve_increasing():
    assert solve_increasing(lambda t: t, 0.5, (0.0, 1.0)) == pytest.approx(0.5, abs=1e-14)
    f = lambda t: t * math.log(t)  # noqa: E731
    assert solve_increasing(f, math.e, (1.0, 10.0)) == pytest.approx(math.e, rel=1e-12)
    # independent bisection oracle
    lo, hi = 1.0, 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if f(mid) < 1 else (lo, mid)
    assert solve_increasing(f, 1.0, (1.0, 10.0)) == pytest.approx(lo, rel=1e-12)
    assert lo == pytest.approx(1.76322, abs=1e-5)
    with pytest.raises(InputError):
        solve_increasing(f, 100.0, (1.0, 10.0))
