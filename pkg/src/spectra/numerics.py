"""Linear algebra and quadrature kernel.

Symmetric tridiagonal matrices are handled with Sturm-sequence counts
(exact integer eigenvalue counts below a threshold), bisection and
twisted-factorization eigenvectors.  Dense Hermitian Gram matrices are
reduced to tridiagonal form and counted the same way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numba
import numpy as np
import scipy.linalg

from spectra.errors import InputError, NumericalError

_TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class Tridiagonal:
    """Real symmetric tridiagonal matrix built on a grid of spacing ``step``."""

    diag: np.ndarray
    offdiag: np.ndarray
    step: float = 1.0

    def __post_init__(self):
        d = np.ascontiguousarray(self.diag, dtype=float)
        e = np.ascontiguousarray(self.offdiag, dtype=float)
        if d.ndim != 1 or e.ndim != 1 or d.size == 0:
            raise InputError("diag and offdiag must be nonempty 1-D sequences")
        if e.size != d.size - 1:
            raise InputError(f"offdiag has length {e.size}, expected {d.size - 1}")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(e))):
            raise InputError("tridiagonal entries must be finite")
        if not self.step > 0:
            raise InputError("step must be positive")
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "offdiag", e)

    @property
    def size(self) -> int:
        return self.diag.size

    def inf_norm(self) -> float:
        a = np.abs(self.diag).copy()
        a[:-1] += np.abs(self.offdiag)
        a[1:] += np.abs(self.offdiag)
        return float(a.max())

    def gershgorin(self) -> tuple[float, float]:
        r = np.zeros_like(self.diag)
        r[:-1] += np.abs(self.offdiag)
        r[1:] += np.abs(self.offdiag)
        return float((self.diag - r).min()), float((self.diag + r).max())

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        out[:-1] += self.offdiag * v[1:]
        out[1:] += self.offdiag * v[:-1]
        return out

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)


@dataclass(frozen=True)
class HermitianGram:
    """Discretized integral operator: kernel samples plus quadrature weights.

    The operator represented is ``W^{1/2} entries W^{1/2}`` with
    ``W = diag(weights)``.
    """

    entries: np.ndarray
    weights: np.ndarray
    nodes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries)
        w = np.asarray(self.weights, dtype=float)
        k = np.asarray(self.nodes, dtype=float)
        n = w.size
        if a.shape != (n, n) or k.shape != (n,):
            raise InputError(f"inconsistent Gram shapes {a.shape}, {w.shape}, {k.shape}")
        if np.any(w <= 0):
            raise InputError("quadrature weights must be positive")
        if not np.all(np.isfinite(a)):
            raise NumericalError("Gram entries are not finite")
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "nodes", k)

    @property
    def size(self) -> int:
        return self.weights.size

    def weighted(self) -> np.ndarray:
        r = np.sqrt(self.weights)
        return r[:, None] * self.entries * r[None, :]


@dataclass(frozen=True)
class Quadrature:
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


# --- Sturm sequences -------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _sturm_count(d, e2, x, pivmin):
    # Number of eigenvalues strictly below x.  An exactly singular leading
    # minor is pushed to +pivmin so an eigenvalue equal to x is not counted.
    n = d.size
    count = 0
    q = d[0] - x
    if q == 0.0:
        q = pivmin
    if q < 0.0:
        count += 1
    for i in range(1, n):
        q = d[i] - x - e2[i - 1] / q
        if q == 0.0:
            q = pivmin
        if q < 0.0:
            count += 1
    return count


@numba.njit(cache=True, nogil=True)
def _bisect_index(d, e2, j, lo, hi, tol, pivmin):
    # Bisection for the j-th smallest eigenvalue (0-based) inside [lo, hi].
    eps = 2.220446049250313e-16
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if hi - lo <= max(tol, 4.0 * eps * max(abs(lo), abs(hi))) or mid == lo or mid == hi:
            break
        if _sturm_count(d, e2, mid, pivmin) > j:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@numba.njit(cache=True, nogil=True)
def _twisted_vector(d, e, lam):
    # Eigenvector for the (accurate) eigenvalue lam by twisted factorization;
    # tail components are produced by stable one-sided recurrences, so they
    # carry relative accuracy even when tiny.
    n = d.size
    z = np.zeros(n)
    if n == 1:
        z[0] = 1.0
        return z
    tiny = 1e-300
    dp = np.empty(n)
    dm = np.empty(n)
    dp[0] = d[0] - lam
    if dp[0] == 0.0:
        dp[0] = tiny
    for i in range(1, n):
        dp[i] = d[i] - lam - e[i - 1] * e[i - 1] / dp[i - 1]
        if dp[i] == 0.0:
            dp[i] = tiny
    dm[n - 1] = d[n - 1] - lam
    if dm[n - 1] == 0.0:
        dm[n - 1] = tiny
    for i in range(n - 2, -1, -1):
        dm[i] = d[i] - lam - e[i] * e[i] / dm[i + 1]
        if dm[i] == 0.0:
            dm[i] = tiny
    r = 0
    best = np.inf
    for i in range(n):
        g = abs(dp[i] + dm[i] - (d[i] - lam))
        if g < best:
            best = g
            r = i
    z[r] = 1.0
    for i in range(r - 1, -1, -1):
        z[i] = -(e[i] / dp[i]) * z[i + 1]
    for i in range(r + 1, n):
        z[i] = -(e[i - 1] / dm[i]) * z[i - 1]
    return z


@numba.njit(cache=True, nogil=True)
def _inverse_sweep(d, e, shift, v):
    # One step of inverse iteration: solve (T - shift) x = v (Thomas algorithm).
    n = d.size
    c = np.empty(n)
    x = np.empty(n)
    piv = d[0] - shift
    if piv == 0.0:
        piv = 1e-300
    c[0] = 0.0
    x[0] = v[0] / piv
    for i in range(1, n):
        c[i - 1] = e[i - 1] / piv
        piv = d[i] - shift - e[i - 1] * c[i - 1]
        if piv == 0.0:
            piv = 1e-300
        x[i] = (v[i] - e[i - 1] * x[i - 1]) / piv
    for i in range(n - 2, -1, -1):
        x[i] -= c[i] * x[i + 1]
    return x


def _pivmin(T: Tridiagonal) -> float:
    e2max = float(np.max(T.offdiag**2)) if T.offdiag.size else 1.0
    return _TINY * max(1.0, e2max)


def sturm_count_below(T: Tridiagonal, threshold: float) -> int:
    """Exact number of eigenvalues of ``T`` strictly below ``threshold``."""
    if not math.isfinite(threshold):
        raise InputError(f"threshold must be finite, got {threshold}")
    return int(_sturm_count(T.diag, T.offdiag**2, float(threshold), _pivmin(T)))


def eigenvalue_by_index(T: Tridiagonal, j: int, tol: float) -> float:
    """The ``j``-th smallest eigenvalue (0-based) to absolute accuracy ``tol``."""
    lo, hi = T.gershgorin()
    pad = 1e-12 * max(1.0, abs(lo), abs(hi))
    return float(_bisect_index(T.diag, T.offdiag**2, j, lo - pad, hi + pad, tol, _pivmin(T)))


def lowest_eigenpair(T: Tridiagonal, tol: float = 1e-12, max_sweeps: int = 4):
    """Smallest eigenvalue and its eigenvector.

    The value comes from Sturm bisection; the vector from a twisted
    factorization refined by inverse iteration when the residual is too
    large.  The vector is unit in the norm ``sqrt(step * sum(v**2))`` and its
    first significant component is nonnegative.
    """
    if not tol > 0:
        raise InputError("tol must be positive")
    value = eigenvalue_by_index(T, 0, tol)
    z = _twisted_vector(T.diag, T.offdiag, value)
    z /= np.linalg.norm(z)
    bound = 10.0 * tol * T.inf_norm()
    resid = np.linalg.norm(T.matvec(z) - value * z)
    sweeps = 0
    while resid > bound and sweeps < max_sweeps:
        shift = value - 10.0 * tol
        z = _inverse_sweep(T.diag, T.offdiag, shift, z)
        z /= np.linalg.norm(z)
        resid = np.linalg.norm(T.matvec(z) - value * z)
        sweeps += 1
    if resid > bound:
        raise NumericalError(
            f"inverse iteration did not converge: residual {resid:.3e} > {bound:.3e} "
            f"after {sweeps} sweeps"
        )
    big = np.abs(z) >= 1e-8 * np.abs(z).max()
    if z[np.argmax(big)] < 0:
        z = -z
    return value, z / math.sqrt(T.step)


# --- dense Hermitian counting ----------------------------------------------


def _real_symmetric_form(a: np.ndarray) -> tuple[np.ndarray, int]:
    """Real symmetric matrix with the same spectrum, and its multiplicity factor."""
    if np.iscomplexobj(a) and np.any(a.imag != 0):
        re, im = a.real, a.imag
        return np.block([[re, -im], [im, re]]), 2
    return np.real(a).astype(float), 1


def _tridiagonalize(a: np.ndarray) -> Tridiagonal:
    a = 0.5 * (a + a.T)
    if a.shape[0] == 1:
        return Tridiagonal(a[0:1, 0].copy(), np.zeros(0))
    h = scipy.linalg.hessenberg(a, overwrite_a=True, check_finite=False)
    return Tridiagonal(np.diag(h).copy(), np.diag(h, -1).copy())


def count_above_many(matrix: np.ndarray, thresholds: Sequence[float]) -> list[int]:
    """Eigenvalue counts strictly above each threshold for a Hermitian matrix.

    Complex input is embedded as ``[[Re, -Im], [Im, Re]]``; every eigenvalue
    appears twice there, so counts are halved.  An odd embedded count means a
    threshold sits inside a roundoff-split pair.
    """
    a, mult = _real_symmetric_form(np.asarray(matrix))
    T = _tridiagonalize(a)
    neg = Tridiagonal(-T.diag, T.offdiag)
    out = []
    for s in thresholds:
        c = sturm_count_below(neg, -float(s))
        if c % mult:
            raise NumericalError(
                f"embedded count {c} is odd at threshold {s}: an eigenvalue lies within "
                "roundoff of the threshold; perturb it"
            )
        out.append(c // mult)
    return out


def hermitian_count_above(G: HermitianGram, s: float) -> int:
    """Number of eigenvalues of the weighted Gram operator strictly above ``s``."""
    if not s > 0:
        raise InputError(f"s must be positive, got {s}")
    return count_above_many(G.weighted(), [s])[0]


def singular_count(G: HermitianGram, s: float) -> int:
    """``n_*(s; T)`` when ``G`` is the Gram matrix of ``T*T``."""
    if not s > 0:
        raise InputError(f"s must be positive, got {s}")
    return hermitian_count_above(G, s * s)


# --- quadrature and scalars -------------------------------------------------


def gauss_legendre(n: int) -> Quadrature:
    """``n``-point Gauss-Legendre rule on (-1, 1)."""
    if n < 1:
        raise InputError("n must be >= 1")
    x, w = np.polynomial.legendre.leggauss(n)
    return Quadrature(x, w)


def composite_gauss_legendre(breaks: Sequence[float], n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of an ``n``-point rule on every panel between breakpoints."""
    b = np.asarray(breaks, dtype=float)
    if b.ndim != 1 or b.size < 2 or np.any(np.diff(b) <= 0):
        raise InputError("breakpoints must be strictly increasing")
    q = gauss_legendre(n)
    half = 0.5 * np.diff(b)
    mid = 0.5 * (b[1:] + b[:-1])
    nodes = (mid[:, None] + half[:, None] * q.nodes[None, :]).ravel()
    weights = (half[:, None] * q.weights[None, :]).ravel()
    return nodes, weights


def euler_beta(a: float, b: float) -> float:
    """Euler beta function through log-Gamma."""
    if not (a > 0 and b > 0):
        raise InputError(f"beta arguments must be positive, got ({a}, {b})")
    return math.exp(math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))


def solve_increasing(
    f: Callable[[float], float], target: float, bracket: tuple[float, float], rtol: float = 1e-13
) -> float:
    """Root of ``f(t) = target`` for increasing ``f``: bisection, then Newton polish."""
    lo, hi = map(float, bracket)
    flo, fhi = f(lo) - target, f(hi) - target
    if not (lo < hi and flo <= 0 <= fhi):
        raise InputError(f"target {target} is not bracketed by f on [{lo}, {hi}]")
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    while hi - lo > 1e-6 * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        if f(mid) - target < 0:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    for _ in range(20):
        step = 1e-7 * max(1.0, abs(t))
        slope = (f(t + step) - f(t - step)) / (2 * step)
        if not slope > 0:
            break
        t_new = min(max(t - (f(t) - target) / slope, lo), hi)
        done = abs(t_new - t) <= rtol * max(1.0, abs(t))
        t = t_new
        if done:
            break
    return t


@dataclass(frozen=True)
class CountingResult:
    """Eigenvalue count below ``threshold`` with the discretization that produced it."""

    count: int
    threshold: float
    certificate: dict
