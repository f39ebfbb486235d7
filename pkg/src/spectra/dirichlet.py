"""Effective Dirichlet machinery: anti-Wick Gram matrices and eigenvalue counts.

Operators acting in the momentum variable k are discretized by Nystrom's
method on composite Gauss-Legendre nodes; a kernel K(k, k') becomes the
Hermitian matrix W^{1/2} K W^{1/2}.  Coherent states are

    phi(x) = pi^{-1/4} b^{1/4} exp(-b x^2 / 2),

and all potentials live on x > 0 (evaluation at x <= 0 gives 0).
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.special as sc

from spectra.bands import BandTable, BoundaryKind, ModelParams, dirichlet_gap
from spectra.errors import InputError, NumericalError
from spectra.numerics import (
    CountingResult,
    HermitianGram,
    composite_gauss_legendre,
    count_above_many,
    solve_increasing,
)
from spectra.special import dirichlet_gap_asymptotic

_ORDER = 8  # Gauss-Legendre points per k-panel
_X_ORDER = 10  # points per x-panel
_NODES_PER_PERIOD = 8


def coherent_state(x, b: float) -> np.ndarray:
    return (b / math.pi) ** 0.25 * np.exp(-0.5 * b * np.asarray(x, dtype=float) ** 2)


# --- potentials -------------------------------------------------------------


class Potential2D:
    """Bounded nonnegative potential on the half-plane x > 0.

    Separable families provide ``x_profile``, ``y_transform`` and ``coef`` so
    that V(x, y) = coef * f(x) * g(y) with y_transform(q) = int g(y) e^{-iqy} dy.
    """

    kind = "abstract"
    separable = True

    @property
    def sup(self) -> float:
        raise NotImplementedError

    def __call__(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = self._eval(x, y)
        return np.where(x > 0, out, 0.0)

    def x_breaks(self, b: float) -> np.ndarray:
        """Quadrature breakpoints covering the x-support."""
        raise NotImplementedError

    def x_reach(self) -> float:
        """Right edge of the bulk of the x-support (used to size k-windows)."""
        return float(self.x_breaks(1.0)[-1])

    def y_extent(self) -> float:
        """Largest |y| of the effective support; sets the k-oscillation scale."""
        raise NotImplementedError

    def is_zero(self) -> bool:
        return self.sup == 0.0


@dataclass(frozen=True)
class RectangleIndicator(Potential2D):
    c: float
    x0: float
    x1: float
    y0: float
    y1: float

    kind = "rectangle_indicator"

    def __post_init__(self):
        vals = (self.c, self.x0, self.x1, self.y0, self.y1)
        if not all(math.isfinite(v) for v in vals):
            raise InputError("rectangle parameters must be finite")
        if self.c < 0:
            raise InputError("rectangle height c must be >= 0")
        if self.x0 < 0:
            raise InputError(f"rectangle x0={self.x0} < 0: support must lie in x > 0")
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise InputError("rectangle needs x1 > x0 and y1 > y0")

    @property
    def sup(self) -> float:
        return float(self.c)

    @property
    def coef(self) -> float:
        return float(self.c)

    def _eval(self, x, y):
        inside = (x > self.x0) & (x < self.x1) & (y > self.y0) & (y < self.y1)
        return np.where(inside, self.c, 0.0)

    def x_profile(self, x):
        return ((x > self.x0) & (x < self.x1)).astype(float)

    def x_breaks(self, b):
        return _panel_breaks(self.x0, self.x1, 0.25 / math.sqrt(b))

    def y_extent(self):
        return max(abs(self.y0), abs(self.y1))

    def y_transform(self, q):
        q = np.asarray(q, dtype=float)
        length = self.y1 - self.y0
        mid = 0.5 * (self.y0 + self.y1)
        return length * np.sinc(q * length / (2 * math.pi)) * np.exp(-1j * q * mid)


@dataclass(frozen=True)
class GaussianSeparable(Potential2D):
    """A exp(-((x-cx)/sx)^2) exp(-((y-cy)/sy)^2), restricted to x > 0."""

    A: float
    sigma_x: float
    sigma_y: float
    center: tuple[float, float] = (0.0, 0.0)

    kind = "gaussian_separable"

    def __post_init__(self):
        if not (self.A >= 0 and self.sigma_x > 0 and self.sigma_y > 0):
            raise InputError("gaussian needs A >= 0 and positive widths")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def sup(self) -> float:
        cx = self.center[0]
        if cx > 0:
            return float(self.A)
        return float(self.A * math.exp(-((cx / self.sigma_x) ** 2)))

    @property
    def coef(self) -> float:
        return float(self.A)

    def _eval(self, x, y):
        cx, cy = self.center
        return self.A * np.exp(-(((x - cx) / self.sigma_x) ** 2) - ((y - cy) / self.sigma_y) ** 2)

    def x_profile(self, x):
        return np.exp(-(((x - self.center[0]) / self.sigma_x) ** 2))

    def x_breaks(self, b):
        hi = max(self.center[0], 0.0) + 9.0 * self.sigma_x
        return _panel_breaks(0.0, hi, min(0.25 / math.sqrt(b), 0.5 * self.sigma_x))

    def x_reach(self):
        return max(self.center[0] + 3.0 * self.sigma_x, 0.0)

    def y_extent(self):
        return abs(self.center[1]) + 6.0 * self.sigma_y

    def y_transform(self, q):
        q = np.asarray(q, dtype=float)
        s = self.sigma_y
        return math.sqrt(math.pi) * s * np.exp(-0.25 * (s * q) ** 2 - 1j * q * self.center[1])


@dataclass(frozen=True)
class PowerTail(Potential2D):
    """A (1 + y^2)^{-alpha/2} on the strip x0 < x < x1."""

    A: float
    alpha: float
    x0: float
    x1: float

    kind = "power_tail"

    def __post_init__(self):
        if not (self.A >= 0 and self.alpha > 0):
            raise InputError("power tail needs A >= 0 and alpha > 0")
        if self.x0 < 0 or not self.x1 > self.x0:
            raise InputError("power tail profile needs 0 <= x0 < x1")

    @property
    def sup(self) -> float:
        return float(self.A)

    @property
    def coef(self) -> float:
        return float(self.A)

    def _eval(self, x, y):
        inside = (x > self.x0) & (x < self.x1)
        return np.where(inside, self.A * (1.0 + y * y) ** (-0.5 * self.alpha), 0.0)

    def x_profile(self, x):
        return ((x > self.x0) & (x < self.x1)).astype(float)

    def x_breaks(self, b):
        return _panel_breaks(self.x0, self.x1, 0.25 / math.sqrt(b))

    def y_extent(self):
        # the transform decays like exp(-|q|); no oscillation, only a kink at 0
        return 2.0

    def y_transform(self, q):
        if self.alpha <= 1:
            raise InputError("the y-transform of a power tail needs alpha > 1")
        nu = 0.5 * (self.alpha - 1.0)
        a = np.abs(np.asarray(q, dtype=float))
        at_zero = math.sqrt(math.pi) * math.gamma(nu) / math.gamma(nu + 0.5)
        safe = np.where(a < 1e-12, 1.0, a)
        val = 2.0 * math.sqrt(math.pi) / math.gamma(nu + 0.5) * (0.5 * safe) ** nu * sc.kv(nu, safe)
        return np.where(a < 1e-12, at_zero, val).astype(complex)


@dataclass(frozen=True)
class SampledPotential(Potential2D):
    """Values on a rectilinear grid, piecewise bilinear, zero outside."""

    x_nodes: np.ndarray
    y_nodes: np.ndarray
    values: np.ndarray

    kind = "sampled"
    separable = False

    def __post_init__(self):
        x = np.asarray(self.x_nodes, dtype=float)
        y = np.asarray(self.y_nodes, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or y.ndim != 1 or v.shape != (x.size, y.size) or x.size < 2 or y.size < 2:
            raise InputError("sampled potential needs values of shape (len(x_nodes), len(y_nodes))")
        if np.any(np.diff(x) <= 0) or np.any(np.diff(y) <= 0):
            raise InputError("grid nodes must be strictly increasing")
        if x[0] < 0:
            raise InputError("sampled grid must lie in x >= 0")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise InputError("sampled values must be finite and >= 0")
        object.__setattr__(self, "x_nodes", x)
        object.__setattr__(self, "y_nodes", y)
        object.__setattr__(self, "values", v)

    @property
    def sup(self) -> float:
        return float(self.values.max())

    def _eval(self, x, y):
        from scipy.interpolate import RegularGridInterpolator

        f = RegularGridInterpolator((self.x_nodes, self.y_nodes), self.values, bounds_error=False, fill_value=0.0)
        pts = np.stack(np.broadcast_arrays(x, y), axis=-1)
        return f(pts)

    def x_breaks(self, b):
        step = 0.25 / math.sqrt(b)
        parts = [_panel_breaks(a, c, step)[:-1] for a, c in zip(self.x_nodes[:-1], self.x_nodes[1:])]
        return np.append(np.concatenate(parts), self.x_nodes[-1])

    def y_extent(self):
        return float(max(abs(self.y_nodes[0]), abs(self.y_nodes[-1])))


def _panel_breaks(lo: float, hi: float, width: float) -> np.ndarray:
    m = max(1, math.ceil((hi - lo) / width))
    return np.linspace(lo, hi, m + 1)


# --- k-windows and nodes ----------------------------------------------------


@dataclass(frozen=True)
class KWindow:
    """Momentum window [A, k_max] with ``n_k`` Galerkin nodes; A may be -inf."""

    A: float
    k_max: float
    n_k: int

    def __post_init__(self):
        if not math.isfinite(self.k_max):
            raise InputError("k_max must be finite")
        if math.isfinite(self.A) and not self.k_max > self.A:
            raise InputError(f"k_max={self.k_max} must exceed A={self.A}")
        if math.isnan(self.A) or self.A == math.inf:
            raise InputError("A must be a real number or -inf")
        if int(self.n_k) != self.n_k or self.n_k < 16:
            raise InputError(f"n_k must be an integer >= 16, got {self.n_k}")

    def lower(self, b: float, depth: float = 0.0) -> float:
        """Effective lower end; for A = -inf, where E_D - b exceeds ``depth`` by a wide margin."""
        if math.isfinite(self.A):
            return self.A
        return -max(6.0 * math.sqrt(b), math.sqrt(max(depth, 0.0)) + 2.0 * math.sqrt(b))

    def nodes(self, b: float, depth: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
        lo = self.lower(b, depth)
        panels = max(2, math.ceil(self.n_k / _ORDER))
        return composite_gauss_legendre(np.linspace(lo, self.k_max, panels + 1), _ORDER)

    def refined(self) -> "KWindow":
        return KWindow(self.A, self.k_max, 2 * self.n_k)

    def widened(self) -> "KWindow":
        """Window with its upper extent beyond the bulk doubled; node density kept."""
        span = self.k_max - (self.A if math.isfinite(self.A) else 0.0)
        return KWindow(self.A, self.k_max + abs(span), 2 * self.n_k)


def k_max_for(lam: float, b: float, V: Potential2D | None = None) -> float:
    """Upper window edge at depth ``lam``, shifted by b times the right edge of V."""
    ell = abs(math.log(lam))
    base = math.sqrt(b * (ell + 4.0 * math.log(2.0 + ell)))
    reach = 0.0 if V is None else max(V.x_reach(), 0.0)
    return b * reach + base


def required_nodes(V: Potential2D, b: float, lo: float, hi: float) -> int:
    """Galerkin size for >= 8 nodes per oscillation period and per magnetic length."""
    span = hi - lo
    per_period = _NODES_PER_PERIOD * span * V.y_extent() / (2 * math.pi)
    per_length = 4.0 * span / math.sqrt(b)
    return int(math.ceil(max(per_period, per_length, 16)))


def default_window(V: Potential2D, b: float, lam: float, s: float = 1.0, A: float = -math.inf) -> KWindow:
    k_max = k_max_for(lam, b, V)
    lo = A if math.isfinite(A) else -max(6.0 * math.sqrt(b), math.sqrt(s * V.sup) + 2.0 * math.sqrt(b))
    n = required_nodes(V, b, lo, k_max)
    return KWindow(A, k_max, _ORDER * math.ceil(n / _ORDER))


def _check_resolution(V: Potential2D, b: float, window: KWindow, lo: float):
    need = required_nodes(V, b, lo, window.k_max)
    if window.n_k < need:
        raise InputError(
            f"k-window [{lo:.4g}, {window.k_max:.4g}] with n_k={window.n_k} under-resolves the "
            f"kernel oscillation; use n_k >= {_ORDER * math.ceil(need / _ORDER)}"
        )


# --- anti-Wick kernel --------------------------------------------------------


def antiwick_kernel(V: Potential2D, b: float, k: np.ndarray) -> np.ndarray:
    """Kernel samples V(k_i, k_j) (unweighted), Hermitian up to roundoff symmetrization."""
    k = np.asarray(k, dtype=float)
    n = k.size
    if V.is_zero():
        return np.zeros((n, n), dtype=complex)
    breaks = V.x_breaks(b)
    xq, wq = composite_gauss_legendre(breaks, _X_ORDER)
    keep = xq > 0
    xq, wq = xq[keep], wq[keep]
    phi = coherent_state(xq[None, :] - k[:, None] / b, b)
    if V.separable:
        f = V.x_profile(xq)
        F = (phi * (wq * f)) @ phi.T
        G = V.y_transform(k[:, None] - k[None, :])
        mat = V.coef * G * F / (2 * math.pi)
    else:
        # bilinear in x at the quadrature nodes, trapezoid in y:
        # sum_{x,y} w V e^{-iy(k-k')} phi phi = B B^H with separable phases
        ys = V.y_nodes
        wy = np.empty_like(ys)
        dy = np.diff(ys)
        wy[0], wy[-1] = 0.5 * dy[0], 0.5 * dy[-1]
        wy[1:-1] = 0.5 * (dy[:-1] + dy[1:])
        cols = np.empty((xq.size, ys.size))
        for j in range(ys.size):
            cols[:, j] = np.interp(xq, V.x_nodes, V.values[:, j], left=0.0, right=0.0)
        root = np.sqrt(wq[:, None] * wy[None, :] * cols)
        # B[k, (x, y)] = phi(x - k/b) e^{-iyk} sqrt(w V)
        B = (phi[:, :, None] * root[None, :, :]) * np.exp(-1j * k[:, None, None] * ys[None, None, :])
        B = B.reshape(n, -1)
        mat = (B @ B.conj().T) / (2 * math.pi)
    return 0.5 * (mat + mat.conj().T)


def antiwick_gram(
    V: Potential2D, b: float, window: KWindow, check: bool = True, depth: float | None = None
) -> HermitianGram:
    """Nystrom discretization of the anti-Wick operator on the window nodes.

    ``depth`` (default sup V) sets the lower end of a window with A = -inf.
    """
    depth = V.sup if depth is None else depth
    lo = window.lower(b, depth)
    if check:
        _check_resolution(V, b, window, lo)
    k, w = window.nodes(b, depth)
    return HermitianGram(antiwick_kernel(V, b, k), w, k)


# --- Dirichlet gaps at Galerkin nodes ---------------------------------------


def _params_for(b: float, k_max: float) -> ModelParams:
    params = ModelParams.for_field(b)
    need = k_max / b + 10.0 / math.sqrt(b)
    return params.with_x_max(need) if need > params.x_max else params


@functools.lru_cache(maxsize=65536)
def _cached_gap(params: ModelParams, k: float, atol: float) -> float:
    if k > 0 and dirichlet_gap_asymptotic(k, params.b) < 1e-280:
        return 0.0
    return dirichlet_gap(params, k, rtol=1e-8, atol=atol)


def _gaps(b: float, k: np.ndarray, band: BandTable | None, atol: float) -> np.ndarray:
    if band is not None:
        if band.kind is not BoundaryKind.DIRICHLET or band.params.b != b:
            raise InputError("band must be a Dirichlet table for the same b")
        if k.min() < band.k_nodes[0] - 1e-12 or k.max() > band.k_nodes[-1] + 1e-12:
            raise InputError(
                f"band covers [{band.k_nodes[0]}, {band.k_nodes[-1]}] but the window needs "
                f"[{k.min():.6g}, {k.max():.6g}]"
            )
        return band.gap_at(k)
    params = _params_for(b, float(k.max()))
    return np.array([_cached_gap(params, float(kk), atol) for kk in k])


# --- counting -----------------------------------------------------------------


def _effective_counts(V, b, lams, s, window, band, check=True) -> tuple[list[int], dict]:
    gram = antiwick_gram(V, b, window, check=check, depth=s * V.sup)
    k = gram.nodes
    gap = _gaps(b, k, band, atol=1e-3 * min(lams))
    mat = s * gram.weighted() - np.diag(gap)
    counts = count_above_many(mat, lams)
    info = {"window": (float(k[0]), float(k[-1])), "n_k": int(k.size)}
    return counts, info


def dirichlet_counts(
    V: Potential2D,
    b: float,
    lams: Sequence[float],
    s: float = 1.0,
    window: KWindow | None = None,
    band: BandTable | None = None,
    certify: bool = True,
) -> list[CountingResult]:
    """Counts of E_D - s V strictly below b - lam for every lam, sharing one matrix.

    The certificate repeats the computation with n_k doubled and with the
    window widened; any change raises NumericalError.
    """
    lams = [float(x) for x in lams]
    if not lams or min(lams) <= 0 or not all(math.isfinite(x) for x in lams):
        raise InputError("lambda values must be positive and finite")
    if not s > 0:
        raise InputError("s must be positive")
    if window is None:
        window = default_window(V, b, min(lams), s)
    counts, info = _effective_counts(V, b, lams, s, window, band)
    cert = {"window": info["window"], "n_k": info["n_k"]}
    if certify:
        finer, finfo = _effective_counts(V, b, lams, s, window.refined(), band, check=False)
        cert["refined"] = {"n_k": finfo["n_k"], "counts": finer}
        if finer != counts:
            raise NumericalError(f"counts {counts} change to {finer} when n_k is doubled")
        if band is None:
            wide, winfo = _effective_counts(V, b, lams, s, window.widened(), band, check=False)
            cert["widened"] = {"window": winfo["window"], "counts": wide}
            if wide != counts:
                raise NumericalError(f"counts {counts} change to {wide} when the window is widened")
    return [CountingResult(c, b - lam, dict(cert, lam=lam)) for c, lam in zip(counts, lams)]


def dirichlet_effective_count(
    V: Potential2D,
    b: float,
    lam: float,
    s: float = 1.0,
    window: KWindow | None = None,
    band: BandTable | None = None,
    certify: bool = True,
) -> CountingResult:
    """Number of eigenvalues of E_D - s V strictly below b - lam (Galerkin)."""
    return dirichlet_counts(V, b, [lam], s, window, band, certify)[0]


def sd_gram(
    V: Potential2D, b: float, lam: float, window: KWindow | None = None, band: BandTable | None = None
) -> HermitianGram:
    """Gram matrix of S_D* S_D: the anti-Wick kernel sandwiched by (E_D - b + lam)^{-1/2}."""
    if not lam > 0:
        raise InputError("lam must be positive")
    if window is None:
        window = default_window(V, b, lam)
    gram = antiwick_gram(V, b, window)
    d = 1.0 / np.sqrt(_gaps(b, gram.nodes, band, atol=1e-3 * lam) + lam)
    return HermitianGram(d[:, None] * gram.entries * d[None, :], gram.weights, gram.nodes)


# --- geometry -------------------------------------------------------------------


@dataclass(frozen=True)
class GeometrySpec:
    """Simple polygon in the closed half-plane x >= 0 (vertices in order)."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        try:
            v = np.asarray(self.vertices, dtype=float)
        except (TypeError, ValueError) as exc:
            raise InputError(f"polygon vertices are not numeric: {exc}") from None
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise InputError("polygon needs at least three (x, y) vertices")
        if not np.all(np.isfinite(v)):
            raise InputError("polygon is unbounded (non-finite vertex)")
        if abs(_shoelace(v)) <= 1e-14 * max(1.0, float(np.ptp(v)) ** 2):
            raise InputError("polygon has empty interior")
        if v[:, 0].min() < 0:
            raise InputError("polygon must lie in the half-plane x > 0")
        object.__setattr__(self, "vertices", tuple((float(a), float(c)) for a, c in v))

    @classmethod
    def rectangle(cls, x0: float, x1: float, y0: float, y1: float) -> "GeometrySpec":
        return cls(((x0, y0), (x1, y0), (x1, y1), (x0, y1)))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)

    def slices(self, x: float) -> list[tuple[float, float]]:
        """Intervals of the vertical line through x inside the polygon (x off the vertices)."""
        v = self.array
        a, c = v, np.roll(v, -1, axis=0)
        cross = []
        for (x1, y1), (x2, y2) in zip(a, c):
            if (x1 <= x) != (x2 <= x):
                cross.append(y1 + (x - x1) * (y2 - y1) / (x2 - x1))
        cross.sort()
        return [(cross[i], cross[i + 1]) for i in range(0, len(cross) - 1, 2)]


def _shoelace(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def longest_vertical_chord(omega: GeometrySpec) -> float:
    # chord lengths are piecewise linear in x with kinks only at vertex
    # abscissae, so the supremum is a one-sided limit at one of them (O(eps) bias)
    v = omega.array
    xs = np.unique(v[:, 0])
    eps = 1e-9 * max(1.0, float(np.ptp(v)))
    best = 0.0
    for i, x in enumerate(xs):
        probes = []
        if i > 0:
            probes.append(x - eps)
        if i < xs.size - 1:
            probes.append(x + eps)
        for p in probes:
            for lo, hi in omega.slices(p):
                best = max(best, hi - lo)
    return best


def kappa(s: float) -> float:
    """Length of {t > 0 : t ln t < s} for s >= 0, i.e. the root t >= 1 of t ln t = s."""
    if not s >= 0:
        raise InputError("kappa is defined for s >= 0")
    if s == 0:
        return 1.0
    return solve_increasing(lambda t: t * math.log(t), s, (1.0, max(math.e, s + 2.0)))


def _enclosing_radius(v: np.ndarray, xi: float) -> float:
    """min over eta of the largest distance from (xi, eta) to the vertices."""

    def radius(eta):
        return float(np.sqrt(((v[:, 0] - xi) ** 2 + (v[:, 1] - eta) ** 2).max()))

    lo, hi = float(v[:, 1].min()), float(v[:, 1].max())
    # convex in eta: ternary search
    for _ in range(200):
        if hi - lo < 1e-13 * max(1.0, abs(lo)):
            break
        m1 = lo + (hi - lo) / 3
        m2 = hi - (hi - lo) / 3
        if radius(m1) <= radius(m2):
            hi = m2
        else:
            lo = m1
    return radius(0.5 * (lo + hi))


def upper_geometric_constant(omega: GeometrySpec) -> float:
    """inf over disks B_R(xi + i eta) containing omega of R kappa(xi_+ / (e R)).

    For fixed xi the objective increases with R, so R is the smallest
    enclosing radius; xi < 0 never helps because omega lies in x >= 0.
    """
    v = omega.array

    def objective(xi):
        r = _enclosing_radius(v, xi)
        return r * kappa(max(xi, 0.0) / (math.e * r))

    hi = float(v[:, 0].max()) + float(np.ptp(v))
    grid = np.linspace(0.0, hi, 401)
    vals = np.array([objective(x) for x in grid])
    i = int(np.argmin(vals))
    a, c = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    # golden-section refinement around the best grid point
    g = 0.5 * (math.sqrt(5.0) - 1.0)
    x1, x2 = c - g * (c - a), a + g * (c - a)
    f1, f2 = objective(x1), objective(x2)
    for _ in range(100):
        if c - a < 1e-12:
            break
        if f1 <= f2:
            c, x2, f2 = x2, x1, f1
            x1 = c - g * (c - a)
            f1 = objective(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + g * (c - a)
            f2 = objective(x2)
    return min(float(vals[i]), f1, f2)


@dataclass(frozen=True)
class DirichletConstants:
    c_minus: float
    c_plus: float
    C_minus: float
    C_plus: float


def geometry_constants(omega_minus: GeometrySpec, omega_plus: GeometrySpec, b: float) -> DirichletConstants:
    if not b > 0:
        raise InputError("b must be positive")
    c_minus = longest_vertical_chord(omega_minus)
    c_plus = upper_geometric_constant(omega_plus)
    C_minus = math.sqrt(b) * c_minus / (2 * math.pi)
    C_plus = math.e * math.sqrt(b) * c_plus
    return DirichletConstants(float(c_minus), float(c_plus), float(C_minus), float(C_plus))


# --- model operators on I_+- and the sinc family --------------------------------


def _vertex_breaks(omega: GeometrySpec, width: float) -> np.ndarray:
    xs = np.unique(omega.array[:, 0])
    parts = [_panel_breaks(a, c, width)[:-1] for a, c in zip(xs[:-1], xs[1:])]
    return np.append(np.concatenate(parts), xs[-1])


def slice_integral(lo: float, hi: float, freq) -> np.ndarray:
    """int_lo^hi e^{i freq y} dy, stable at freq = 0."""
    freq = np.asarray(freq, dtype=float)
    length = hi - lo
    mid = 0.5 * (lo + hi)
    return length * np.sinc(freq * length / (2 * math.pi)) * np.exp(1j * freq * mid)


def gamma_gram(
    sign: str,
    delta: float,
    m: float,
    omega: GeometrySpec,
    b: float,
    n_k: int = 64,
    full_output: bool = False,
):
    """Gram matrix of the model operator on I_- = (delta, 1-delta) or I_+ = (0, 1+delta).

    Entries pi^{-1} m^2 sqrt(k k') int_Omega e^{-b x^2 + m x (k+k')} e^{i m y (k'-k)}.
    Exponents are handled in log space: the returned entries are scaled by
    exp(-log_scale); with ``full_output`` the pair (gram, log_scale) is returned,
    otherwise the scale is applied and must be representable.
    """
    if sign not in ("+", "-"):
        raise InputError("sign must be '+' or '-'")
    if not (0 < delta < 0.5 and m > 0 and b > 0):
        raise InputError("need 0 < delta < 1/2, m > 0 and b > 0")
    lo, hi = (delta, 1.0 - delta) if sign == "-" else (0.0, 1.0 + delta)
    panels = max(2, math.ceil(n_k / _ORDER))
    k, w = composite_gauss_legendre(np.linspace(lo, hi, panels + 1), _ORDER)
    v = omega.array
    slope = 0.0
    for (x1, y1), (x2, y2) in zip(v, np.roll(v, -1, axis=0)):
        if x2 != x1:
            slope = max(slope, abs((y2 - y1) / (x2 - x1)))
    rate = 2.0 * b * float(v[:, 0].max()) + 2.0 * m * hi * (1.0 + slope)
    xb = _vertex_breaks(omega, min(0.1, 1.0 / rate))
    xq, wx = composite_gauss_legendre(xb, _X_ORDER)
    ksum = k[:, None] + k[None, :]
    freq = m * (k[None, :] - k[:, None])
    expo = np.log(wx)[:, None, None] - b * xq[:, None, None] ** 2 + m * xq[:, None, None] * ksum[None]
    top = float(expo.max())
    acc = np.zeros((k.size, k.size), dtype=complex)
    for j, x in enumerate(xq):
        ys = sum((slice_integral(a, c, freq) for a, c in omega.slices(x)), np.zeros_like(acc))
        acc += np.exp(expo[j] - top) * ys
    pref = m * m / math.pi * np.sqrt(np.outer(k, k))
    entries = pref * acc
    entries = 0.5 * (entries + entries.conj().T)
    diag = np.abs(np.diag(entries))
    positive = diag[diag > 0]
    if positive.size and math.log(positive.max()) - math.log(positive.min()) > math.log(1e300):
        raise NumericalError("Gram dynamic range exceeds 1e300; ill-conditioned")
    if full_output:
        return HermitianGram(entries, w, k), top
    if top > 700:
        raise NumericalError(f"Gram entries overflow (log scale {top:.1f}); use full_output")
    return HermitianGram(entries * math.exp(top), w, k)


def sinc_matrix(I: tuple[float, float], L: float, m: float, n_k: int) -> np.ndarray:
    lo, hi = I
    panels = max(2, math.ceil(n_k / 10))
    k, w = composite_gauss_legendre(np.linspace(lo, hi, panels + 1), 10)
    d = k[:, None] - k[None, :]
    # sin(mL d)/(pi d) = (mL/pi) sinc(mL d / pi), limit mL/pi on the diagonal
    kern = (m * L / math.pi) * np.sinc(m * L * d / math.pi) * 2.0 * np.sqrt(np.outer(k, k)) / (k[:, None] + k[None, :])
    r = np.sqrt(w)
    mat = r[:, None] * kern * r[None, :]
    return 0.5 * (mat + mat.T)


def sinc_count(I: tuple[float, float], L: float, m: float, s: float, n_k: int | None = None) -> int:
    """n_+(s; g_I(m)) by Gauss-Legendre Nystrom on I."""
    lo, hi = float(I[0]), float(I[1])
    if not (0 < lo < hi and math.isfinite(hi)):
        raise InputError("I must be a bounded interval with 0 < lo < hi")
    if not (L > 0 and m > 0 and s > 0):
        raise InputError("L, m and s must be positive")
    need = 4.0 * m * L * (hi - lo)
    if n_k is None:
        n_k = max(64, 10 * math.ceil(1.5 * need / 10))
    elif n_k < need:
        raise InputError(f"n_k={n_k} under-resolves the sinc oscillation; use n_k >= {math.ceil(need)}")
    return count_above_many(sinc_matrix((lo, hi), L, m, n_k), [s])[0]


# --- pipeline -------------------------------------------------------------------


@dataclass(frozen=True)
class NdRow:
    lam: float
    count: int
    lower_envelope: float
    upper_envelope: float


@dataclass(frozen=True)
class NdTable:
    rows: list[NdRow]
    constants: DirichletConstants
    slope: float | None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["lambda", "count", "lower_envelope", "upper_envelope"])
            for r in self.rows:
                w.writerow([f"{r.lam:.17g}", r.count, f"{r.lower_envelope:.17g}", f"{r.upper_envelope:.17g}"])


def fit_loglog_slope(lams: Sequence[float], counts: Sequence[int]) -> float | None:
    """Least-squares slope of ln(count) against ln|ln lam| (None if undefined)."""
    pts = [(math.log(abs(math.log(l))), math.log(c)) for l, c in zip(lams, counts) if c > 0 and l < 1]
    if len(pts) < 2 or len({p[0] for p in pts}) < 2:
        return None
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])


def nd_pipeline(
    V: Potential2D,
    b: float,
    lams: Sequence[float],
    omega_minus: GeometrySpec | None = None,
    omega_plus: GeometrySpec | None = None,
    window: KWindow | None = None,
    band: BandTable | None = None,
) -> NdTable:
    """Counts at s = 1 next to the envelopes C_-+ |ln lam|^{1/2}."""
    if omega_minus is None or omega_plus is None:
        if not isinstance(V, RectangleIndicator):
            raise InputError("sandwiching polygons are required unless V is a rectangle indicator")
        rect = GeometrySpec.rectangle(V.x0, V.x1, V.y0, V.y1)
        omega_minus = omega_minus or rect
        omega_plus = omega_plus or rect
    const = geometry_constants(omega_minus, omega_plus, b)
    results = dirichlet_counts(V, b, lams, 1.0, window, band)
    rows = []
    for lam, res in zip(lams, results):
        root = math.sqrt(abs(math.log(lam)))
        rows.append(NdRow(float(lam), res.count, const.C_minus * root, const.C_plus * root))
    slope = fit_loglog_slope([r.lam for r in rows], [r.count for r in rows])
    return NdTable(rows, const, slope)
