"""Effective Neumann machinery: the one-dimensional Hamiltonian -mu d^2/dy^2 - v.

The effective potential v(y) = int V(x, y) psi_N(x; k*)^2 dx is sampled on
a y-window and may carry a power-tail model beyond it.  Counts use a
finite-difference discretization on a graded grid whose spacing follows the
local wavelength, so long-range tails cost logarithmically many nodes.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import CubicSpline, PchipInterpolator

from spectra.bands import BandTable, BoundaryKind, ModelParams, NeumannMinimum, eigenfunction, find_neumann_minimum
from spectra.dirichlet import Potential2D, SampledPotential
from spectra.errors import InputError, NumericalError
from spectra.numerics import (
    CountingResult,
    HermitianGram,
    Tridiagonal,
    composite_gauss_legendre,
    count_above_many,
    euler_beta,
    sturm_count_below,
)

_Y_CAP = 1e9
_ETA = 0.05
_MAX_HALVINGS = 6


@dataclass(frozen=True)
class DecayProfile:
    """|y|^alpha v(y) -> omega_-+ as y -> -+infinity."""

    alpha: float
    omega_minus: float
    omega_plus: float

    def __post_init__(self):
        if not (0 < self.alpha <= 2):
            raise InputError(f"alpha must lie in (0, 2], got {self.alpha}")
        for om in (self.omega_minus, self.omega_plus):
            if not (math.isfinite(om) and om >= 0):
                raise InputError("omegas must be finite and >= 0")


@dataclass(frozen=True)
class EffectivePotential1D:
    """Samples of v on increasing ``y_nodes`` plus an optional tail model.

    If ``func`` is given it is used everywhere and the nodes only mark the
    window where v has structure.
    """

    y_nodes: np.ndarray
    values: np.ndarray
    tail_model: DecayProfile | None = None
    func: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        y = np.asarray(self.y_nodes, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if y.ndim != 1 or y.size < 2 or v.shape != y.shape:
            raise InputError("y_nodes and values must be 1-D of equal length >= 2")
        if np.any(np.diff(y) <= 0):
            raise InputError("y_nodes must be strictly increasing")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise InputError("effective potential values must be finite and >= 0")
        object.__setattr__(self, "y_nodes", y)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, func, window: float = 50.0, n: int = 2001, tail_model: DecayProfile | None = None):
        y = np.linspace(-window, window, n)
        return cls(y, np.asarray(func(y), dtype=float), tail_model, func)

    @property
    def window(self) -> tuple[float, float]:
        return float(self.y_nodes[0]), float(self.y_nodes[-1])

    @property
    def sup(self) -> float:
        return float(self.values.max())

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.func is not None:
            return np.asarray(self.func(y), dtype=float)
        lo, hi = self.window
        inside = PchipInterpolator(self.y_nodes, self.values, extrapolate=False)(np.clip(y, lo, hi))
        out = np.where((y >= lo) & (y <= hi), inside, 0.0)
        if self.tail_model is not None:
            t = self.tail_model
            with np.errstate(divide="ignore"):
                left = t.omega_minus * np.abs(y) ** (-t.alpha)
                right = t.omega_plus * np.abs(y) ** (-t.alpha)
            out = np.where(y < lo, left, out)
            out = np.where(y > hi, right, out)
        return out

    def is_zero(self) -> bool:
        if self.func is None and self.tail_model is None:
            return not np.any(self.values > 0)
        t = self.tail_model
        return not np.any(self.values > 0) and (t is None or t.omega_minus == t.omega_plus == 0)


# --- effective potential -----------------------------------------------------


def effective_potential(
    V: Potential2D,
    minimum: NeumannMinimum,
    params: ModelParams,
    y_nodes,
    band: BandTable | None = None,
    tail_model: DecayProfile | None = None,
) -> EffectivePotential1D:
    """v(y) = int V(x, y) psi_N(x; k*)^2 dx at every node.

    psi_N is recomputed at k* on an eightfold refined grid; ``band`` only
    supplies the model parameters when given.
    """
    if band is not None:
        if band.kind is not BoundaryKind.NEUMANN:
            raise InputError("band must be the Neumann table")
        params = band.params
    y = np.asarray(y_nodes, dtype=float)
    b = params.b
    if isinstance(V, SampledPotential):
        reach = minimum.k_star / b + 6.0 / math.sqrt(b)
        if V.x_nodes[0] > 1e-12 or V.x_nodes[-1] < min(reach, params.x_max):
            raise InputError(
                f"sampled x-range [{V.x_nodes[0]}, {V.x_nodes[-1]}] does not cover the eigenfunction "
                f"support [0, {reach:.3g}]"
            )
    n = 8 * params.n_x
    psi = eigenfunction(params, BoundaryKind.NEUMANN, minimum.k_star, n)
    spline = CubicSpline(np.linspace(0.0, params.x_max, n + 1), psi)
    # renormalize with the same quadrature used below
    xg, wg = composite_gauss_legendre(np.linspace(0.0, params.x_max, n // 8 + 1), 10)
    norm = float(np.dot(wg, spline(xg) ** 2))
    breaks = np.clip(V.x_breaks(b), 0.0, params.x_max)
    breaks = np.unique(breaks)
    if breaks.size < 2:
        return EffectivePotential1D(y, np.zeros_like(y), tail_model)
    xq, wq = composite_gauss_legendre(breaks, 10)
    weight = wq * spline(xq) ** 2 / norm
    vals = weight @ V(xq[:, None], y[None, :])
    return EffectivePotential1D(y, np.maximum(vals, 0.0), tail_model)


def tail_mass(params: ModelParams, k_star: float, X: float) -> float:
    """int_X^{x_max} psi_N(x; k*)^2 dx (unit norm on (0, x_max))."""
    n = 8 * params.n_x
    psi = eigenfunction(params, BoundaryKind.NEUMANN, k_star, n)
    spline = CubicSpline(np.linspace(0.0, params.x_max, n + 1), psi)
    xg, wg = composite_gauss_legendre(np.linspace(0.0, params.x_max, n // 8 + 1), 10)
    norm = float(np.dot(wg, spline(xg) ** 2))
    if X >= params.x_max:
        return 0.0
    xt, wt = composite_gauss_legendre(np.linspace(X, params.x_max, 200), 10)
    return float(np.dot(wt, spline(xt) ** 2)) / norm


# --- 1D counting ----------------------------------------------------------------


def _truncation(v: EffectivePotential1D, mu: float, lam: float, s: float) -> tuple[float, float]:
    pad = 2.0 * math.sqrt(mu / lam)
    lo, hi = v.window
    has_tail = v.func is not None or v.tail_model is not None
    edges = []
    for sign, start in ((-1.0, -lo), (1.0, hi)):
        y = max(start, 1.0)
        if not has_tail:
            if s * float(v(sign * start)) >= lam / 4:
                raise InputError(
                    f"s*v at the window edge {sign * start:.4g} is not below lambda/4 and no tail model is set"
                )
        else:
            while s * float(v(sign * y)) >= lam / 4 or s * float(v(sign * 2 * y)) >= lam / 4:
                y *= 2.0
                if y > _Y_CAP:
                    raise InputError(
                        f"potential decays too slowly: s*v(y) >= lambda/4 beyond |y| = {_Y_CAP:.0e}"
                    )
        edges.append(y + pad)
    return edges[0], edges[1]


def _aux_grid(lo: float, hi: float, m: int = 20001) -> np.ndarray:
    # nodes dense near y = 0 and geometric outward
    def side(Y):
        return np.expm1(np.linspace(0.0, math.log1p(Y), m))

    return np.unique(np.concatenate([-side(-lo)[::-1], side(hi)]))


def graded_grid(v: EffectivePotential1D, mu: float, lam: float, s: float, lo: float, hi: float, eta: float):
    """Nodes with spacing min(eta sqrt(mu / (s v + lam)), eta (1 + |y|))."""
    aux = _aux_grid(lo, hi)
    h = np.minimum(eta * np.sqrt(mu / (s * v(aux) + lam)), eta * (1.0 + np.abs(aux)))
    density = 1.0 / h
    tau = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(aux))])
    n = max(8, int(math.ceil(tau[-1])))
    return np.interp(np.linspace(0.0, tau[-1], n + 1), tau, aux)


def schrodinger_matrix(v: EffectivePotential1D, mu: float, s: float, nodes: np.ndarray) -> Tridiagonal:
    """Symmetric form M^{-1/2} (K - s M v) M^{-1/2} with Dirichlet ends."""
    h = np.diff(nodes)
    mass = 0.5 * (h[:-1] + h[1:])
    inner = nodes[1:-1]
    diag = mu * (1.0 / h[:-1] + 1.0 / h[1:]) / mass - s * v(inner)
    off = -mu / h[1:-1] / np.sqrt(mass[:-1] * mass[1:])
    return Tridiagonal(diag, off, float(h.min()))


def count_1d(v: EffectivePotential1D, mu: float, lam: float, s: float = 1.0, eta: float = _ETA) -> CountingResult:
    """Eigenvalues of -mu d^2/dy^2 - s v strictly below -lam.

    Grid parameter eta is halved until three successive counts agree.
    """
    if not (lam > 0 and math.isfinite(lam)):
        raise InputError("lambda must be positive")
    if not (mu > 0 and s > 0):
        raise InputError("mu and s must be positive")
    if v.is_zero():
        return CountingResult(0, -lam, {"Y": (0.0, 0.0), "counts": [0]})
    ym, yp = _truncation(v, mu, lam, s)
    counts, sizes, etas = [], [], []
    for j in range(_MAX_HALVINGS + 1):
        e = eta / 2**j
        nodes = graded_grid(v, mu, lam, s, -ym, yp, e)
        T = schrodinger_matrix(v, mu, s, nodes)
        counts.append(sturm_count_below(T, -lam))
        sizes.append(int(nodes.size))
        etas.append(e)
        if len(counts) >= 3 and counts[-1] == counts[-2] == counts[-3]:
            cert = {"Y": (-ym, yp), "eta": etas, "nodes": sizes, "counts": counts}
            return CountingResult(counts[-1], -lam, cert)
    raise NumericalError(f"count did not stabilize under grid refinement: {counts}")


def semiclassical_count(v: EffectivePotential1D, mu: float, lam: float) -> float:
    """(1 / (pi sqrt(mu))) int (v - lam)_+^{1/2} dy with the tail model used analytically."""
    if not lam > 0:
        raise InputError("lambda must be positive")
    lo, hi = v.window

    def integrand(y):
        return math.sqrt(max(float(v(y)) - lam, 0.0))

    total = 0.0
    for a, c in _pieces(lo, hi, _turning_points(v, lo, hi, lam)):
        total += integrate.quad(integrand, a, c, limit=500, epsabs=1e-12, epsrel=1e-8)[0]
    t = v.tail_model
    for edge, omega in ((lo, t and t.omega_minus), (hi, t and t.omega_plus)):
        if t is not None:
            total += _power_tail_integral(omega, t.alpha, abs(edge), lam)
        elif v.func is not None:
            total += _func_tail_integral(v, edge, lam)
        elif float(v(edge)) > lam:
            raise InputError("integrand unconverged at the window edge and no tail model is set")
    return total / (math.pi * math.sqrt(mu))


def _turning_points(v: EffectivePotential1D, lo: float, hi: float, lam: float) -> list[float]:
    # roots of v - lam, so quad never straddles the square-root kink
    y = np.union1d(np.linspace(lo, hi, 4001), v.y_nodes[(v.y_nodes >= lo) & (v.y_nodes <= hi)])
    g = np.asarray(v(y), dtype=float) - lam
    idx = np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]
    return [optimize.brentq(lambda t: float(v(t)) - lam, y[i], y[i + 1], xtol=1e-14) for i in idx]


def _pieces(lo: float, hi: float, extra=()) -> list[tuple[float, float]]:
    # split at 0 and geometrically outward so quad sees every scale
    pts = {lo, hi, *extra}
    for sign, end in ((-1.0, -lo), (1.0, hi)):
        r = 1.0
        while r < end:
            pts.add(sign * r)
            r *= 2.0
    if lo < 0 < hi:
        pts.add(0.0)
    pts = sorted(p for p in pts if lo <= p <= hi)
    return list(zip(pts[:-1], pts[1:]))


def _power_tail_integral(omega: float, alpha: float, W: float, lam: float) -> float:
    """int_W^inf (omega y^{-alpha} - lam)_+^{1/2} dy in closed-range form."""
    if omega <= 0:
        return 0.0
    Y = (omega / lam) ** (1.0 / alpha)
    if Y <= W:
        return 0.0
    # y = Y t: sqrt(lam) Y int_{W/Y}^1 (t^{-alpha} - 1)^{1/2} dt; the root at t = 1
    # is taken by the algebraic weight (1 - t)^{1/2}
    def f(t):
        return math.sqrt((t ** (-alpha) - 1.0) / (1.0 - t)) if t < 1.0 else math.sqrt(alpha)

    val = integrate.quad(f, W / Y, 1.0, weight="alg", wvar=(0.0, 0.5), limit=200)[0]
    return math.sqrt(lam) * Y * val


def _func_tail_integral(v: EffectivePotential1D, edge: float, lam: float) -> float:
    sign = 1.0 if edge > 0 else -1.0
    y = abs(edge)
    total = 0.0
    while float(v(sign * y)) > lam:
        nxt = 2.0 * y
        total += integrate.quad(lambda t: math.sqrt(max(float(v(sign * t)) - lam, 0.0)), y, nxt, limit=200)[0]
        y = nxt
        if y > _Y_CAP:
            raise InputError("potential decays too slowly for the semiclassical integral")
    return total


# --- laws -------------------------------------------------------------------------


@dataclass(frozen=True)
class AsymptoticLaw:
    """count ~ coefficient * lam^{-exponent} (power) or coefficient * |ln lam| (log)."""

    kind: str
    exponent: float
    coefficient: float

    def predict(self, lam: float) -> float:
        if self.kind == "log":
            return self.coefficient * abs(math.log(lam))
        return self.coefficient * lam ** (-self.exponent)


def asymptotic_law(profile: DecayProfile, mu: float) -> AsymptoticLaw:
    if not mu > 0:
        raise InputError("mu must be positive")
    a = profile.alpha
    if a < 2:
        e = 1.0 / a - 0.5
        c = euler_beta(1.5, e) / (math.pi * a * math.sqrt(mu))
        c *= profile.omega_minus ** (1.0 / a) + profile.omega_plus ** (1.0 / a)
        return AsymptoticLaw("power", e, c)
    c = sum(math.sqrt(max(om / mu - 0.25, 0.0)) for om in (profile.omega_minus, profile.omega_plus))
    return AsymptoticLaw("log", 0.0, c / (2 * math.pi))


# --- Birman-Schwinger Gram ----------------------------------------------------------


def fourier_transform(v: EffectivePotential1D, q) -> np.ndarray:
    """v_hat(q) = int v(y) e^{iqy} dy by Fourier quadrature on each half-line."""
    q = np.atleast_1d(np.asarray(q, dtype=float))

    def even(y):
        return 0.5 * (float(v(y)) + float(v(-y)))

    def odd(y):
        return 0.5 * (float(v(y)) - float(v(-y)))

    lo, hi = v.window
    span = max(-lo, hi, 1.0)
    sym = v.func is None and np.allclose(v.y_nodes, -v.y_nodes[::-1]) and np.allclose(v.values, v.values[::-1])
    if v.tail_model is not None and v.tail_model.omega_minus != v.tail_model.omega_plus:
        sym = False
    if v.func is not None:
        probe = np.linspace(0.0, span, 257)
        sym = np.allclose(v(probe), v(-probe), rtol=1e-13, atol=0.0)
    out = np.empty(q.size, dtype=complex)
    for i, qq in enumerate(q):
        re = 2.0 * _half_line(even, qq, "cos", span)
        im = 0.0 if sym else 2.0 * _half_line(odd, qq, "sin", span)
        out[i] = re + 1j * im
    return out


def _half_line(f, q: float, kind: str, span: float) -> float:
    if q == 0.0:
        if kind == "sin":
            return 0.0
        val, err = integrate.quad(f, 0.0, span, limit=400)
        tail, err2 = integrate.quad(f, span, np.inf, limit=400)
        if not math.isfinite(tail) or err2 > 1e-6 * max(abs(val + tail), 1e-300):
            raise InputError("v is not integrable; its Fourier transform is undefined at 0")
        return val + tail
    a = abs(q)
    sgn = -1.0 if (kind == "sin" and q < 0) else 1.0
    near = integrate.quad(f, 0.0, span, weight=kind, wvar=a, limit=800)[0]
    far = integrate.quad(f, span, np.inf, weight=kind, wvar=a, limlst=100)[0]
    return sgn * (near + far)


def default_k_window(mu: float, lam: float, K: float = 200.0) -> np.ndarray:
    """Panel breaks on [-K, K]/sqrt(mu), geometric from sqrt(lam/mu) outward."""
    scale = math.sqrt(lam / mu)
    edge = K / math.sqrt(mu)
    r = [0.0]
    x = 0.25 * scale
    while x < edge:
        r.append(x)
        x *= 1.5
    r.append(edge)
    r = np.array(r)
    return np.concatenate([-r[::-1], r[1:]])


def sn_gram(v: EffectivePotential1D, mu: float, lam: float, k_breaks=None, order: int = 8) -> HermitianGram:
    """Gram of S_N* S_N on Gauss-Legendre k-nodes.

    v_hat is tabulated on a graded |q| grid by Fourier quadrature and
    interpolated (spline in |q|, parity restored).
    """
    if not (lam > 0 and mu > 0):
        raise InputError("lambda and mu must be positive")
    if k_breaks is None:
        k_breaks = default_k_window(mu, lam)
    k, w = composite_gauss_legendre(np.asarray(k_breaks, dtype=float), order)
    d = (mu * k * k + lam) ** -0.5
    if v.is_zero():
        return HermitianGram(np.zeros((k.size, k.size)), w, k)
    diff = k[None, :] - k[:, None]
    qmax = float(np.abs(diff).max())
    table_q = np.unique(np.concatenate([[0.0], np.geomspace(1e-4, qmax, 400), np.linspace(0.0, qmax, 801)]))
    vals = fourier_transform(v, table_q)
    re = CubicSpline(table_q, vals.real)
    im = CubicSpline(table_q, vals.imag)
    a = np.abs(diff)
    vhat = re(a) + 1j * np.sign(diff) * im(a)
    entries = d[:, None] * vhat * d[None, :] / (2 * math.pi)
    if np.all(vals.imag == 0):
        entries = entries.real
    entries = 0.5 * (entries + entries.conj().T)
    return HermitianGram(entries, w, k)


# --- pipeline -----------------------------------------------------------------------


@dataclass(frozen=True)
class TailFit:
    alpha: float
    omega_minus: float
    omega_plus: float
    r2: float

    def to_json(self) -> str:
        return json.dumps(
            {"alpha": self.alpha, "omega_minus": self.omega_minus, "omega_plus": self.omega_plus, "r2": self.r2},
            sort_keys=True,
        )


def fit_tail(y: np.ndarray, v: np.ndarray, fraction: float = 0.3) -> TailFit:
    """Least squares of ln v against ln|y| on the outer ``fraction`` of each side."""
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    alphas, omegas, r2s = [], [], []
    for side in (y < 0, y > 0):
        ys, vs = np.abs(y[side]), v[side]
        if ys.size == 0:
            raise InputError("tail fit needs samples on both sides of y = 0")
        sel = (ys >= (1.0 - fraction) * ys.max()) & (vs > 0)
        if sel.sum() < 3:
            raise InputError("too few positive samples in the outer window for a tail fit")
        X, Y = np.log(ys[sel]), np.log(vs[sel])
        slope, icpt = np.polyfit(X, Y, 1)
        resid = Y - (slope * X + icpt)
        ss = float(np.sum((Y - Y.mean()) ** 2))
        r2s.append(1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 0.0)
        alphas.append(-slope)
        omegas.append(math.exp(icpt))
    alpha = 0.5 * (alphas[0] + alphas[1])
    return TailFit(float(alpha), float(omegas[0]), float(omegas[1]), float(min(r2s)))


@dataclass(frozen=True)
class NnRow:
    lam: float
    count: int
    semiclassical: float
    predicted: float | None


@dataclass(frozen=True)
class NnTable:
    rows: list[NnRow]
    minimum: NeumannMinimum
    tail: TailFit
    law: AsymptoticLaw | None
    potential: EffectivePotential1D

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            header = ["lambda", "count", "semiclassical"] + (["predicted_law"] if self.law else [])
            w.writerow(header)
            for r in self.rows:
                row = [f"{r.lam:.17g}", r.count, f"{r.semiclassical:.17g}"]
                if self.law:
                    row.append(f"{r.predicted:.17g}")
                w.writerow(row)


# fitted exponents this close to 2 are read as the inverse-square case
_ALPHA_SNAP = 0.05


def nn_pipeline(
    V: Potential2D,
    b: float,
    lams: Sequence[float],
    y_window: float = 200.0,
    n_y: int = 4001,
    params: ModelParams | None = None,
) -> NnTable:
    """Neumann minimum, effective potential, tail fit, counts and the predicted law."""
    lams = [float(x) for x in lams]
    if not lams or min(lams) <= 0:
        raise InputError("lambda values must be positive")
    params = params or ModelParams.for_field(b)
    minimum = find_neumann_minimum(params)
    # sinh-graded nodes: fine near 0, coarse in the tails
    t = np.linspace(-1.0, 1.0, n_y)
    c = math.asinh(y_window)
    y = np.sinh(c * t)
    y[0], y[-1] = -y_window, y_window
    raw = effective_potential(V, minimum, params, y)
    tail = fit_tail(raw.y_nodes, raw.values)
    law = None
    profile = None
    alpha = 2.0 if abs(tail.alpha - 2.0) < _ALPHA_SNAP else tail.alpha
    if tail.r2 >= 0.99 and 0 < alpha <= 2:
        profile = DecayProfile(alpha, tail.omega_minus, tail.omega_plus)
        law = asymptotic_law(profile, minimum.mu)
    v = EffectivePotential1D(raw.y_nodes, raw.values, profile)
    rows = []
    for lam in lams:
        cnt = count_1d(v, minimum.mu, lam).count
        semi = semiclassical_count(v, minimum.mu, lam) if profile or v(v.window[0]) <= lam else float("nan")
        rows.append(NnRow(lam, cnt, semi, law.predict(lam) if law else None))
    return NnTable(rows, minimum, tail, law, v)
