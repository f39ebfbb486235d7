"""Fiber operators -d^2/dx^2 + (bx - k)^2 on the half-line and their band functions.

Discretization is second-order central differences on a uniform grid over
(0, x_max), Dirichlet at x_max.  Band values are Richardson-extrapolated over
grid halvings.  For the Dirichlet band the gap E_D(k) - b is obtained from
the discrete Green identity

    E_h(k) - b_h = phi_0 u_1 / (h^2 <phi, u>),

where u is the Dirichlet eigenvector and phi the ground state of the same
stencil on a grid extended to the left.  All factors are positive, so the gap
keeps full relative precision even when it is far below machine epsilon
relative to b.
"""

from __future__ import annotations

import csv
import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from spectra.errors import InputError, NumericalError
from spectra.numerics import Tridiagonal, _twisted_vector, eigenvalue_by_index, lowest_eigenpair

# Bisection accuracy for single-grid eigenvalues; Richardson tolerances sit
# well above it.
_EIG_TOL = 1e-15
# Gaussian tails beyond this many magnetic lengths are below double precision.
_TAIL_LENGTHS = 10.0


class BoundaryKind(enum.Enum):
    DIRICHLET = "Dirichlet"
    NEUMANN = "Neumann"

    @classmethod
    def parse(cls, text) -> "BoundaryKind":
        if isinstance(text, cls):
            return text
        for member in cls:
            if str(text).strip().lower() in (member.value.lower(), member.value[0].lower()):
                return member
        raise InputError(f"unknown boundary kind {text!r}")


@dataclass(frozen=True)
class ModelParams:
    """Field strength ``b``, truncation length ``x_max`` and base grid size ``n_x``."""

    b: float = 1.0
    x_max: float = 16.0
    n_x: int = 400

    def __post_init__(self):
        if not (math.isfinite(self.b) and self.b > 0):
            raise InputError(f"b must be positive, got {self.b}")
        if not self.x_max * math.sqrt(self.b) >= 8:
            raise InputError(f"x_max*sqrt(b) must be >= 8, got {self.x_max * math.sqrt(self.b)}")
        if int(self.n_x) != self.n_x or self.n_x < 200:
            raise InputError(f"n_x must be an integer >= 200, got {self.n_x}")

    @classmethod
    def for_field(cls, b: float, x_max_scaled: float = 16.0, n_x: int = 400) -> "ModelParams":
        """Parameters with ``x_max = x_max_scaled / sqrt(b)``; exact scaling across ``b``."""
        return cls(b=b, x_max=x_max_scaled / math.sqrt(b), n_x=n_x)

    def with_x_max(self, x_max: float) -> "ModelParams":
        # keep the grid spacing
        n = int(math.ceil(self.n_x * x_max / self.x_max))
        return ModelParams(self.b, x_max, n)

    def step(self, n: int | None = None) -> float:
        return self.x_max / (n or self.n_x)

    def x_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.x_max, self.n_x + 1)


def _check_k(params: ModelParams, k: float):
    if not math.isfinite(k):
        raise InputError(f"k must be finite, got {k}")
    center = k / params.b
    if center > params.x_max - 8.0 / math.sqrt(params.b):
        raise InputError(
            f"k={k} puts the oscillator center at {center:.3g}, too close to x_max={params.x_max}; "
            "increase x_max"
        )


def assemble_fiber(params: ModelParams, kind: BoundaryKind, k: float, n: int | None = None) -> Tridiagonal:
    """Symmetric tridiagonal discretization of h_D(k) or h_N(k) with ``n`` cells.

    Dirichlet unknowns are x_1..x_{n-1}.  Neumann unknowns are x_0..x_{n-1};
    the ghost-point row (2u_0 - 2u_1)/h^2 is symmetrized by scaling u_0 with
    1/sqrt(2), which turns the plain Euclidean norm into the trapezoid norm.
    """
    kind = BoundaryKind.parse(kind)
    n = int(n or params.n_x)
    h = params.x_max / n
    inv = 1.0 / (h * h)
    if kind is BoundaryKind.DIRICHLET:
        x = np.arange(1, n) * h
        off = np.full(n - 2, -inv)
    else:
        x = np.arange(0, n) * h
        off = np.full(n - 1, -inv)
        off[0] *= math.sqrt(2.0)
    diag = 2.0 * inv + (params.b * x - k) ** 2
    return Tridiagonal(diag, off, h)


def _grid_function(params: ModelParams, kind: BoundaryKind, n: int, z: np.ndarray) -> np.ndarray:
    """Map an eigenvector of ``assemble_fiber`` to samples on x_0..x_n (unit trapezoid norm)."""
    u = np.zeros(n + 1)
    if kind is BoundaryKind.DIRICHLET:
        u[1:n] = z
    else:
        u[:n] = z
        u[0] *= math.sqrt(2.0)
    return u


def trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n + 1, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _richardson(values: list[float]) -> list[list[float]]:
    table = [list(values)]
    for j in range(1, len(values)):
        prev = table[-1]
        f = 4.0**j
        table.append([(f * prev[i + 1] - prev[i]) / (f - 1.0) for i in range(len(prev) - 1)])
    return table


@dataclass(frozen=True)
class BandCertificate:
    grids: tuple[int, ...]
    extrapolants: tuple[float, ...]
    change: float


def _extrapolate(sample, params: ModelParams, tol: float, rtol: float, max_levels: int):
    values: list[float] = []
    grids: list[int] = []
    diag: list[float] = []
    for level in range(max_levels):
        n = params.n_x * 2**level
        grids.append(n)
        values.append(sample(n))
        best = _richardson(values)[-1][-1]
        diag.append(best)
        if level >= 2:
            change = abs(diag[-1] - diag[-2])
            if change < max(tol, rtol * abs(best)):
                return best, BandCertificate(tuple(grids), tuple(diag), change)
    raise NumericalError(
        f"Richardson extrapolation did not reach tol={tol:g} within {max_levels} levels "
        f"(grids {grids}, last change {abs(diag[-1] - diag[-2]):.3e})"
    )


def _energy_form(u: np.ndarray, h: float, pot: np.ndarray) -> float:
    """Rayleigh quotient of a grid function u_0..u_n in difference form.

    Written as a sum of squares, so it carries no cancellation of the
    2/h^2 diagonal; with an accurate eigenvector the error is quadratic.
    """
    w = trapezoid_weights(u.size - 1, h)
    kinetic = float(np.sum(np.diff(u) ** 2)) / h
    return (kinetic + float(np.sum(w * pot * u * u))) / float(np.sum(w * u * u))


def fiber_eigenvalue(params: ModelParams, kind: BoundaryKind, k: float, n: int) -> float:
    """Lowest eigenvalue of the n-cell discretization (Rayleigh-refined bisection)."""
    kind = BoundaryKind.parse(kind)
    T = assemble_fiber(params, kind, k, n)
    lam = eigenvalue_by_index(T, 0, _EIG_TOL)
    z = _twisted_vector(T.diag, T.offdiag, lam)
    u = _grid_function(params, kind, n, z)
    x = np.arange(n + 1) * T.step
    return _energy_form(u, T.step, (params.b * x - k) ** 2)


def _full_line_ground_state(params: ModelParams, k: float, n: int):
    """Ground state of the same stencil on a grid extended to the left of x=0.

    Returns (eigenvalue, vector on x_1..x_{n-1}, value at x_0), with the
    vector normalized over the whole extended grid in the plain 2-norm.
    """
    b = params.b
    h = params.x_max / n
    m = int(math.ceil((max(0.0, -k / b) + _TAIL_LENGTHS / math.sqrt(b)) / h))
    x = np.arange(-m + 1, n) * h
    inv = 1.0 / (h * h)
    T = Tridiagonal(2.0 * inv + (b * x - k) ** 2, np.full(x.size - 1, -inv), h)
    lam = eigenvalue_by_index(T, 0, _EIG_TOL)
    z = _twisted_vector(T.diag, T.offdiag, lam)
    z /= np.linalg.norm(z)
    if z[np.argmax(np.abs(z))] < 0:
        z = -z
    i0 = m - 1
    return lam, z[i0 + 1 :], z[i0]


def _discrete_gap(params: ModelParams, k: float, n: int) -> float:
    T = assemble_fiber(params, BoundaryKind.DIRICHLET, k, n)
    lam = eigenvalue_by_index(T, 0, _EIG_TOL)
    u = _twisted_vector(T.diag, T.offdiag, lam)
    if u[np.argmax(np.abs(u))] < 0:
        u = -u
    _, phi, phi0 = _full_line_ground_state(params, k, n)
    h = T.step
    return phi0 * u[0] / (h * h * float(np.dot(phi, u)))


def dirichlet_gap(
    params: ModelParams, k: float, rtol: float = 1e-9, atol: float = 0.0, full_output: bool = False
):
    """E_D(k) - b to relative accuracy ``rtol`` (or absolute ``atol``, whichever is looser)."""
    _check_k(params, k)
    if k <= 0:
        sample = lambda n: fiber_eigenvalue(params, BoundaryKind.DIRICHLET, k, n) - params.b  # noqa: E731
    else:
        sample = lambda n: _discrete_gap(params, k, n)  # noqa: E731
    gap, cert = _extrapolate(sample, params, atol, rtol, max_levels=6)
    if not (gap > 0 and math.isfinite(gap)):
        raise NumericalError(f"Dirichlet gap at k={k} is not positive ({gap:.3e}); below the noise floor")
    return (gap, cert) if full_output else gap


def band_value(
    params: ModelParams, kind: BoundaryKind, k: float, tol: float = 1e-10, full_output: bool = False
):
    """Lowest eigenvalue E_l(k) of the fiber operator, Richardson-extrapolated to ``tol``."""
    kind = BoundaryKind.parse(kind)
    if not tol > 0:
        raise InputError("tol must be positive")
    _check_k(params, k)
    if kind is BoundaryKind.DIRICHLET and k > 0:
        gap, cert = dirichlet_gap(params, k, atol=tol, full_output=True)
        value = params.b + gap
        return (value, cert) if full_output else value

    def sample(n):
        return fiber_eigenvalue(params, kind, k, n)

    value, cert = _extrapolate(sample, params, tol, 0.0, max_levels=6)
    return (value, cert) if full_output else value


def eigenfunction(params: ModelParams, kind: BoundaryKind, k: float, n: int | None = None) -> np.ndarray:
    """psi_l(.; k) sampled on x_0..x_n, unit in the trapezoid norm, positive bulk."""
    kind = BoundaryKind.parse(kind)
    n = int(n or params.n_x)
    T = assemble_fiber(params, kind, k, n)
    _, z = lowest_eigenpair(T, tol=1e-13)
    return _grid_function(params, kind, n, z)


@dataclass(frozen=True)
class BandTable:
    params: ModelParams
    kind: BoundaryKind
    k_nodes: np.ndarray
    values: np.ndarray
    eigenfunctions: np.ndarray
    richardson_levels: int
    # E_D - b with relative precision (Dirichlet only)
    gaps: np.ndarray | None = None
    _spline: object = field(default=None, repr=False, compare=False)

    @property
    def x(self) -> np.ndarray:
        return self.params.x_grid()

    def interpolate(self, k) -> np.ndarray:
        """Band values at arbitrary k inside the table range (cubic spline)."""
        k = np.asarray(k, dtype=float)
        if np.any(k < self.k_nodes[0] - 1e-12) or np.any(k > self.k_nodes[-1] + 1e-12):
            raise InputError("k outside the tabulated range")
        if self.kind is BoundaryKind.DIRICHLET:
            return self.params.b + self.gap_at(k)
        return CubicSpline(self.k_nodes, self.values)(k)

    def gap_at(self, k) -> np.ndarray:
        """E_D(k) - b interpolated in log space."""
        if self.gaps is None:
            raise InputError("gaps are only tabulated for the Dirichlet band")
        spline = self._spline
        if spline is None:
            spline = CubicSpline(self.k_nodes, np.log(self.gaps))
            object.__setattr__(self, "_spline", spline)
        return np.exp(spline(np.asarray(k, dtype=float)))

    def to_csv(self, path) -> None:
        """Columns ``k, E`` (plus ``gap`` for Dirichlet), 17 significant digits."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            header = ["k", "E"] + (["gap"] if self.gaps is not None else [])
            w.writerow(header)
            for i, k in enumerate(self.k_nodes):
                row = [f"{k:.17g}", f"{self.values[i]:.17g}"]
                if self.gaps is not None:
                    row.append(f"{self.gaps[i]:.17g}")
                w.writerow(row)

    def write_eigenfunctions(self, path) -> None:
        """Sidecar: header row ``k`` then the x-grid; one row per k-node."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k"] + [f"{x:.17g}" for x in self.x])
            for k, row in zip(self.k_nodes, self.eigenfunctions):
                w.writerow([f"{k:.17g}"] + [f"{v:.17g}" for v in row])


def band_table(
    params: ModelParams,
    kind: BoundaryKind,
    k_range: tuple[float, float],
    n_k: int,
    tol: float = 1e-10,
    threads: int = 1,
) -> BandTable:
    """Tabulate E_l and psi_l on a uniform k-grid."""
    kind = BoundaryKind.parse(kind)
    lo, hi = map(float, k_range)
    if not (hi > lo and n_k >= 2):
        raise InputError("need k_range with hi > lo and n_k >= 2")
    ks = np.linspace(lo, hi, int(n_k))

    def one(k):
        v, cert = band_value(params, kind, k, tol, full_output=True)
        return v, len(cert.grids), eigenfunction(params, kind, k)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(one, ks))
    else:
        rows = [one(k) for k in ks]
    values = np.array([r[0] for r in rows])
    levels = max(r[1] for r in rows)
    funcs = np.array([r[2] for r in rows])
    gaps = None
    if kind is BoundaryKind.DIRICHLET:
        gaps = np.array([dirichlet_gap(params, k) for k in ks])
        if np.any(np.diff(gaps) >= 0):
            bad = int(np.argmax(np.diff(gaps) >= 0))
            raise NumericalError(
                f"Dirichlet band not decreasing between k={ks[bad]:.6g} and k={ks[bad + 1]:.6g}"
            )
    return BandTable(params, kind, ks, values, funcs, levels, gaps)


@dataclass(frozen=True)
class NeumannMinimum:
    k_star: float
    energy: float
    mu: float
    curvature_stencil: dict


def _golden_min(f, a: float, b: float, xtol: float, max_iter: int = 200):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= xtol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


def find_neumann_minimum(params: ModelParams, tol: float = 1e-8) -> NeumannMinimum:
    """Minimizer k_*, minimum E_N(k_*) and mu = E_N''(k_*)/2 of the Neumann band."""
    if not tol > 0:
        raise InputError("tol must be positive")
    b = params.b
    lo, hi = 0.0, 2.0 * math.sqrt(b)
    band_tol = 1e-12 * b

    def E(k):
        return band_value(params, BoundaryKind.NEUMANN, k, band_tol)

    e_lo, e_hi = E(lo), E(hi)
    probe = np.linspace(lo, hi, 9)
    vals = [E(k) for k in probe]
    i = int(np.argmin(vals))
    if i == 0 or i == len(probe) - 1 or not (vals[i] < min(e_lo, e_hi)):
        raise NumericalError("no interior minimum of the Neumann band on (0, 2 sqrt(b))")
    k_star, energy = _golden_min(E, probe[i - 1], probe[i + 1], tol * math.sqrt(b))

    h = tol**0.25 * math.sqrt(b)

    def second(step):
        f = [E(k_star + j * step) for j in (-2, -1, 0, 1, 2)]
        return (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * step * step)

    d1, d2 = second(h), second(h / 2)
    curv = (16.0 * d2 - d1) / 15.0
    mu = 0.5 * curv
    if not (0 < energy < b and k_star > 0 and mu > 0):
        raise NumericalError(f"implausible Neumann minimum k*={k_star}, E={energy}, mu={mu}")
    stencil = {"step": h, "second_h": d1, "second_h2": d2, "band_tol": band_tol}
    return NeumannMinimum(k_star, energy, mu, stencil)


def projector_distance(params: ModelParams, k: float, n: int | None = None):
    """Operator-norm distance between the limiting Gaussian projector and 0 + pi_D(k).

    Both projectors have rank one, so the distance is sqrt(1 - <psi, phi>^2).
    The Gaussian is realized as the ground state of the same difference
    stencil on a grid extended to the left, which removes the O(h^2) shape
    error from the overlap.  Returns (distance, distance / sqrt(E_D(k) - b)).
    """
    _check_k(params, k)
    if n is None:
        n = params.n_x * 2 ** max(0, math.ceil(math.log2(params.step() * math.sqrt(params.b) / 2.5e-3)))
    T = assemble_fiber(params, BoundaryKind.DIRICHLET, k, n)
    lam = eigenvalue_by_index(T, 0, _EIG_TOL)
    u = _twisted_vector(T.diag, T.offdiag, lam)
    u /= np.linalg.norm(u)
    if u[np.argmax(np.abs(u))] < 0:
        u = -u
    _, phi, _ = _full_line_ground_state(params, k, n)
    overlap = float(np.dot(phi, u))
    dist = math.sqrt(max(0.0, 1.0 - overlap * overlap))
    gap = dirichlet_gap(params, k)
    if dist == 0.0:
        raise NumericalError(f"projector distance at k={k} is below the double-precision floor")
    return dist, dist / math.sqrt(gap)
