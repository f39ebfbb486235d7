"""Acceptance checks, one function per criterion.

Each check returns a ``Criterion`` with a pass flag and a short detail
string; ``run_all`` is shared by the self-test command and the test suite.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import mpmath
import numpy as np

from spectra import bands, dirichlet, neumann, numerics, special
from spectra.bands import BoundaryKind, ModelParams
from spectra.errors import NumericalError
from spectra.oracles import load_fixtures


@dataclass(frozen=True)
class Criterion:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.number:2d} {self.title}: {self.detail} ({self.seconds:.1f} s)"


def _timed(number: int, title: str, fn: Callable[[], tuple[bool, str]]) -> Criterion:
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except NumericalError as exc:
        ok, detail = False, f"numerical error: {exc}"
    return Criterion(number, title, bool(ok), detail, time.perf_counter() - t0)


def degennes() -> tuple[bool, str]:
    fx = load_fixtures()["degennes_b1"]
    t0 = time.perf_counter()
    m1 = bands.find_neumann_minimum(ModelParams.for_field(1.0))
    m4 = bands.find_neumann_minimum(ModelParams.for_field(4.0))
    elapsed = time.perf_counter() - t0
    checks = {
        "energy": abs(m1.energy - fx["energy"]) <= 5e-4,
        "k_star": abs(m1.k_star - fx["k_star"]) <= 5e-4,
        "E=k*^2": abs(m1.energy - m1.k_star**2) <= 1e-6 * m1.energy,
        "b=4 energy": abs(m4.energy - 4 * m1.energy) <= 1e-6 * 4 * m1.energy,
        "b=4 k_star": abs(m4.k_star - 2 * m1.k_star) <= 1e-6 * 2 * m1.k_star,
        "runtime": elapsed < 30,
    }
    detail = (
        f"E={m1.energy:.10f} (oracle {fx['energy']:.10f}), k*={m1.k_star:.8f} (oracle {fx['k_star']:.8f}), "
        f"mu={m1.mu:.6f}, failed={[k for k, v in checks.items() if not v]}"
    )
    return all(checks.values()), detail


def band_limits() -> tuple[bool, str]:
    p = ModelParams.for_field(1.0)
    checks = {}
    try:
        bands.band_table(p, BoundaryKind.DIRICHLET, (-2.0, 6.0), 100)
        checks["decreasing"] = True
    except NumericalError:
        checks["decreasing"] = False
    ed5 = bands.band_value(p, BoundaryKind.DIRICHLET, 5.0)
    en0 = bands.band_value(p, BoundaryKind.NEUMANN, 0.0)
    ed0 = bands.band_value(p, BoundaryKind.DIRICHLET, 0.0)
    low = {kind: bands.band_value(p, kind, -6.0) / 36.0 for kind in BoundaryKind}
    checks["E_D(5)"] = abs(ed5 - 1) < 1e-6
    checks["E_N(0)"] = abs(en0 - 1) < 1e-6
    checks["E_D(0)"] = abs(ed0 - 3) < 1e-5
    for kind, r in low.items():
        checks[f"E_{kind.value[0]}(-6)/36"] = 0.97 <= r <= 1.03
    detail = (
        f"E_D(5)-1={ed5 - 1:.2e}, E_N(0)-1={en0 - 1:.2e}, E_D(0)-3={ed0 - 3:.2e}, "
        f"E_D(-6)/36={low[BoundaryKind.DIRICHLET]:.4f}, E_N(-6)/36={low[BoundaryKind.NEUMANN]:.4f}, "
        f"failed={[k for k, v in checks.items() if not v]}"
    )
    return all(checks.values()), detail


def gap_law() -> tuple[bool, str]:
    t0 = time.perf_counter()
    p = ModelParams.for_field(1.0)
    ratio = {}
    for k in (2.5, 3.5):
        value = bands.band_value(p, BoundaryKind.DIRICHLET, k, tol=1e-7)
        gap = bands.dirichlet_gap(p, k)
        # the extrapolated band value and the direct gap must agree to 1e-7
        if abs(value - 1.0 - gap) > 1e-7:
            return False, f"band value and gap disagree at k={k}"
        ratio[k] = gap / special.dirichlet_gap_asymptotic(k, 1.0)
    elapsed = time.perf_counter() - t0
    ok = 0.85 <= ratio[3.5] <= 1.15 and abs(ratio[3.5] - 1) < abs(ratio[2.5] - 1) and elapsed < 120
    return ok, f"ratio(2.5)={ratio[2.5]:.5f}, ratio(3.5)={ratio[3.5]:.5f}"


def defect_law() -> tuple[bool, str]:
    d = special.defect(6.0, 1.0)
    scaled = 2 * 36 * d.norm_sq
    ar = d.alpha_k / special.alpha_asymptotic(6.0, 1.0)
    w = [special.wronskian(x, 1.0) for x in (0.0, 0.5, 1.0)]
    ok = 0.9 <= scaled <= 1.1 and 0.9 <= ar <= 1.1 and all(abs(x - 1) <= 1e-6 for x in w)
    return ok, f"2k^2|L|={scaled:.5f}, alpha ratio={ar:.5f}, max|W-1|={max(abs(x - 1) for x in w):.1e}"


def projector() -> tuple[bool, str]:
    p = ModelParams.for_field(1.0)
    r = {k: bands.projector_distance(p, k)[1] for k in (2.0, 3.0, 4.0)}
    return r[4.0] < r[3.0] < r[2.0], ", ".join(f"ratio({k:g})={v:.4f}" for k, v in r.items())


def sinc_limit() -> tuple[bool, str]:
    t0 = time.perf_counter()
    m = 200.0
    lo = dirichlet.sinc_count((0.25, 0.75), 1.0, m, 0.5, n_k=600) / m
    hi = dirichlet.sinc_count((0.25, 0.75), 1.0, m, 1.5, n_k=600) / m
    elapsed = time.perf_counter() - t0
    ok = abs(lo - 0.5 / math.pi) <= 0.016 and hi <= 0.02 and elapsed < 60
    return ok, f"n(0.5)/m={lo:.4f} (target {0.5 / math.pi:.4f}), n(1.5)/m={hi:.4f}"


def birman_schwinger() -> tuple[bool, str]:
    v = neumann.EffectivePotential1D.from_function(
        lambda y: 1.0 / (1.0 + y * y), tail_model=neumann.DecayProfile(2.0, 1.0, 1.0)
    )
    parts, ok = [], True
    for lam in (1e-1, 1e-2):
        a = numerics.singular_count(neumann.sn_gram(v, 1.0, lam), 1.0)
        c = neumann.count_1d(v, 1.0, lam).count
        ok &= abs(a - c) <= 1
        parts.append(f"N lam={lam:g}: {a} vs {c}")
    V = dirichlet.RectangleIndicator(1.0, 1.0, 2.0, -3.0, 3.0)
    lam = 0.05
    window = dirichlet.default_window(V, 1.0, lam, s=1.0 / 0.64)
    G = dirichlet.sd_gram(V, 1.0, lam, window)
    for s in (1.0, 0.8):
        a = numerics.singular_count(G, s)
        c = dirichlet.dirichlet_effective_count(V, 1.0, lam, s**-2, window).count
        ok &= abs(a - c) <= 1
        parts.append(f"D s={s:g}: {a} vs {c}")
    return ok, "; ".join(parts)


def power_law_alpha1() -> tuple[bool, str]:
    v = neumann.EffectivePotential1D.from_function(
        lambda y: (1.0 + y * y) ** -0.5, tail_model=neumann.DecayProfile(1.0, 1.0, 1.0)
    )
    t0 = time.perf_counter()
    lam = 1e-4
    c = neumann.count_1d(v, 1.0, lam).count
    sc = neumann.semiclassical_count(v, 1.0, lam)
    elapsed = time.perf_counter() - t0
    scaled = math.sqrt(lam) * c
    ok = 0.85 <= scaled <= 1.15 and abs(c / sc - 1) <= 0.15 and elapsed < 120
    return ok, f"count={c}, lam^1/2 count={scaled:.4f}, semiclassical={sc:.3f}"


def log_law_alpha2() -> tuple[bool, str]:
    v = neumann.EffectivePotential1D.from_function(
        lambda y: 1.0 / (1.0 + y * y), tail_model=neumann.DecayProfile(2.0, 1.0, 1.0)
    )
    lams = (1e-4, 1e-6, 1e-8, 1e-10)
    counts = [neumann.count_1d(v, 1.0, lam).count for lam in lams]
    slope = float(np.polyfit([abs(math.log(x)) for x in lams], counts, 1)[0])
    target = neumann.asymptotic_law(neumann.DecayProfile(2.0, 1.0, 1.0), 1.0).coefficient
    return abs(slope / target - 1) <= 0.25, f"counts={counts}, slope={slope:.4f} (target {target:.5f})"


def hardy_finite() -> tuple[bool, str]:
    v = neumann.EffectivePotential1D.from_function(
        lambda y: 0.2 / (1.0 + y * y), tail_model=neumann.DecayProfile(2.0, 0.2, 0.2)
    )
    a = neumann.count_1d(v, 1.0, 1e-6).count
    c = neumann.count_1d(v, 1.0, 1e-10).count
    return a == c, f"count(1e-6)={a}, count(1e-10)={c}"


def _gaussian_oracle(k: float, kp: float) -> float:
    # b = 1: J = pi^{-1/2} e^{-(k-k')^2/4} e^{-abar^2/2} (1/2) sqrt(pi/2) erfc(-abar/sqrt 2)
    abar = 0.5 * (k + kp)
    J = (
        mpmath.exp(-((k - kp) ** 2) / 4 - abar**2 / 2)
        / mpmath.sqrt(mpmath.pi)
        * mpmath.sqrt(mpmath.pi / 2)
        / 2
        * mpmath.erfc(-abar / mpmath.sqrt(2))
    )
    return float(mpmath.sqrt(mpmath.pi) * mpmath.exp(-((k - kp) ** 2) / 4) * J / (2 * mpmath.pi))


def antiwick_bound() -> tuple[bool, str]:
    families = [
        dirichlet.RectangleIndicator(1.0, 1.0, 2.0, -3.0, 3.0),
        dirichlet.GaussianSeparable(1.0, 1.0, 1.0, (0.0, 0.0)),
        dirichlet.PowerTail(1.0, 2.0, 0.0, 3.0),
    ]
    ok, parts = True, []
    for V in families:
        G = dirichlet.antiwick_gram(V, 1.0, dirichlet.default_window(V, 1.0, 1e-8))
        ev = np.linalg.eigvalsh(G.weighted())
        good = ev.min() >= -1e-8 and ev.max() <= V.sup + 1e-8
        ok &= good
        parts.append(f"{V.kind} [{ev.min():.1e}, {ev.max():.4f}]")
    V = families[1]
    ks = np.array([-2.0, -0.5, 0.0, 0.7, 1.9, 3.0])
    K = dirichlet.antiwick_kernel(V, 1.0, ks)
    err = max(abs(K[i, j] - _gaussian_oracle(ks[i], ks[j])) for i in range(ks.size) for j in range(ks.size))
    ok &= err <= 1e-8
    parts.append(f"gaussian oracle err={err:.1e}")
    return ok, "; ".join(parts)


def dirichlet_law() -> tuple[bool, str]:
    V = dirichlet.RectangleIndicator(1.0, 1.0, 2.0, -3.0, 3.0)
    lams = [1e-2, 1e-4, 1e-6, 1e-8]
    table = dirichlet.nd_pipeline(V, 1.0, lams)
    counts = [r.count for r in table.rows]
    mono = all(a <= b for a, b in zip(counts, counts[1:]))
    inside = all(r.lower_envelope - 1 <= r.count <= r.upper_envelope + 1 for r in table.rows)
    slope = table.slope
    ok = mono and max(counts) >= 1 and inside and slope is not None and 0.3 <= slope <= 0.7
    env = ", ".join(f"{r.lower_envelope:.2f}<={r.count}<={r.upper_envelope:.2f}" for r in table.rows)
    return ok, f"{env}; slope={slope:.3f}" if slope is not None else env


def numerics_suite(seed: int = 20240601) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(100):
        n = int(rng.integers(1, 60))
        T = numerics.Tridiagonal(rng.normal(size=n), rng.normal(size=n - 1))
        ev = np.linalg.eigvalsh(T.dense())
        for x in _safe_thresholds(rng, ev, 5):
            bad += numerics.sturm_count_below(T, x) != int(np.sum(ev < x))
    for _ in range(50):
        a = rng.normal(size=(20, 20)) + 1j * rng.normal(size=(20, 20))
        a = a + a.conj().T
        ev = np.linalg.eigvalsh(a)
        xs = _safe_thresholds(rng, ev, 5)
        got = numerics.count_above_many(a, xs)
        bad += sum(g != int(np.sum(ev > x)) for g, x in zip(got, xs))
    for n in (1, 2, 5, 10, 20):
        q = numerics.gauss_legendre(n)
        for deg in range(2 * n):
            exact = (1 - (-1) ** (deg + 1)) / (deg + 1)
            bad += abs(q.integrate(lambda x: x**deg) - exact) > 1e-13
    return bad == 0, f"{bad} mismatches"


def _safe_thresholds(rng, ev: np.ndarray, m: int) -> list[float]:
    lo, hi = ev.min() - 1.0, ev.max() + 1.0
    out = []
    while len(out) < m:
        x = float(rng.uniform(lo, hi))
        if np.min(np.abs(ev - x)) > 1e-8 * max(1.0, np.abs(ev).max()):
            out.append(x)
    return out


CRITERIA = [
    (1, "de Gennes values", degennes),
    (2, "band limits", band_limits),
    (3, "Dirichlet gap law", gap_law),
    (4, "defect law and Wronskian", defect_law),
    (5, "projector convergence", projector),
    (6, "sinc-family limit", sinc_limit),
    (7, "Birman-Schwinger identities", birman_schwinger),
    (8, "power law alpha=1", power_law_alpha1),
    (9, "log law alpha=2", log_law_alpha2),
    (10, "finite count below the Hardy threshold", hardy_finite),
    (11, "anti-Wick bound and Gaussian oracle", antiwick_bound),
    (12, "Dirichlet counting law", dirichlet_law),
    (13, "numerics kernel properties", numerics_suite),
]


def run_criterion(number: int) -> Criterion:
    for num, title, fn in CRITERIA:
        if num == number:
            return _timed(num, title, fn)
    raise KeyError(number)


def run_all(echo: Callable[[str], None] | None = None) -> list[Criterion]:
    out = []
    for num, title, fn in CRITERIA:
        c = _timed(num, title, fn)
        if echo:
            echo(c.line())
        out.append(c)
    return out
