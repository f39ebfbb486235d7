"""Independent reference values used to generate the fixtures file.

Nothing here shares code with the production solvers: the de Gennes data
come from Numerov shooting on a uniform grid of 10^6 points, special values
from mpmath at 30 digits.
"""

from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path

import mpmath
import numba
import numpy as np

_SHOOT_POINTS = 1_000_000
_SHOOT_LENGTH = 12.0


@numba.njit(cache=True)
def _numerov_end(k, E, length, n):
    # u'' = ((x - k)^2 - E) u from x = 0 with u(0) = 1, u'(0) = 0; returns u(length)
    h = length / n
    h2 = h * h
    q0 = k * k - E
    u_prev = 1.0
    u = 1.0 + 0.5 * h2 * q0 + h2 * h2 * (2.0 + q0 * q0) / 24.0
    f_prev = 1.0 - h2 * q0 / 12.0
    x = h
    q = (x - k) ** 2 - E
    f = 1.0 - h2 * q / 12.0
    for i in range(2, n + 1):
        x = i * h
        qn = (x - k) ** 2 - E
        fn = 1.0 - h2 * qn / 12.0
        un = ((12.0 - 10.0 * f) * u - f_prev * u_prev) / fn
        u_prev, u = u, un
        f_prev, f = f, fn
        if abs(u) > 1e250:
            u_prev *= 1e-250
            u *= 1e-250
    return u


def shooting_energy(k: float, lo: float = 0.0, hi: float = 3.0, n: int = _SHOOT_POINTS) -> float:
    """Lowest Neumann eigenvalue at b = 1 by bisection on the sign of the shot."""
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _numerov_end(k, mid, _SHOOT_LENGTH, n) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def degennes_reference(n: int = _SHOOT_POINTS) -> dict:
    """Minimum of the Neumann band at b = 1: k_star, energy and mu = E''/2."""
    g = 0.5 * (math.sqrt(5.0) - 1.0)
    a, c = 0.3, 1.3
    x1, x2 = c - g * (c - a), a + g * (c - a)
    f1, f2 = shooting_energy(x1, n=n), shooting_energy(x2, n=n)
    while c - a > 1e-9:
        if f1 <= f2:
            c, x2, f2 = x2, x1, f1
            x1 = c - g * (c - a)
            f1 = shooting_energy(x1, n=n)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + g * (c - a)
            f2 = shooting_energy(x2, n=n)
    k_star = 0.5 * (a + c)
    energy = shooting_energy(k_star, n=n)
    step = 1e-2
    second = (shooting_energy(k_star + step, n=n) - 2 * energy + shooting_energy(k_star - step, n=n)) / step**2
    return {"k_star": k_star, "energy": energy, "mu": 0.5 * second, "method": f"numerov shooting, {n} points"}


def special_reference() -> dict:
    mpmath.mp.dps = 30
    return {
        "pcf_d_minus_half_0": float(mpmath.pcfd(-0.5, 0)),
        "beta_3_2_1_2": float(mpmath.beta(1.5, 0.5)),
        "beta_3_2_1_4": float(mpmath.beta(1.5, 0.25)),
    }


def build_fixtures() -> dict:
    return {"degennes_b1": degennes_reference(), "special": special_reference()}


def fixtures_path() -> Path:
    return Path(str(resources.files("spectra") / "data" / "fixtures.json"))


def write_fixtures(path: Path | None = None) -> dict:
    data = build_fixtures()
    path = Path(path) if path else fixtures_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return data


def load_fixtures(path: Path | None = None) -> dict:
    path = Path(path) if path else fixtures_path()
    return json.loads(path.read_text())
