"""Parabolic-cylinder function D_{-1/2} and the rank-one resolvent defect.

D_{-1/2}(z) = e^{-z^2/4} pi^{-1/2} int_0^inf t^{-1/2} e^{-t^2/2 - z t} dt.

With t = u^2 the integrand 2 e^{-u^4/2 - z u^2} is smooth, and composite
Gauss-Legendre panels around its peak give near machine accuracy for
moderate z.  Large positive z uses the asymptotic series.  Everything is
also available in log form since D_{-1/2}(-z) grows like e^{z^2/4}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from spectra.numerics import composite_gauss_legendre

Z_SWITCH = 6.0
_NU = -0.5
# integrand cut where it falls below e^{-_CUT} of its peak
_CUT = 60.0


@dataclass(frozen=True)
class PcfValue:
    argument: float
    value: float
    method: str
    est_error: float
    log_value: float


def _log_integral(z: float, n: int = 20, panels: int = 24) -> float:
    # log of int_0^inf exp(-u^4/2 - z u^2) du
    if z < 0:
        peak = -z
        f_max = 0.5 * z * z
    else:
        peak = 0.0
        f_max = 0.0
    r = math.sqrt(2.0 * _CUT)
    # (u^2 - peak)^2 / 2 <= _CUT  <=>  |u^2 - peak| <= r  (for z < 0)
    if z < 0:
        lo = math.sqrt(max(0.0, peak - r))
        hi = math.sqrt(peak + r)
    else:
        lo = 0.0
        # -u^4/2 - z u^2 >= -_CUT
        hi = math.sqrt(-z + math.sqrt(z * z + 2.0 * _CUT))
    u, w = composite_gauss_legendre(np.linspace(lo, hi, panels + 1), n)
    f = -0.5 * u**4 - z * u * u - f_max
    return f_max + math.log(float(np.dot(w, np.exp(f))))


def _log_quadrature(z: float) -> tuple[float, float]:
    fine = _log_integral(z, 20)
    coarse = _log_integral(z, 14)
    lead = -0.25 * z * z - 0.5 * math.log(math.pi) + math.log(2.0)
    return lead + fine, abs(math.expm1(fine - coarse))


def _log_asymptotic(z: float) -> tuple[float, float]:
    total, term = 1.0, 1.0
    last = 1.0
    for s in range(1, 60):
        term *= -(_NU - 2 * s + 2) * (_NU - 2 * s + 1) / (2 * s * z * z)
        if abs(term) > abs(last) or abs(term) < 1e-17:
            last = term
            break
        total += term
        last = term
    return _NU * math.log(z) - 0.25 * z * z + math.log(total), abs(last)


def pcf_d_minus_half(z: float) -> PcfValue:
    """D_{-1/2}(z) for real z."""
    z = float(z)
    if z > Z_SWITCH:
        logv, err = _log_asymptotic(z)
        method = "asymptotic"
    else:
        logv, err = _log_quadrature(z)
        method = "quadrature"
    value = math.exp(logv) if logv < 709.0 else math.inf
    return PcfValue(z, value, method, err, logv)


def log_pcf(z: float) -> float:
    return pcf_d_minus_half(z).log_value


def theta_psi(x: float, b: float) -> tuple[float, float]:
    """Theta(x) = D(sqrt(2b) x) and Psi(x) = D(-sqrt(2b) x) / (2 sqrt(b))."""
    s = math.sqrt(2.0 * b) * x
    return pcf_d_minus_half(s).value, pcf_d_minus_half(-s).value / (2.0 * math.sqrt(b))


def wronskian(x: float, b: float, step: float = 1e-3) -> float:
    """W(Theta, Psi) = Theta Psi' - Theta' Psi, fourth-order central differences."""

    def deriv(f):
        return (f(x - 2 * step) - 8 * f(x - step) + 8 * f(x + step) - f(x + 2 * step)) / (12 * step)

    th, ps = theta_psi(x, b)
    dth = deriv(lambda t: theta_psi(t, b)[0])
    dps = deriv(lambda t: theta_psi(t, b)[1])
    return th * dps - dth * ps


def log_tail_integral(z0: float, panel: float = 0.25, n: int = 16) -> float:
    """log of int_{z0}^inf D_{-1/2}(z)^2 dz."""
    hi = max(z0, 0.0) + math.sqrt(2.0 * _CUT) + 4.0
    m = max(1, math.ceil((hi - z0) / panel))
    z, w = composite_gauss_legendre(np.linspace(z0, hi, m + 1), n)
    logs = np.array([2.0 * log_pcf(t) for t in z])
    top = logs.max()
    return float(top + math.log(np.dot(w, np.exp(logs - top))))


@dataclass(frozen=True)
class DefectVector:
    k: float
    b: float
    alpha_k: float
    norm_sq: float
    log_alpha_k: float


def defect(k: float, b: float, panel: float = 0.25) -> DefectVector:
    """alpha_k = Psi(-k/b)/Theta(-k/b) and ||rho_k||^2, which equals ||Lambda_k||.

    ||rho_k||^2 = alpha_k^{-1} int_{-inf}^{-k/b} Psi^2 + alpha_k int_{-k/b}^inf Theta^2,
    with every factor combined in log space.
    """
    s = math.sqrt(2.0 / b) * k
    log_alpha = log_pcf(s) - math.log(2.0 * math.sqrt(b)) - log_pcf(-s)
    # int_{-inf}^{-k/b} Psi^2 = (1/4b) int_{k/b}^inf Theta^2, and
    # int_a^inf Theta^2 = (2b)^{-1/2} int_{sqrt(2b) a}^inf D^2
    scale = -0.5 * math.log(2.0 * b)
    log_left = math.log(0.25 / b) + scale + log_tail_integral(s, panel)
    log_right = scale + log_tail_integral(-s, panel)
    norm_sq = math.exp(log_left - log_alpha) + math.exp(log_right + log_alpha)
    return DefectVector(k, b, math.exp(log_alpha), norm_sq, log_alpha)


def dirichlet_gap_asymptotic(k: float, b: float) -> float:
    """Leading term (2 sqrt(b)/sqrt(pi)) k exp(-k^2/b) of E_D(k) - b."""
    return 2.0 * math.sqrt(b) / math.sqrt(math.pi) * k * math.exp(-k * k / b)


def alpha_asymptotic(k: float, b: float) -> float:
    """Leading term exp(-k^2/b) / (2 sqrt(2b)) of alpha_k for k -> infinity."""
    return math.exp(-k * k / b) / (2.0 * math.sqrt(2.0 * b))
