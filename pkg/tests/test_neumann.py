import json
import math

import numpy as np
import pytest
from scipy.optimize import brentq

from spectra.bands import find_neumann_minimum
from spectra.dirichlet import GaussianSeparable, PowerTail, RectangleIndicator, SampledPotential
from spectra.errors import InputError
from spectra.neumann import (
    DecayProfile,
    EffectivePotential1D,
    asymptotic_law,
    count_1d,
    effective_potential,
    fit_tail,
    nn_pipeline,
    semiclassical_count,
    sn_gram,
    tail_mass,
)
from spectra.numerics import singular_count


def inv_square(c=1.0):
    return EffectivePotential1D.from_function(lambda y: c / (1 + y * y), tail_model=DecayProfile(2.0, c, c))


def inv_root():
    return EffectivePotential1D.from_function(lambda y: (1 + y * y) ** -0.5, tail_model=DecayProfile(1.0, 1.0, 1.0))


ZERO = EffectivePotential1D(np.linspace(-5, 5, 11), np.zeros(11))


@pytest.fixture(scope="module")
def minimum(params1):
    return find_neumann_minimum(params1)


def test_zero_potential(params1, minimum):
    v = effective_potential(RectangleIndicator(0.0, 1.0, 2.0, -1.0, 1.0), minimum, params1, np.linspace(-3, 3, 7))
    assert np.all(v.values == 0)
    assert count_1d(ZERO, 1.0, 1e-3).count == 0
    assert semiclassical_count(ZERO, 1.0, 1e-3) == 0.0
    assert np.all(sn_gram(ZERO, 1.0, 1e-2).entries == 0)


def test_full_strip_potential(params1, minimum):
    y = np.linspace(-10, 10, 41)
    V = PowerTail(1.0, 2.0, 0.0, params1.x_max)
    v = effective_potential(V, minimum, params1, y)
    tau = tail_mass(params1, minimum.k_star, params1.x_max)
    assert tau < 1e-10
    assert np.allclose(v.values, (1 - tau) / (1 + y * y), rtol=1e-10, atol=0)
    # tail mass beyond a finite strip edge is positive and matches the quadrature
    X = 4.0
    tau4 = tail_mass(params1, minimum.k_star, X)
    v4 = effective_potential(PowerTail(1.0, 2.0, 0.0, X), minimum, params1, y)
    assert 0 < tau4 < 1e-3
    assert np.allclose(v4.values, (1 - tau4) / (1 + y * y), rtol=1e-8)


def test_separable_ratio(params1, minimum):
    V = GaussianSeparable(2.0, 1.0, 3.0, (0.5, 1.0))
    y = np.linspace(-6, 6, 25)
    v = effective_potential(V, minimum, params1, y)
    ratio = v.values / np.exp(-(((y - 1.0) / 3.0) ** 2))
    assert np.ptp(ratio) <= 1e-12 * ratio.max()
    assert np.all(v.values <= 2.0 * np.exp(-(((y - 1.0) / 3.0) ** 2)) + 1e-15)


def test_sampled_coverage(params1, minimum):
    xs, ys = np.linspace(0.5, 3.0, 6), np.linspace(-2, 2, 5)
    with pytest.raises(InputError):
        effective_potential(SampledPotential(xs, ys, np.ones((6, 5))), minimum, params1, ys)
    xs = np.linspace(0.0, 12.0, 25)
    v = effective_potential(SampledPotential(xs, ys, np.ones((25, 5))), minimum, params1, ys)
    assert np.allclose(v.values, 1.0, atol=1e-8)


def _well_states(v0, a):
    # even and odd bound states of the finite well, counted from the transcendental equations
    z0 = a * math.sqrt(v0)
    n = 0
    for j in range(100):
        lo, hi = j * math.pi / 2 + 1e-12, min((j + 1) * math.pi / 2 - 1e-12, z0)
        if lo >= z0:
            break
        f = (lambda z: z * math.tan(z) - math.sqrt(z0 * z0 - z * z)) if j % 2 == 0 else (
            lambda z: -z / math.tan(z) - math.sqrt(z0 * z0 - z * z))
        if f(lo) * f(hi) < 0:
            brentq(f, lo, hi)
            n += 1
    return n


@pytest.mark.parametrize("v0,a", [(1.0, 1.0), (10.0, 1.0), (25.0, 0.8)])
def test_square_well(v0, a):
    v = EffectivePotential1D.from_function(lambda y: np.where(np.abs(y) < a, v0, 0.0), window=5.0)
    assert count_1d(v, 1.0, 1e-6).count == _well_states(v0, a)
    if (v0, a) == (1.0, 1.0):
        assert count_1d(v, 1.0, 1e-6).count == 1


def test_subcritical_tail_finite():
    v = inv_square(0.2)
    assert count_1d(v, 1.0, 1e-6).count == count_1d(v, 1.0, 1e-10).count


def test_count_monotonicity():
    v = inv_square()
    assert [count_1d(v, 1.0, 1e-4, s).count for s in (0.5, 1.0, 2.0)] == sorted(
        count_1d(v, 1.0, 1e-4, s).count for s in (0.5, 1.0, 2.0)
    )
    by_lam = [count_1d(v, 1.0, lam).count for lam in (1e-1, 1e-3, 1e-6)]
    assert by_lam == sorted(by_lam)
    weaker = inv_square(0.8)
    assert count_1d(weaker, 1.0, 1e-5).count <= count_1d(v, 1.0, 1e-5).count


@pytest.mark.parametrize("c", [0.5, 3.0, 10.0])
def test_scaling_invariance(c):
    v = inv_root()
    cv = EffectivePotential1D.from_function(lambda y: c * (1 + y * y) ** -0.5, tail_model=DecayProfile(1.0, c, c))
    assert count_1d(cv, c, c * 1e-3).count == count_1d(v, 1.0, 1e-3).count


def test_slow_decay_hits_cap():
    v = EffectivePotential1D.from_function(lambda y: (1 + np.abs(y)) ** -0.1, tail_model=DecayProfile(0.1, 1, 1))
    with pytest.raises(InputError):
        count_1d(v, 1.0, 1e-2)


def test_window_without_tail_model():
    y = np.linspace(-20, 20, 401)
    v = EffectivePotential1D(y, 1 / (1 + y * y))
    with pytest.raises(InputError):
        count_1d(v, 1.0, 1e-4)
    with pytest.raises(InputError):
        semiclassical_count(v, 1.0, 1e-4)


def test_semiclassical_one_over_y():
    v = EffectivePotential1D.from_function(
        lambda y: 1.0 / np.maximum(np.abs(y), 1.0), window=5.0, tail_model=DecayProfile(1.0, 1.0, 1.0)
    )
    lam = 1e-8
    assert semiclassical_count(v, 1.0, lam) * math.sqrt(lam) == pytest.approx(1.0, abs=1e-3)
    # tail model used analytically beyond a sampled window gives the same value
    y = np.linspace(-5, 5, 2001)
    sampled = EffectivePotential1D(y, 1.0 / np.maximum(np.abs(y), 1.0), DecayProfile(1.0, 1.0, 1.0))
    assert semiclassical_count(sampled, 1.0, 1e-4) == pytest.approx(semiclassical_count(v, 1.0, 1e-4), rel=1e-4)


def test_weyl_law_cross_check():
    v = inv_root()
    c = count_1d(v, 1.0, 1e-4).count
    assert abs(c / semiclassical_count(v, 1.0, 1e-4) - 1) <= 0.15


def test_semiclassical_monotone_continuous():
    v = inv_square()
    lams = np.geomspace(1e-1, 1e-6, 12)
    vals = [semiclassical_count(v, 1.0, lam) for lam in lams]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    a, b = semiclassical_count(v, 1.0, 1e-3), semiclassical_count(v, 1.0, 1e-3 * (1 + 1e-6))
    assert abs(a - b) < 1e-4


def test_asymptotic_law_examples():
    law = asymptotic_law(DecayProfile(1.0, 1.0, 1.0), 1.0)
    assert law.kind == "power" and law.exponent == 0.5 and law.coefficient == pytest.approx(1.0, rel=1e-14)
    assert asymptotic_law(DecayProfile(2.0, 0.25, 0.25), 1.0).coefficient == 0.0
    assert asymptotic_law(DecayProfile(2.0, 0.5, 0.5), 1.0).coefficient == pytest.approx(1 / (2 * math.pi), rel=1e-14)
    for bad in (0.0, 2.5, -1.0):
        with pytest.raises(InputError):
            DecayProfile(bad, 1.0, 1.0)


@pytest.mark.parametrize("lam", [1e-1, 1e-2])
def test_birman_schwinger_neumann(lam):
    v = inv_square()
    G = sn_gram(v, 1.0, lam)
    assert abs(singular_count(G, 1.0) - count_1d(v, 1.0, lam).count) <= 1


def test_birman_schwinger_second_potential():
    v = EffectivePotential1D.from_function(lambda y: 2.0 * np.exp(-y * y), window=8.0)
    for lam in (1e-1, 1e-2):
        assert abs(singular_count(sn_gram(v, 1.0, lam), 1.0) - count_1d(v, 1.0, lam).count) <= 1


def test_sn_counts_monotone_in_r():
    G = sn_gram(inv_square(), 1.0, 1e-2)
    counts = [singular_count(G, r) for r in (2.0, 1.0, 0.5, 0.25)]
    assert counts == sorted(counts)


def test_fit_tail_exact_power():
    y = np.concatenate([-np.geomspace(100, 1, 50), np.geomspace(1, 100, 50)])
    v = np.where(y < 0, 2.0, 3.0) * np.abs(y) ** -1.5
    fit = fit_tail(y, v)
    assert fit.alpha == pytest.approx(1.5, rel=1e-12)
    assert fit.omega_minus == pytest.approx(2.0, rel=1e-10) and fit.omega_plus == pytest.approx(3.0, rel=1e-10)
    assert set(json.loads(fit.to_json())) == {"alpha", "omega_minus", "omega_plus", "r2"}


def test_nn_pipeline(params1, tmp_path):
    V = PowerTail(1.0, 2.0, 0.0, params1.x_max)
    table = nn_pipeline(V, 1.0, [1e-2, 1e-4, 1e-6], params=params1)
    counts = [r.count for r in table.rows]
    assert counts == sorted(counts)
    assert table.tail.alpha == pytest.approx(2.0, abs=1e-3)
    assert table.tail.omega_minus == pytest.approx(1.0, abs=1e-3)
    assert table.law is not None and table.law.kind == "log"
    table.to_csv(tmp_path / "nn.csv")
    assert (tmp_path / "nn.csv").read_text().splitlines()[0] == "lambda,count,semiclassical,predicted_law"


def test_nn_pipeline_flags_non_power_tail(params1, tmp_path):
    V = GaussianSeparable(1.0, 2.0, 5.0, (0.0, 0.0))
    table = nn_pipeline(V, 1.0, [1e-2], y_window=40.0, n_y=801, params=params1)
    assert table.law is None and table.rows[0].predicted is None
    table.to_csv(tmp_path / "g.csv")
    assert (tmp_path / "g.csv").read_text().splitlines()[0] == "lambda,count,semiclassical"
