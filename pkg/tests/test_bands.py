import math

import numpy as np
import pytest

from spectra.bands import (
    BoundaryKind,
    ModelParams,
    assemble_fiber,
    band_table,
    band_value,
    dirichlet_gap,
    eigenfunction,
    find_neumann_minimum,
    projector_distance,
    trapezoid_weights,
)
from spectra.errors import InputError
from spectra.numerics import Tridiagonal, eigenvalue_by_index
from spectra.oracles import load_fixtures

D, N = BoundaryKind.DIRICHLET, BoundaryKind.NEUMANN


def test_params_validation():
    with pytest.raises(InputError):
        ModelParams(b=1.0, x_max=5.0)
    with pytest.raises(InputError):
        ModelParams(n_x=100)
    with pytest.raises(InputError):
        ModelParams(b=-1.0)
    assert BoundaryKind.parse("N") is N and BoundaryKind.parse("dirichlet") is D


def test_free_string_modes():
    p = ModelParams(1.0, 10.0, 1000)
    T = assemble_fiber(p, D, 0.0)
    # drop the potential: discrete string eigenvalues
    bare = Tridiagonal(T.diag - (np.arange(1, 1000) * T.step) ** 2, T.offdiag, T.step)
    for j in (1, 2, 3):
        assert eigenvalue_by_index(bare, j - 1, 1e-13) == pytest.approx((j * math.pi / 10) ** 2, rel=1e-5)


def test_neumann_first_row_only():
    p = ModelParams(1.0, 16.0, 400)
    T = assemble_fiber(p, N, 0.0)
    assert np.all(T.offdiag[1:] == T.offdiag[1])
    assert T.offdiag[0] == pytest.approx(math.sqrt(2) * T.offdiag[1])


def test_dirichlet_k0_single_grid():
    p = ModelParams(1.0, 10.0, 4000)
    T = assemble_fiber(p, D, 0.0)
    assert eigenvalue_by_index(T, 0, 1e-13) == pytest.approx(3.0, abs=1e-5)


def test_band_values(params1):
    assert abs(band_value(params1, N, 0.0) - 1) < 1e-6
    assert abs(band_value(params1, D, 0.0) - 3) < 1e-6
    assert abs(band_value(params1, D, 5.0) - 1) < 1e-6


def test_band_value_at_minus_six_is_not_k_squared(params1):
    # k^2 (1 + o(1)) is only asymptotic: the o(1) term is still large at k = -6
    for kind in (D, N):
        assert band_value(params1, kind, -6.0) / 36 > 1.1


def test_neumann_below_dirichlet(params1):
    for k in np.linspace(-2, 4, 7):
        assert band_value(params1, N, k) <= band_value(params1, D, k)


def test_variational_bound(params1):
    # Gaussian test function centered at the oscillator minimum
    n = params1.n_x * 4
    h = params1.x_max / n
    for kind, k in ((D, 3.0), (N, 1.0), (N, -1.0)):
        T = assemble_fiber(params1, kind, k, n)
        x = np.arange(1, n) * h if kind is D else np.arange(0, n) * h
        u = np.exp(-0.5 * (x - max(k, 0.5)) ** 2) * (x if kind is D else 1.0)
        rq = u @ T.matvec(u) / (u @ u)
        assert band_value(params1, kind, k) <= rq + 1e-8


def test_truncation_certificate(params1):
    wide = params1.with_x_max(2 * params1.x_max)
    for kind in (D, N):
        for k in (-2.0, 0.0, 3.0, 6.0):
            assert abs(band_value(params1, kind, k) - band_value(wide, kind, k)) < 1e-9


def test_eigenfunction_norm_and_sign(params1):
    for kind in (D, N):
        u = eigenfunction(params1, kind, 1.0)
        w = trapezoid_weights(params1.n_x, params1.step())
        assert abs(np.dot(w, u**2) - 1) < 1e-10
        assert u[np.argmax(np.abs(u))] > 0


def test_band_tables(params1):
    t = band_table(params1, D, (-2.0, 6.0), 40)
    assert np.all(np.diff(t.values[:-5]) < 0) and np.all(np.diff(t.gaps) < 0)
    tn = band_table(params1, N, (-2.0, 4.0), 31)
    i = int(np.argmin(tn.values))
    assert 0 < i < 30 and 0 < tn.values[i] < 1
    t2 = band_table(params1, D, (-2.0, 6.0), 79)
    assert np.all(np.abs(t2.values[::2] - t.values) <= 2e-10)


def test_gap_relative_precision(params1):
    g = dirichlet_gap(params1, 7.0)
    assert 0 < g < 1e-20
    # Richardson agreement across refinements
    assert dirichlet_gap(params1.with_x_max(30.0), 7.0) == pytest.approx(g, rel=1e-8)


def test_neumann_minimum(params1):
    fx = load_fixtures()["degennes_b1"]
    m = find_neumann_minimum(params1)
    assert abs(m.energy - fx["energy"]) < 5e-4 and abs(m.k_star - fx["k_star"]) < 5e-4
    assert abs(m.energy - m.k_star**2) <= 1e-6 * m.energy
    assert abs(m.mu - fx["mu"]) < 1e-3
    assert 0 < m.energy < 1 and m.k_star > 0 and m.mu > 0
    m4 = find_neumann_minimum(ModelParams.for_field(4.0))
    assert m4.energy == pytest.approx(4 * m.energy, rel=1e-6)
    assert m4.k_star == pytest.approx(2 * m.k_star, rel=1e-6)


def test_projector_distance(params1):
    d2, r2 = projector_distance(params1, 2.0)
    d4, r4 = projector_distance(params1, 4.0)
    assert 0 <= d2 <= 1 and 0 <= d4 <= 1 and r4 < r2
    assert projector_distance(params1, -3.0)[0] == pytest.approx(1.0, abs=0.05)


def test_k_too_large_for_domain(params1):
    with pytest.raises(InputError):
        band_value(params1, D, 12.0)
