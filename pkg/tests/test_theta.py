import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import lambertw

from planar_morse.errors import InputError
from planar_morse.theta import (
    bubble,
    critical_alphas,
    lambert_w0,
    limit_eigenpair,
    theta_sequence,
)


def bisect_w0(x, tol=1e-15):
    """Principal branch by plain bisection on w e^w = x (independent oracle)."""
    lo, hi = -1.0, max(1.0, math.log1p(x) + 1.0)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid * math.exp(mid) < x:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


def theta_oracle(i_max):
    th = [2.0]
    for _ in range(i_max):
        a = 2.0 / (2.0 + th[-1])
        th.append(2.0 / bisect_w0(a * math.exp(-a)) + 2.0)
    return th


@pytest.mark.parametrize("x", [-1 / math.e + 1e-6, -0.3, -1e-8, 0.0, 1e-10, 0.5, 1.0, 10.0, 1e6])
def test_lambert_matches_bisection(x):
    assert lambert_w0(x) == pytest.approx(bisect_w0(x), rel=1e-12, abs=1e-14)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=-1 / math.e + 1e-9, max_value=1e8))
def test_lambert_inverse_property(x):
    w = lambert_w0(x)
    assert w >= -1.0
    assert w * math.exp(w) == pytest.approx(x, rel=1e-12, abs=1e-14)
    assert w == pytest.approx(lambertw(x).real, rel=1e-10, abs=1e-12)


def test_lambert_branch_point_and_domain():
    assert lambert_w0(-1 / math.e) == pytest.approx(-1.0, abs=1e-7)
    with pytest.raises(InputError):
        lambert_w0(-0.4)


def test_theta_against_oracle():
    table = theta_sequence(6)
    for i, th in enumerate(theta_oracle(6)):
        assert table.theta(i) == pytest.approx(th, rel=1e-12)


def test_theta_zero_row():
    table = theta_sequence(0)
    assert table.i_max == 0
    assert table.theta(0) == 2.0
    assert table.beta(0) == -1.0
    assert table.gamma(0) == pytest.approx(8.0, rel=1e-15)


@pytest.mark.parametrize("i", range(1, 11))
def test_theta_bounds_and_ceiling(i):
    table = theta_sequence(10)
    th = table.theta(i)
    assert 8 * i + 2 < th < 8 * i + 4
    assert math.floor(th / 2) == 4 * i + 1
    assert table.beta(i) == -(th / 2) ** 2


def test_beta_ordering():
    table = theta_sequence(5)
    betas = [table.beta(i) for i in range(6)]
    assert all(b < a for a, b in zip(betas, betas[1:]))
    assert betas[0] == -1.0
    assert betas[1] < -25.0


def test_table_invariants_and_rows():
    table = theta_sequence(4)
    assert all(table.invariants().values())
    rows = table.rows()
    assert [r["i"] for r in rows] == list(range(5))
    assert set(rows[0]) >= {"theta", "gamma", "beta", "bounds_ok"}


@pytest.mark.parametrize("i", [1, 2, 3])
def test_gamma_closed_form(i):
    from mpmath import mp, mpf, log as mlog

    mp.dps = 40
    table = theta_sequence(3)
    th = mpf(table.theta(i))
    ref = mlog((th + 2) / (th - 2)) + th / 2 * mlog((th**2 - 4) / 2)
    assert table.log_gamma(i) == pytest.approx(float(ref), rel=1e-14)


@pytest.mark.parametrize("i", range(6))
def test_bubble_peak_and_mass(i):
    table = theta_sequence(5)
    Z = bubble(0.0, i, table)
    th = table.theta(i)
    r_peak = math.sqrt((th**2 - 4) / 2)
    assert Z.peak_radius() == pytest.approx(r_peak, rel=1e-13)
    assert abs(float(Z.Z(r_peak))) <= 1e-10
    # independent mass integral in s = log r
    s_mid = math.log(r_peak) if r_peak > 0 else 0.0
    val, _ = quad(lambda s: math.exp(2 * s) * float(Z.density(math.exp(s))),
                  -60, 60, points=[s_mid], limit=400, epsabs=0, epsrel=1e-12)
    assert 2 * math.pi * val == pytest.approx(4 * math.pi * th, rel=1e-9)
    assert Z.mass() == pytest.approx(4 * math.pi * th, rel=1e-9)


def _d2_log(fn, r, h=1e-3):
    """Fourth-order second derivative in s = log r."""
    s = np.log(r)
    f = [fn(np.exp(s + k * h)) for k in (-2, -1, 0, 1, 2)]
    return (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * h * h)


@pytest.mark.parametrize("i", [0, 1, 2])
def test_bubble_solves_liouville(i):
    # away from the origin -Delta Z = e^Z, i.e. Z_ss = -r^2 e^Z in s = log r
    table = theta_sequence(2)
    Z = bubble(0.0, i, table)
    r = Z.peak_radius() * np.exp(np.linspace(-0.3, 0.3, 41)) if i else np.linspace(0.2, 6.0, 41)
    rhs = r**2 * Z.density(r)
    err = np.max(np.abs(_d2_log(Z.Z, r) + rhs)) / np.max(rhs)
    assert err <= 1e-6


def test_henon_bubble_is_composed_with_power():
    # Z_{alpha,i}(r) = Z_{0,i}(r^a) with a = (2+alpha)/2, hence
    # -Delta Z_{alpha,i} = a^2 r^alpha e^{Z_{alpha,i}} away from 0
    table = theta_sequence(2)
    alpha = 1.5
    a = (2 + alpha) / 2
    Za, Z0 = bubble(alpha, 1, table), bubble(0.0, 1, table)
    r = Za.peak_radius() * np.exp(np.linspace(-0.3, 0.3, 25))
    np.testing.assert_allclose(Za.Z(r), Z0.Z(r**a), rtol=1e-12, atol=1e-11)
    rhs = a * a * r ** (alpha + 2) * Za.density(r)
    assert np.max(np.abs(_d2_log(Za.Z, r) + rhs)) / np.max(rhs) <= 1e-6
    assert Za.peak_radius() ** a == pytest.approx(Z0.peak_radius(), rel=1e-13)


@pytest.mark.parametrize("i", range(6))
def test_limit_eigenpair(i):
    table = theta_sequence(5)
    eta = limit_eigenpair(i, table)
    assert eta.beta == -(table.theta(i) / 2) ** 2
    assert eta.normalization() == pytest.approx(1.0, abs=1e-8)
    r = np.exp(np.linspace(-3, 3, 201)) * table.gamma(i) ** (1 / table.theta(i))
    assert np.max(np.abs(eta.residual(r))) <= 1e-8


def test_limit_eigenfunction_closed_form():
    table = theta_sequence(2)
    eta = limit_eigenpair(1, table)
    th, g = table.theta(1), table.gamma(1)
    r = np.array([0.3, 1.0, 2.5])
    np.testing.assert_allclose(eta(r), math.sqrt(th * g) * r ** (th / 2) / (g + r**th), rtol=1e-12)


def test_critical_alphas():
    table = theta_sequence(2)
    al = critical_alphas(1, 6, table)
    assert al == sorted(al) and all(a > 0 for a in al)
    for a in al:
        x = (2 + a) * table.theta(1) / 4
        assert abs(x - round(x)) < 1e-12
    with pytest.raises(InputError):
        critical_alphas(0, 3, table)
