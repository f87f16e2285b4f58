import math

import numpy as np
import pytest
from scipy.linalg import eigh_tridiagonal

from planar_morse.errors import ConvergenceFailure, InputError
from planar_morse.radial import SolveConfig, solve
from planar_morse.spectrum import (
    GalerkinMesh,
    ShootingOptions,
    eigenvalue_count,
    eigenvalues_galerkin,
    eigenvalues_shooting,
    end_phases,
    map_henon_spectrum,
    rescale_eigenfunction,
)
from planar_morse.theta import theta_sequence

from conftest import cached_galerkin, cached_shooting, cached_solution


def fd_oracle(sol, n=6000, t_left=-14.0):
    """Independent check: second-order FD of -psi'' - f psi = nu psi on a
    uniform tau grid with Dirichlet ends, solved as a symmetric tridiagonal."""
    t = np.linspace(t_left, sol.tau_m, n + 2)[1:-1]
    h = t[1] - t[0]
    d = 2.0 / h**2 - sol.profile.f(t)
    e = -np.ones(n - 1) / h**2
    w = eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, sol.m + 1))
    return w[w < 0], h


@pytest.mark.parametrize("p,m", [(3.0, 1), (3.0, 2), (3.0, 3), (10.0, 2)])
def test_shooting_against_fd_oracle(p, m):
    sol = cached_solution(p, m)
    spec = cached_shooting(p, m)
    nu_h, h = fd_oracle(sol)
    nu_h2, _ = fd_oracle(sol, n=2 * 6000 + 1)
    extrap = (4 * nu_h2[:m] - nu_h[:m]) / 3
    assert len(nu_h) == m
    np.testing.assert_allclose(spec.eigenvalues, extrap, rtol=1e-6)


@pytest.mark.parametrize("p,m", [(3.0, 1), (3.0, 2), (3.0, 3), (5.0, 2), (20.0, 2)])
def test_count_and_ordering(p, m):
    for spec in (cached_shooting(p, m), cached_galerkin(p, m)):
        nu = spec.eigenvalues
        assert len(nu) == m
        assert all(a < b for a, b in zip(nu, nu[1:]))
        assert nu[-1] < 0
        if m > 1:
            assert nu[-2] < -1.0
        assert spec.gap_sign() > 0
        assert spec.ordering_ok()
        assert list(spec.zero_counts) == list(range(m))


@pytest.mark.parametrize("p,m", [(3.0, 2), (20.0, 2), (5.0, 3)])
def test_methods_agree(p, m):
    a, b = cached_shooting(p, m), cached_galerkin(p, m)
    np.testing.assert_allclose(a.eigenvalues, b.eigenvalues, rtol=1e-7)


@pytest.mark.parametrize("p,m", [(3.0, 2), (3.0, 3)])
def test_orthonormal_eigenfunctions(p, m):
    for spec in (cached_shooting(p, m), cached_galerkin(p, m)):
        assert spec.orthogonality_error() <= 1e-8


def test_eigenfunction_zero_counts_on_samples():
    spec = cached_shooting(5.0, 3)
    for j in range(1, 4):
        psi = spec.eigenfunctions[j - 1]
        big = np.abs(psi) > 1e-8 * np.max(np.abs(psi))
        s = np.sign(psi[big])
        assert int(np.count_nonzero(np.diff(s))) == j - 1


def test_end_phase_counts_match():
    sol = cached_solution(3.0, 3)
    spec = cached_shooting(3.0, 3)
    nu = spec.eigenvalues
    probes = [nu[0] - 1.0, 0.5 * (nu[0] + nu[1]), 0.5 * (nu[1] + nu[2]), -1e-3]
    assert [eigenvalue_count(sol, x) for x in probes] == [0, 1, 2, 3]
    phi = end_phases(sol, probes)
    assert np.all(np.diff(phi) > 0)
    with pytest.raises(InputError):
        end_phases(sol, [0.5])


def test_gap_green_identity_small_p_large_p():
    small = cached_shooting(3.0, 1)
    large = cached_shooting(40.0, 2)
    assert small.gap_status == "resolved"
    assert small.gap == pytest.approx(small.eigenvalues[-1] + 1.0, rel=1e-6)
    assert large.gap_status == "resolved" and 0 < large.gap < 1e-12
    assert large.log_gap == pytest.approx(math.log(large.gap), rel=1e-12)


def test_henon_map_is_exact():
    spec = cached_shooting(5.0, 2)
    alpha = 2.0
    a2 = ((2 + alpha) / 2) ** 2
    mapped = map_henon_spectrum(spec, alpha)
    assert all(x == y * a2 for x, y in zip(mapped.eigenvalues, spec.eigenvalues))
    direct = eigenvalues_shooting(solve(SolveConfig(5.0, 2, alpha)))
    assert direct.eigenvalues == mapped.eigenvalues
    assert direct.ordering_ok()
    assert direct.eigenvalues[0] < direct.threshold < direct.eigenvalues[1] < 0
    assert direct.orthogonality_error() <= 1e-8


def test_galerkin_rejects_sublinear_cusp():
    sol = cached_solution(1.5, 2)
    with pytest.raises(ConvergenceFailure):
        eigenvalues_galerkin(sol, GalerkinMesh(max_levels=4))


def test_galerkin_without_vectors():
    spec = eigenvalues_galerkin(cached_solution(3.0, 2), GalerkinMesh(eigenvectors=False))
    assert spec.eigenfunctions is None
    np.testing.assert_allclose(spec.eigenvalues, cached_shooting(3.0, 2).eigenvalues, rtol=1e-7)
    with pytest.raises(InputError):
        spec.gram()


def test_shooting_options_eigenvalues_only():
    spec = eigenvalues_shooting(cached_solution(3.0, 2), options=ShootingOptions(eigenfunctions=False))
    np.testing.assert_allclose(spec.eigenvalues, cached_shooting(3.0, 2).eigenvalues, rtol=1e-9)


def test_near_one_windows_m3():
    # the p -> 1 windows for m = 3, reproduced at p = 1.05
    nu = cached_shooting(1.05, 3).eigenvalues
    assert -25 < nu[0] < -16
    assert -9 < nu[1] < -4
    assert -1 < nu[2] < 0


def test_rescaled_eigenfunction_tends_to_eta():
    table = theta_sequence(2)
    res = []
    for p in (20.0, 80.0):
        sol, spec = cached_solution(p, 2), cached_shooting(p, 2)
        r1 = rescale_eigenfunction(spec, sol, 1, 1, table=table)
        r2 = rescale_eigenfunction(spec, sol, 2, 0, table=table)
        res.append((r1.fit_residual, r2.fit_residual))
        assert abs(r1.amplitude) > 0.5 and abs(r2.amplitude) > 0.5
    assert res[1][0] < res[0][0] and res[1][1] < res[0][1]
    assert res[1][1] < 0.01
    with pytest.raises(InputError):
        rescale_eigenfunction(spec, sol, 3, 0)
