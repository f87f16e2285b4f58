"""Radial nodal solutions of the planar Lane-Emden and Henon problems.

The solver never integrates u_p directly.  It integrates the normalized
initial value problem

    w'' + w'/rho + |w|^{p-1} w = 0,   w(0) = 1,  w'(0) = 0

in ``tau = log(rho)``, where it reads ``w_tt = -e^{2 tau} |w|^{p-1} w``.  The
m-th zero ``R_m = e^{tau_m}`` fixes the scaling
``u_p(r) = R_m^{2/(p-1)} w(R_m r)``.  For large p the interesting scales
``eps_{i,p}`` underflow, so the solution keeps everything in log form
(``tau`` coordinates, ``log_eps``, ``log_u0``) and only exposes plain floats
as convenience views.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import InputError, IntegrationFailure, ToleranceFailure

__all__ = [
    "P_CAP",
    "SolveConfig",
    "NormalizedProfile",
    "RadialSolution",
    "RescaledProfile",
    "FpProfile",
    "solve_lane_emden",
    "solve_henon",
    "solve",
    "rescaled_profile",
    "rescaled_potential",
    "rescaled_values",
    "f_p_profile",
    "good_set",
]

P_CAP = 200.0
_EXP_CLIP = 700.0
BESSEL_J0_ZERO = 2.404825557695773


@dataclass(frozen=True)
class SolveConfig:
    p: float
    m: int
    alpha: float = 0.0
    ode_rel_tol: float = 1e-13
    ode_abs_tol: float = 1e-16
    r_core: float | None = None
    tau_cap: float = 1.0e4
    boundary_tol: float = 1e-10

    def __post_init__(self):
        if not (isinstance(self.p, (int, float)) and math.isfinite(self.p) and self.p > 1):
            raise InputError(f"p must be a finite real > 1, got {self.p!r}")
        if int(self.m) != self.m or self.m < 1:
            raise InputError(f"m must be an integer >= 1, got {self.m!r}")
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise InputError(f"alpha must be >= 0, got {self.alpha!r}")
        if not (self.ode_rel_tol > 0 and self.ode_abs_tol > 0):
            raise InputError("ODE tolerances must be positive")
        if self.r_core is not None and not self.r_core > 0:
            raise InputError("r_core must be positive")
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def core_radius(self) -> float:
        """Series cutoff in normalized units (where w(0) = 1).

        1e-6 of the smaller of the first zero estimate and the width
        ``p^{-1/2}`` of the central bump, so the dropped O(rho^6) series
        term stays far below round-off for every p.
        """
        if self.r_core is not None:
            return float(self.r_core)
        return 1e-6 * min(BESSEL_J0_ZERO, self.p**-0.5)

    def lane_emden(self) -> "SolveConfig":
        return SolveConfig(self.p, self.m, 0.0, self.ode_rel_tol, self.ode_abs_tol,
                           self.r_core, self.tau_cap, self.boundary_tol)

    def as_dict(self) -> dict:
        return {
            "p": self.p, "m": self.m, "alpha": self.alpha,
            "ode_rel_tol": self.ode_rel_tol, "ode_abs_tol": self.ode_abs_tol,
            "r_core": self.core_radius, "tau_cap": self.tau_cap,
            "boundary_tol": self.boundary_tol,
        }


class NormalizedProfile:
    """Dense solution of the normalized IVP in ``tau = log rho``.

    Left of ``tau0`` the two-term series is used, so evaluation is valid on
    the whole line up to the last computed zero.
    """

    def __init__(self, p: float, m: int, rtol: float, atol: float,
                 rho_core: float, tau_cap: float):
        self.p = p
        self.m = m
        self.tau0 = math.log(rho_core)
        r2 = rho_core * rho_core
        w0 = 1.0 - r2 / 4.0 + p * r2 * r2 / 64.0
        wt0 = -r2 / 2.0 + p * r2 * r2 / 16.0

        def rhs(t, y):
            w = y[0]
            if w == 0.0:
                return [y[1], 0.0]
            e = min(2.0 * t + p * math.log(abs(w)), _EXP_CLIP)
            return [y[1], -math.copysign(math.exp(e), w)]

        def zero(t, y):
            return y[0]

        def extremum(t, y):
            return y[1]

        zero.terminal = m
        with np.errstate(over="ignore", invalid="ignore"):
            sol = solve_ivp(rhs, (self.tau0, tau_cap), [w0, wt0], method="DOP853",
                            rtol=rtol, atol=atol, events=[zero, extremum],
                            dense_output=True)
        if sol.status == -1:
            raise IntegrationFailure(f"normalized IVP failed: {sol.message}")
        zeros = np.asarray(sol.t_events[0], dtype=float)
        if len(zeros) < m:
            raise IntegrationFailure(
                f"only {len(zeros)} of {m} zeros found before tau={tau_cap}"
            )
        self.nfev = int(sol.nfev)
        self._dense = sol.sol
        self.tau_zeros = zeros[:m]
        self.tau_m = float(zeros[m - 1])
        ext = np.asarray(sol.t_events[1], dtype=float)
        ext = ext[ext < self.tau_m]
        if len(ext) != m - 1:
            raise IntegrationFailure(
                f"expected {m - 1} interior extrema, found {len(ext)}"
            )
        self.tau_ext = ext
        # |w| at the origin and at each interior extremum
        self.w_ext = np.concatenate([[1.0], self._dense(ext)[0]]) if m > 1 else np.array([1.0])
        self.boundary_value = float(sol.y[0, -1])

    def _series(self, t):
        r2 = np.exp(2.0 * t)
        return 1.0 - r2 / 4.0 + self.p * r2 * r2 / 64.0, -r2 / 2.0 + self.p * r2 * r2 / 16.0

    def state(self, tau):
        """``(w, w_tau)`` at ``tau`` (array-like)."""
        t = np.atleast_1d(np.asarray(tau, dtype=float))
        inside = t >= self.tau0
        w = np.empty_like(t)
        wt = np.empty_like(t)
        if inside.any():
            y = self._dense(np.minimum(t[inside], self.tau_m))
            w[inside], wt[inside] = y[0], y[1]
        if (~inside).any():
            w[~inside], wt[~inside] = self._series(t[~inside])
        return w, wt

    def w(self, tau):
        return self.state(tau)[0]

    def w_tau(self, tau):
        return self.state(tau)[1]

    def f(self, tau):
        """``p e^{2 tau} |w|^{p-1}`` = ``f_p`` at ``r = e^{tau - tau_m}``."""
        t = np.atleast_1d(np.asarray(tau, dtype=float))
        w = np.abs(self.w(t))
        with np.errstate(divide="ignore", over="ignore"):
            e = 2.0 * t + (self.p - 1.0) * np.log(w)
            return self.p * np.exp(np.minimum(e, _EXP_CLIP))

    def w_tautau(self, tau):
        t = np.atleast_1d(np.asarray(tau, dtype=float))
        w = self.w(t)
        with np.errstate(divide="ignore"):
            e = np.minimum(2.0 * t + self.p * np.log(np.abs(w)), _EXP_CLIP)
        return -np.sign(w) * np.exp(e)


@dataclass(frozen=True, eq=False)
class RadialSolution:
    """Radial solution with ``m`` nodal zones on the unit disk.

    ``eps`` and ``amplitudes`` are plain floats and may underflow for large
    p; ``log_eps`` and ``log_amplitudes`` are always finite.
    """

    config: SolveConfig
    profile: NormalizedProfile = field(repr=False)
    log_u0: float
    nodal_radii: tuple[float, ...]
    critical_radii: tuple[float, ...]
    log_amplitudes: tuple[float, ...]
    log_eps: tuple[float, ...]
    boundary_residual: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def p(self) -> float:
        return self.config.p

    @property
    def m(self) -> int:
        return self.config.m

    @property
    def alpha(self) -> float:
        return self.config.alpha

    @property
    def scale(self) -> float:
        """``(2 + alpha) / 2``; the Henon change of variables is ``t = r^scale``."""
        return 0.5 * (2.0 + self.alpha)

    @property
    def tau_m(self) -> float:
        return self.profile.tau_m

    @property
    def u0(self) -> float:
        return math.exp(self.log_u0)

    @property
    def amplitudes(self) -> tuple[float, ...]:
        return tuple(math.exp(a) for a in self.log_amplitudes)

    @property
    def eps(self) -> tuple[float, ...]:
        return tuple(math.exp(e) for e in self.log_eps)

    # evaluation ----------------------------------------------------------
    def _tau(self, r):
        """Normalized log-radius of the Lane-Emden point behind ``r``."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        with np.errstate(divide="ignore"):
            return self.scale * np.log(r) + self.tau_m

    def u(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        t = self._tau(r)
        w = np.where(r > 0, self.profile.w(np.where(r > 0, t, 0.0)), 1.0)
        return self.u0 * w

    def du(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        pos = r > 0
        t = np.where(pos, self._tau(np.where(pos, r, 1.0)), 0.0)
        wt = self.profile.w_tau(t)
        # d/dr u0 w(rho) = u0 w_tau * (d tau / dr) = u0 w_tau * scale / r
        out = np.zeros_like(r)
        out[pos] = self.u0 * wt[pos] * self.scale / r[pos]
        return out

    def f(self, r):
        """``p r^{2+alpha} |u|^{p-1}``, the potential seen in log-radius."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        pos = r > 0
        out = np.zeros_like(r)
        out[pos] = self.scale**2 * self.profile.f(self._tau(r[pos]))
        return out

    def pde_residual(self, r, h: float = 2e-3) -> np.ndarray:
        """Relative residual of the radial ODE, evaluated in log-radius.

        ``w_tt`` is obtained by fourth-order central differences of the interpolated
        ``w_tau`` and compared with ``-e^{2 tau}|w|^{p-1} w``; the result is
        divided by ``max |w_tt|`` over the solution so it is scale free.
        Points whose stencil straddles a node are returned as NaN.
        """
        r = np.atleast_1d(np.asarray(r, dtype=float))
        t = self._tau(r)
        lo = self.profile.tau0 + 2 * h
        t = np.clip(t, lo, self.tau_m - 2 * h)
        g = self.profile.w_tau
        wtt_fd = (g(t - 2 * h) - 8 * g(t - h) + 8 * g(t + h) - g(t + 2 * h)) / (12 * h)
        wtt = self.profile.w_tautau(t)
        grid = np.linspace(lo, self.tau_m, 4001)
        scale = np.max(np.abs(self.profile.w_tautau(grid)))
        out = np.abs(wtt_fd - wtt) / scale
        # |w|^{p-1} w is not smooth at a node when p < 2; the stencil must not straddle one
        near = np.min(np.abs(t[:, None] - self.profile.tau_zeros[None, :]), axis=1) <= 3 * h
        out[near] = np.nan
        return out

    def sample_grid(self, n_log: int = 1500, n_lin: int = 501) -> np.ndarray:
        """Sorted radii: 0, a log grid reaching the series region, a linear grid."""
        t_lo = (self.profile.tau0 - self.tau_m) / self.scale
        lg = np.exp(np.linspace(t_lo, 0.0, n_log))
        extra = [0.0, *self.nodal_radii, *self.critical_radii]
        return np.unique(np.concatenate([lg, np.linspace(0.0, 1.0, n_lin), extra]))

    def samples(self, n_log: int = 1500, n_lin: int = 501):
        r = self.sample_grid(n_log, n_lin)
        return r, self.u(r), self.du(r)


def solve_lane_emden(config: SolveConfig) -> RadialSolution:
    """alpha = 0 solution by the scaling method."""
    if config.alpha != 0.0:
        raise InputError("solve_lane_emden needs alpha = 0; use solve_henon")
    p, m = config.p, config.m
    prof = NormalizedProfile(p, m, config.ode_rel_tol, config.ode_abs_tol,
                             config.core_radius, config.tau_cap)
    tau_m = prof.tau_m
    log_u0 = 2.0 * tau_m / (p - 1.0)
    log_w = np.log(np.abs(prof.w_ext))
    log_amp = tuple(float(log_u0 + lw) for lw in log_w)
    log_eps = tuple(float(-0.5 * math.log(p) - tau_m - 0.5 * (p - 1.0) * lw) for lw in log_w)
    nodal = tuple(float(math.exp(t - tau_m)) for t in prof.tau_zeros[:-1]) + (1.0,)
    crit = (0.0,) + tuple(float(math.exp(t - tau_m)) for t in prof.tau_ext)
    resid = abs(prof.boundary_value)
    if resid > config.boundary_tol:
        raise ToleranceFailure(f"|u(1)|/u0 = {resid:.3e} exceeds {config.boundary_tol:.1e}")
    _check_structure(nodal, crit, prof)
    diag = {
        "tau_m": tau_m,
        "nfev": prof.nfev,
        "beyond_p_cap": p > P_CAP,
    }
    return RadialSolution(config, prof, log_u0, nodal, crit, log_amp, log_eps, resid, diag)


def _check_structure(nodal, crit, prof):
    seq = [crit[0]]
    for i in range(len(nodal) - 1):
        seq += [nodal[i], crit[i + 1]]
    seq.append(nodal[-1])
    if not all(a < b for a, b in zip(seq, seq[1:])):
        raise IntegrationFailure("nodal and critical radii do not interlace")
    signs = np.sign(prof.w_ext)
    if not all(signs[k] == (-1) ** k for k in range(len(signs))):
        raise IntegrationFailure("amplitudes do not alternate in sign")


def solve_henon(config: SolveConfig, base: RadialSolution | None = None) -> RadialSolution:
    """alpha > 0 solution ``((2+a)/2)^{2/(p-1)} u_p(r^{(2+a)/2})``.

    ``eps`` is the literal ``(p |u(s_i)|^{p-1})^{-1/2}`` evaluated on the
    Henon solution, which equals the Lane-Emden value divided by
    ``(2+alpha)/2``.
    """
    if config.alpha <= 0.0:
        raise InputError("solve_henon needs alpha > 0")
    if base is None:
        base = solve_lane_emden(config.lane_emden())
    elif base.alpha != 0.0 or base.p != config.p or base.m != config.m:
        raise InputError("base solution must be the alpha = 0 solution with the same p, m")
    a = 0.5 * (2.0 + config.alpha)
    log_c = 2.0 * math.log(a) / (config.p - 1.0)
    nodal = tuple(r ** (1.0 / a) for r in base.nodal_radii)
    crit = tuple(s ** (1.0 / a) for s in base.critical_radii)
    return RadialSolution(
        config,
        base.profile,
        base.log_u0 + log_c,
        nodal,
        crit,
        tuple(la + log_c for la in base.log_amplitudes),
        tuple(le - math.log(a) for le in base.log_eps),
        base.boundary_residual,
        dict(base.diagnostics),
    )


def solve(config: SolveConfig) -> RadialSolution:
    return solve_henon(config) if config.alpha > 0 else solve_lane_emden(config)


@dataclass(frozen=True, eq=False)
class RescaledProfile:
    """``u^i_p(x) = p (u(eps_i x) - u(s_i)) / u(s_i)`` on its zone domain."""

    i: int
    x: np.ndarray
    values: np.ndarray
    log_x_range: tuple[float, float]
    peak_x: float

    @property
    def domain(self) -> tuple[float, float]:
        lo, hi = self.log_x_range
        return (0.0 if lo == -math.inf else math.exp(lo), math.exp(hi))


def _zone_log_x(sol: RadialSolution, i: int) -> tuple[float, float]:
    prof = sol.profile
    shift = prof.tau_m + sol.log_eps[i]
    lo = -math.inf if i == 0 else float(prof.tau_zeros[i - 1] - shift)
    hi = float(prof.tau_zeros[i] - shift)
    return lo, hi


def rescaled_profile(sol: RadialSolution, i: int, n: int = 2001) -> RescaledProfile:
    """Rescaled zone profile, compared against the bubble ``Z_i``.

    The grid is uniform in ``log x`` (plus ``x = 0`` for the central zone);
    values are computed as ``p (w(rho)/w_i - 1)`` so no large amplitude is
    ever formed.
    """
    if sol.alpha != 0.0:
        raise InputError("rescaled profiles are defined on the alpha = 0 solution")
    if not 0 <= i < sol.m:
        raise InputError(f"zone index {i} outside 0..{sol.m - 1}")
    prof = sol.profile
    lo, hi = _zone_log_x(sol, i)
    shift = prof.tau_m + sol.log_eps[i]
    lo_eff = (prof.tau0 - shift - 2.0) if i == 0 else lo
    lx = np.linspace(lo_eff, hi, n)
    tau = lx + shift
    w = prof.w(tau)
    wi = prof.w_ext[i]
    vals = sol.p * (w / wi - 1.0)
    x = np.exp(lx)
    if i == 0:
        x = np.concatenate([[0.0], x])
        vals = np.concatenate([[0.0], vals])
    peak = 0.0 if i == 0 else math.exp(float(prof.tau_ext[i - 1] - shift))
    return RescaledProfile(i, x, vals, (lo, hi), peak)


def rescaled_values(sol: RadialSolution, i: int, x) -> np.ndarray:
    """Pointwise ``u^i_p(x)``; NaN outside the zone domain."""
    prof = sol.profile
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lo, hi = _zone_log_x(sol, i)
    shift = prof.tau_m + sol.log_eps[i]
    out = np.full_like(x, np.nan)
    with np.errstate(divide="ignore"):
        lx = np.log(x)
    ok = (lx >= lo) & (lx <= hi)
    out[ok] = sol.p * (prof.w(lx[ok] + shift) / prof.w_ext[i] - 1.0)
    return out


def rescaled_potential(sol: RadialSolution, i: int, x) -> np.ndarray:
    """``V^i_p(x) = eps_i^2 V_p(eps_i x)``, which simplifies to ``|w/w_i|^{p-1}``."""
    prof = sol.profile
    x = np.atleast_1d(np.asarray(x, dtype=float))
    shift = prof.tau_m + sol.log_eps[i]
    out = np.empty_like(x)
    pos = x > 0
    out[~pos] = abs(1.0 / prof.w_ext[i]) ** (sol.p - 1.0) if i == 0 else 0.0
    if pos.any():
        w = prof.w(np.log(x[pos]) + shift)
        with np.errstate(divide="ignore"):
            out[pos] = np.exp((sol.p - 1.0) * (np.log(np.abs(w)) - math.log(abs(prof.w_ext[i]))))
    return out


def good_set(sol: RadialSolution, K: float) -> list[tuple[float, float]]:
    """Intervals of ``G_p(K)`` in log-radius ``log r``; empty pieces dropped."""
    if not K >= 1:
        raise InputError("K must be >= 1")
    lk = math.log(K)
    le = sol.log_eps
    pieces = [(le[i] + lk, le[i + 1] - lk) for i in range(sol.m - 1)]
    pieces.append((le[-1] + lk, 0.0))
    return [(a, b) for a, b in pieces if a < b]


@dataclass(frozen=True, eq=False)
class FpProfile:
    r: np.ndarray
    values: np.ndarray
    max_value: float
    K: float | None = None
    max_on_good_set: float | None = None


def f_p_profile(sol: RadialSolution, K: float | None = None, n: int = 4001) -> FpProfile:
    """``f_p = p r^2 |u_p|^{p-1}`` on the sample grid, plus its sup on ``G_p(K)``."""
    r = sol.sample_grid()
    vals = sol.f(r)
    # the sample grid may miss the top of a narrow peak; add a fine log grid
    t = np.linspace((sol.profile.tau0 - sol.tau_m) / sol.scale, 0.0, n)
    peak = float(max(np.max(vals), np.max(sol.f(np.exp(t)))))
    g = None
    if K is not None:
        g = 0.0
        for a, b in good_set(sol, K):
            g = max(g, float(np.max(sol.f(np.exp(np.linspace(a, b, n))))))
        peak = max(peak, g)
    return FpProfile(r, vals, peak, K, g)
