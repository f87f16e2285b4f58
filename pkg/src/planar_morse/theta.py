"""Closed-form layer: Lambert W, the theta sequence, Liouville bubbles and
the explicit negative eigenpairs of the limit Sturm-Liouville problems.

All quantities live in double precision.  Large ``gamma_i`` overflow quickly
(``gamma_20`` is beyond 1e308), so every closure is evaluated through
``log_gamma`` and only the convenience property ``gamma`` may be ``inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import InputError, ToleranceFailure

__all__ = [
    "lambert_w0",
    "ThetaEntry",
    "ThetaTable",
    "theta_sequence",
    "BubbleProfile",
    "bubble",
    "LimitEigenfunction",
    "limit_eigenpair",
    "critical_alphas",
]

_BRANCH_POINT = -math.exp(-1.0)
_EPS = np.finfo(float).eps
LAMBERT_BRANCH = "W0"


def lambert_w0(x: float, precision: float = 1e-14, max_iter: int = 64) -> float:
    """Principal branch of the Lambert W function.

    Returns ``w >= -1`` with ``w * exp(w) = x``.  Halley iteration from a
    branch-point series or logarithmic seed; falls back to bisection when
    Halley stalls.  Convergence is declared when
    ``|w e^w - x| <= precision * max(1, |x|)`` or when the Newton step is at
    round-off level.

    Raises
    ------
    InputError
        If ``x < -1/e``.
    """
    x = float(x)
    if math.isnan(x):
        raise InputError("lambert_w0 of NaN")
    if x < _BRANCH_POINT:
        # tolerate the rounding of -1/e itself
        if x < _BRANCH_POINT * (1.0 + 4 * _EPS):
            raise InputError(f"lambert_w0 undefined for x={x!r} < -1/e")
        return -1.0
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return math.inf

    scale = precision * max(1.0, abs(x))
    if x < -0.32:
        q = math.sqrt(max(0.0, 2.0 * (math.e * x + 1.0)))
        w = -1.0 + q - q * q / 3.0 + 11.0 / 72.0 * q**3 - 43.0 / 540.0 * q**4
        if q < 1e-3:
            # Halley degenerates at w = -1; the series is exact to O(q^5)
            return w
    elif x < 3.0:
        w = math.log1p(x)
    else:
        lx = math.log(x)
        w = lx - math.log(lx)

    for _ in range(max_iter):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        if abs(f) <= scale:
            # a small residual still allows an O(f / (w+1)) error near the
            # branch point; one more step costs nothing and fixes it
            w_new = w - step
            return w_new if math.isfinite(w_new) and w_new >= -1.0 else w
        w_new = w - step
        if not math.isfinite(w_new) or w_new < -1.0:
            break
        if abs(step) <= 4 * _EPS * max(1.0, abs(w_new)):
            return w_new
        w = w_new
    return _lambert_bisect(x, scale)


def _lambert_bisect(x: float, scale: float) -> float:
    lo, hi = -1.0, max(1.0, math.log(max(x, 1.0)) + 1.0)
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        f = mid * math.exp(mid) - x
        if abs(f) <= scale or hi - lo <= 2 * _EPS * max(1.0, abs(mid)):
            return mid
        if f > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ThetaEntry:
    index: int
    theta: float
    log_gamma: float
    beta: float

    @property
    def gamma(self) -> float:
        try:
            return math.exp(self.log_gamma)
        except OverflowError:
            return math.inf

    @property
    def bounds_ok(self) -> bool:
        i = self.index
        if i == 0:
            return self.theta == 2.0
        return 8 * i + 2 < self.theta < 8 * i + 4


def _log_gamma(theta: float) -> float:
    if theta == 2.0:
        # removable singularity: ((t+2)/(t-2)) ((t^2-4)/2)^(t/2) -> 8 as t -> 2
        return math.log(8.0)
    return (
        math.log((theta + 2.0) / (theta - 2.0))
        + 0.5 * theta * math.log((theta * theta - 4.0) / 2.0)
    )


@dataclass(frozen=True)
class ThetaTable:
    """theta_i, gamma_i and beta_i = -(theta_i/2)^2 for i = 0..i_max."""

    entries: tuple[ThetaEntry, ...]
    precision: float
    lambert_branch: str = LAMBERT_BRANCH

    @property
    def i_max(self) -> int:
        return len(self.entries) - 1

    def _entry(self, i: int) -> ThetaEntry:
        if not 0 <= i <= self.i_max:
            raise InputError(f"index {i} outside table range 0..{self.i_max}")
        return self.entries[i]

    def theta(self, i: int) -> float:
        return self._entry(i).theta

    def gamma(self, i: int) -> float:
        return self._entry(i).gamma

    def log_gamma(self, i: int) -> float:
        return self._entry(i).log_gamma

    def beta(self, i: int) -> float:
        return self._entry(i).beta

    def invariants(self) -> dict[str, bool]:
        thetas = [e.theta for e in self.entries]
        betas = [e.beta for e in self.entries]
        return {
            "theta0_is_2": thetas[0] == 2.0,
            "theta_bounds": all(e.bounds_ok for e in self.entries),
            "beta_is_minus_half_theta_squared": all(
                e.beta == -((e.theta / 2.0) ** 2) for e in self.entries
            ),
            "beta0_is_minus_one": betas[0] == -1.0,
            "beta_strictly_decreasing": all(
                b1 < b0 for b0, b1 in zip(betas, betas[1:])
            ),
            "beta1_below_minus_25": len(betas) < 2 or betas[1] < -25.0,
            "gamma0_is_8": self.entries[0].log_gamma == math.log(8.0),
            "integer_part_half_theta": all(
                math.floor(e.theta / 2.0) == 4 * e.index + 1 for e in self.entries
            ),
        }

    def rows(self) -> list[dict]:
        return [
            {
                "i": e.index,
                "theta": e.theta,
                "gamma": e.gamma if math.isfinite(e.gamma) else None,
                "log_gamma": e.log_gamma,
                "beta": e.beta,
                "bounds_ok": e.bounds_ok,
            }
            for e in self.entries
        ]


def theta_sequence(i_max: int, precision: float = 1e-14) -> ThetaTable:
    """Build the theta table by the Lambert-W recursion.

    ``theta_0 = 2`` and ``theta_i = 2 / W0(a e^{-a}) + 2`` with
    ``a = 2 / (2 + theta_{i-1})``.  Only the principal branch puts
    theta_i inside ``(8i+2, 8i+4)``, which is verified for every entry.
    """
    if i_max < 0:
        raise InputError("i_max must be >= 0")
    if not precision > 0:
        raise InputError("precision must be positive")
    entries = [ThetaEntry(0, 2.0, _log_gamma(2.0), -1.0)]
    theta = 2.0
    for i in range(1, i_max + 1):
        a = 2.0 / (2.0 + theta)
        w = lambert_w0(a * math.exp(-a), precision=precision)
        theta = 2.0 / w + 2.0
        entry = ThetaEntry(i, theta, _log_gamma(theta), -((theta / 2.0) ** 2))
        if not entry.bounds_ok:
            raise ToleranceFailure(
                f"theta_{i}={theta!r} violates 8i+2 < theta_i < 8i+4; "
                "Lambert branch or precision is wrong"
            )
        entries.append(entry)
    return ThetaTable(tuple(entries), precision)


@dataclass(frozen=True)
class BubbleProfile:
    """Radial Liouville bubble Z_{alpha,i}.

    ``Z(r) = log(2 theta^2 gamma r^{a(theta-2)} / (gamma + r^{a theta})^2)``
    with ``a = (alpha + 2) / 2``.
    """

    alpha: float
    index: int
    theta: float
    log_gamma: float

    @property
    def gamma(self) -> float:
        return math.exp(self.log_gamma)

    @property
    def _a(self) -> float:
        return 0.5 * (self.alpha + 2.0)

    def __call__(self, r):
        return self.Z(r)

    def Z(self, r):
        r = np.asarray(r, dtype=float)
        a, th, lg = self._a, self.theta, self.log_gamma
        with np.errstate(divide="ignore"):
            lr = np.log(r)
        out = math.log(2.0 * th * th) + lg - 2.0 * np.logaddexp(lg, a * th * lr)
        if th != 2.0:
            out = out + a * (th - 2.0) * lr
        return out

    def density(self, r):
        """``exp(Z(r))``."""
        return np.exp(self.Z(r))

    def peak_radius(self) -> float:
        """Radius where Z vanishes: ``((theta^2 - 4)/2)^{1/(2a)}``."""
        if self.theta == 2.0:
            return 0.0
        return ((self.theta**2 - 4.0) / 2.0) ** (1.0 / (2.0 * self._a))

    def mass(self, epsrel: float = 1e-11) -> float:
        """``2 pi int_0^inf r exp(Z(r)) dr``.

        Split at the peak; the tail ``[r*, inf)`` is mapped by ``s = 1/r``
        onto ``(0, 1/r*]`` so no truncation is needed.
        """
        rs = self.peak_radius()
        if rs == 0.0:
            rs = math.sqrt(8.0)
        # the integrand is sharply peaked for large theta; hint the scale
        def inner(r):
            return r * float(self.density(r)) if r > 0 else 0.0

        def tail(s):
            if s <= 0:
                return 0.0
            r = 1.0 / s
            return r * float(self.density(r)) / (s * s)

        lo, _ = integrate.quad(inner, 0.0, rs, epsrel=epsrel, epsabs=0.0, limit=400,
                               points=[rs * (1 - 2.0 / self.theta)] if self.theta > 4 else None)
        hi, _ = integrate.quad(tail, 0.0, 1.0 / rs, epsrel=epsrel, epsabs=0.0, limit=400)
        return 2.0 * math.pi * (lo + hi)


def bubble(alpha: float, i: int, table: ThetaTable) -> BubbleProfile:
    if alpha < 0:
        raise InputError("alpha must be >= 0")
    return BubbleProfile(float(alpha), i, table.theta(i), table.log_gamma(i))


@dataclass(frozen=True)
class LimitEigenfunction:
    """eta^i(r) = sqrt(theta gamma) r^{theta/2} / (gamma + r^theta), beta = -(theta/2)^2.

    In ``s = theta (log r - log(gamma)/theta) / 2`` the function is
    ``sqrt(theta) / (2 cosh s)``; derivatives below use that form.
    """

    index: int
    theta: float
    log_gamma: float
    beta: float
    _bubble: BubbleProfile = field(repr=False, compare=False)

    def _s(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return 0.5 * (self.theta * np.log(r) - self.log_gamma)

    def __call__(self, r):
        s = self._s(r)
        return math.sqrt(self.theta) / (2.0 * np.cosh(s))

    def d_dlogr(self, r):
        s = self._s(r)
        sech = 1.0 / np.cosh(s)
        return -math.sqrt(self.theta) * self.theta / 4.0 * sech * np.tanh(s)

    def d2_dlogr2(self, r):
        s = self._s(r)
        sech = 1.0 / np.cosh(s)
        return math.sqrt(self.theta) / 2.0 * (self.theta / 2.0) ** 2 * (sech - 2.0 * sech**3)

    def derivative(self, r):
        return self.d_dlogr(r) / np.asarray(r, dtype=float)

    def residual(self, r):
        """Relative pointwise residual of ``-(r eta')' = r (e^Z + beta/r^2) eta``.

        Multiplying by ``r`` turns the equation into
        ``eta_tt + (r^2 e^Z + beta) eta = 0`` in ``t = log r``; the residual
        is scaled by the sum of the magnitudes of its three terms.
        """
        r = np.asarray(r, dtype=float)
        eta = self(r)
        lhs = self.d2_dlogr2(r)
        pot = r * r * self._bubble.density(r) * eta
        bet = self.beta * eta
        scale = np.abs(lhs) + np.abs(pot) + np.abs(bet)
        return np.abs(lhs + pot + bet) / np.where(scale > 0, scale, 1.0)

    def normalization(self, epsrel: float = 1e-12) -> float:
        """``int_0^inf r^{-1} eta^2 dr`` computed in ``t = log r``."""
        tc = self.log_gamma / self.theta
        c = math.sqrt(self.theta) / 2.0

        def f(t):
            x = 0.5 * self.theta * abs(t - tc)
            return 0.0 if x > 700 else (c / math.cosh(x)) ** 2
        a, _ = integrate.quad(f, -np.inf, tc, epsrel=epsrel, epsabs=0.0, limit=200)
        b, _ = integrate.quad(f, tc, np.inf, epsrel=epsrel, epsabs=0.0, limit=200)
        return a + b


def limit_eigenpair(i: int, table: ThetaTable) -> LimitEigenfunction:
    e = table._entry(i)
    return LimitEigenfunction(i, e.theta, e.log_gamma, e.beta, bubble(0.0, i, table))


def critical_alphas(i: int, n_max: int, table: ThetaTable) -> list[float]:
    """Positive values ``4n/theta_i - 2`` for ``n = 1..n_max``, ascending."""
    if i < 1:
        raise InputError("critical alphas are defined for i >= 1")
    th = table.theta(i)
    return [4.0 * n / th - 2.0 for n in range(1, n_max + 1) if 4.0 * n / th - 2.0 > 0]
