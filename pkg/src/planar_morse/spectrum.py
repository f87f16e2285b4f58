"""Negative eigenvalues of the singular radial problem

    -(r psi')' = r (V_p + nu / r^2) psi   on (0, 1),  psi(1) = 0,

with ``V_p = p |u_p|^{p-1}``.  In ``tau = log rho`` (normalized radius, see
:mod:`planar_morse.radial`) this is the Schroedinger problem

    -psi_tt - f(tau) psi = nu psi,   tau in (-inf, tau_m),

with ``f = p e^{2 tau} |w|^{p-1}`` and ``int r^{-1} psi^2 dr = int psi^2 dtau``.

Two independent methods:

* shooting with a Pruefer phase.  The end phase ``phi(tau_m; nu)`` counts
  eigenvalues below ``nu`` (``floor(phi/pi)``) and ``phi = j pi`` marks the
  j-th one, whose eigenfunction has ``j - 1`` interior zeros.  Many ``nu``
  share one integration, so multisection costs one solve per round.
* a Galerkin oracle: P1 elements on a uniform tau mesh with lumped mass,
  i.e. a symmetric tridiagonal pencil, Richardson-extrapolated in h.

``nu_m`` approaches -1 exponentially fast in p and soon sits closer to -1
than any bracket can resolve.  Since ``u_p'`` solves the problem at
``nu = -1`` exactly (``psi_0 = e^{-tau} w_tau``), Green's identity gives

    nu_m + 1 = -psi_0(tau_m) psi_t(tau_m) / int psi psi_0 dtau,

evaluated in log form, which keeps full relative precision of the gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import simpson, solve_ivp
from scipy.linalg import eigh_tridiagonal
from scipy.special import logsumexp

from .errors import (
    BracketFailure,
    ConvergenceFailure,
    IndexMismatch,
    InputError,
    IntegrationFailure,
)
from .radial import RadialSolution, solve_lane_emden
from .theta import ThetaTable, limit_eigenpair, theta_sequence

__all__ = [
    "ShootingOptions",
    "GalerkinMesh",
    "SingularSpectrum",
    "RescaledEigenfunction",
    "end_phases",
    "eigenvalue_count",
    "eigenvalues_shooting",
    "eigenvalues_galerkin",
    "map_henon_spectrum",
    "rescale_eigenfunction",
]

_EXP_CLIP = 700.0


@dataclass(frozen=True)
class ShootingOptions:
    rtol: float = 1e-11
    atol: float = 1e-12
    nu_tol: float = 1e-9
    samples: int = 24
    per_bracket: int = 8
    max_rounds: int = 40
    max_expansions: int = 4
    grid_step: float = 0.005
    max_grid: int = 60001
    eigenfunctions: bool = True


@dataclass(frozen=True)
class GalerkinMesh:
    """Uniform tau mesh parameters.

    ``h0`` is the coarsest step; level ``k`` uses ``h0 / 2^k``.  Richardson
    extrapolation over ``levels`` consecutive steps is repeated with one more
    level until two extrapolants agree to ``tol`` relative.
    """

    h0: float = 0.04
    levels: int = 3
    max_levels: int = 5
    tol: float = 1e-9
    delta: float | None = None
    delta_tol: float = 1e-9
    max_halvings: int = 8
    eigenvectors: bool = True


@dataclass(frozen=True, eq=False)
class SingularSpectrum:
    """Eigenvalues ``nu_1 < ... < nu_n`` with eigenfunctions on a log grid.

    ``log_r`` is the grid in ``log r`` (r the physical radius) and row ``j-1``
    of ``eigenfunctions`` is ``psi_j`` there, normalized in ``int r^{-1}
    psi^2 dr``.  ``gap`` estimates ``nu_m + ((2+alpha)/2)^2`` through
    Green's identity; ``gap_status`` is ``"resolved"`` when that estimate is
    trustworthy.
    """

    p: float
    m: int
    alpha: float
    method: str
    eigenvalues: tuple[float, ...]
    zero_counts: tuple[int, ...]
    log_r: np.ndarray | None = field(default=None, repr=False)
    eigenfunctions: np.ndarray | None = field(default=None, repr=False)
    weights: np.ndarray | None = field(default=None, repr=False)
    gap: float | None = None
    log_gap: float | None = None
    gap_status: str = "unresolved"
    residuals: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def scale(self) -> float:
        return 0.5 * (2.0 + self.alpha)

    @property
    def threshold(self) -> float:
        """``-((2+alpha)/2)^2``, the value separating nu_{m-1} from nu_m."""
        return -self.scale**2

    def gap_sign(self) -> int:
        """Sign of ``nu_m - threshold``, preferring the Green's identity value."""
        if self.gap_status == "resolved" and self.gap is not None:
            return int(np.sign(self.gap))
        return int(np.sign(self.eigenvalues[-1] - self.threshold))

    def ordering_ok(self) -> bool:
        nu = self.eigenvalues
        if len(nu) != self.m:
            return False
        if not all(a < b for a, b in zip(nu, nu[1:])):
            return False
        if nu[-1] >= 0:
            return False
        if self.m > 1 and not nu[-2] < self.threshold:
            return False
        return self.gap_sign() > 0

    def norms(self) -> np.ndarray:
        return self.gram().diagonal().copy()

    def gram(self) -> np.ndarray:
        """``int r^{-1} psi_j psi_h dr`` on the log grid.

        Uses the method's own quadrature ``weights`` when present (the lumped
        mass for the Galerkin oracle) and Simpson's rule otherwise.
        """
        if self.eigenfunctions is None:
            raise InputError("spectrum carries no eigenfunctions")
        E = self.eigenfunctions
        if self.weights is not None:
            return (E * self.weights) @ E.T
        n = E.shape[0]
        G = np.empty((n, n))
        for a in range(n):
            for b in range(a, n):
                G[a, b] = G[b, a] = simpson(E[a] * E[b], x=self.log_r)
        return G

    def orthogonality_error(self) -> float:
        G = self.gram()
        return float(np.max(np.abs(G - np.eye(G.shape[0]))))

    def psi(self, j: int, r) -> np.ndarray:
        """Linear interpolation of ``psi_j`` in ``log r``; zero outside the grid."""
        if self.eigenfunctions is None:
            raise InputError("spectrum carries no eigenfunctions")
        r = np.atleast_1d(np.asarray(r, dtype=float))
        with np.errstate(divide="ignore"):
            lr = np.log(r)
        return np.interp(lr, self.log_r, self.eigenfunctions[j - 1], left=0.0, right=0.0)


# ---------------------------------------------------------------------------
# Pruefer phase bundle


def _series_start(p: float, t0: float):
    r2 = math.exp(2.0 * t0)
    return 1.0 - r2 / 4.0 + p * r2 * r2 / 64.0, -r2 / 2.0 + p * r2 * r2 / 16.0


def _start_tau(p: float, kappa_min: float) -> float:
    # f(t0) ~ p e^{2 t0} = 1e-15 kappa^2, so the dropped potential is negligible
    return 0.5 * math.log(1e-15 * max(kappa_min, 1e-3) ** 2 / p)


def end_phases(sol: RadialSolution, nus, rtol: float = 1e-11, atol: float = 1e-12) -> np.ndarray:
    """Pruefer end phase ``phi(tau_m; nu)`` for each ``nu <= 0`` in one pass.

    The state is ``[w, w_t, phi_1, ..., phi_N]``; ``phi`` obeys
    ``phi' = cos^2 phi + (f - kappa^2) sin^2 phi`` from the regular start
    ``psi ~ e^{kappa tau}``, i.e. ``phi_0 = arctan(1/kappa)``.
    """
    nus = np.atleast_1d(np.asarray(nus, dtype=float))
    if np.any(nus > 0):
        raise InputError("only nu <= 0 is supported")
    p = sol.p
    k2 = -nus
    kap = np.sqrt(k2)
    t0 = _start_tau(p, float(kap.min()))
    w0, wt0 = _series_start(p, t0)
    phi0 = np.arctan2(1.0, kap)
    tend = sol.tau_m

    def rhs(t, y):
        w = y[0]
        aw = abs(w)
        out = np.empty_like(y)
        out[0] = y[1]
        if aw > 0.0:
            lg = 2.0 * t + (p - 1.0) * math.log(aw)
            f = p * math.exp(min(lg, _EXP_CLIP))
            out[1] = -math.copysign(f / p * aw, w)
        else:
            f = 0.0
            out[1] = 0.0
        s = np.sin(y[2:])
        c = np.cos(y[2:])
        out[2:] = c * c + (f - k2) * s * s
        return out

    y0 = np.concatenate([[w0, wt0], phi0])
    with np.errstate(over="ignore", invalid="ignore"):
        res = solve_ivp(rhs, (t0, tend), y0, method="DOP853", rtol=rtol, atol=atol)
    if res.status != 0:
        raise IntegrationFailure(f"phase integration failed: {res.message}")
    return res.y[2:, -1]


def eigenvalue_count(sol: RadialSolution, nu: float, **kw) -> int:
    """Number of eigenvalues strictly below ``nu``."""
    return int(math.floor(end_phases(sol, [nu], **kw)[0] / math.pi))


def _counts(phi: np.ndarray) -> np.ndarray:
    return np.floor(phi / math.pi).astype(int)


# ---------------------------------------------------------------------------
# eigenfunctions by two-sided shooting


def _shoot(sol: RadialSolution, nu: float, grid: np.ndarray, opts: ShootingOptions):
    """Forward and backward Pruefer shots evaluated on ``grid``.

    Returns ``(phi_F, lnrho_F, phi_B, lnrho_B)``.  The forward shot starts at
    ``psi = e^{kappa tau}``; the backward shot at ``psi(tau_m) = 0``,
    ``psi_t(tau_m) = 1``.
    """
    p = sol.p
    prof = sol.profile
    k2 = -nu
    kap = math.sqrt(k2)
    t0 = grid[0]
    w0, wt0 = _series_start(p, t0)

    def fwd(t, y):
        w = y[0]
        aw = abs(w)
        if aw > 0.0:
            f = p * math.exp(min(2.0 * t + (p - 1.0) * math.log(aw), _EXP_CLIP))
            acc = -math.copysign(f / p * aw, w)
        else:
            f = acc = 0.0
        s, c = math.sin(y[2]), math.cos(y[2])
        q = f - k2
        return [y[1], acc, c * c + q * s * s, s * c * (1.0 - q)]

    y0 = [w0, wt0, math.atan2(1.0, kap), kap * t0 + 0.5 * math.log1p(k2)]
    with np.errstate(over="ignore", invalid="ignore"):
        F = solve_ivp(fwd, (t0, grid[-1]), y0, method="DOP853", rtol=opts.rtol,
                      atol=opts.atol, t_eval=grid)
    if F.status != 0 or F.y.shape[1] != len(grid):
        raise IntegrationFailure(f"forward shot failed at nu={nu}: {F.message}")

    def fq(t):
        return float(prof.f(t)[0]) - k2

    def bwd(t, y):
        s, c = math.sin(y[0]), math.cos(y[0])
        q = fq(t)
        return [c * c + q * s * s, s * c * (1.0 - q)]

    B = solve_ivp(bwd, (grid[-1], grid[0]), [0.0, 0.0], method="DOP853",
                  rtol=opts.rtol, atol=opts.atol, t_eval=grid[::-1])
    if B.status != 0 or B.y.shape[1] != len(grid):
        raise IntegrationFailure(f"backward shot failed at nu={nu}: {B.message}")
    return F.y[2], F.y[3], B.y[0][::-1], B.y[1][::-1]


def _eigenfunction(sol, nu, grid, f_grid, opts):
    """Patched, normalized eigenfunction on ``grid`` and the log-scale data
    needed for the gap: returns ``(psi, log_abs_psi, sign, log_dpsi_end)``
    where ``log_dpsi_end`` is ``log |psi_t(tau_m)|`` after normalization."""
    phF, lrF, phB, lrB = _shoot(sol, nu, grid, opts)
    allowed = np.nonzero(f_grid > -nu)[0]
    if len(allowed) == 0:
        allowed = np.arange(len(grid) - 1)
    cand = allowed[allowed < len(grid) - 1]
    k = int(cand[np.argmin(np.abs(np.sin(phF[cand] - phB[cand])))])
    # psi_F = C psi_B; rho_F = |C| rho_B and phi_F = phi_B + n pi
    n = int(round((phF[k] - phB[k]) / math.pi))
    sgnC = -1.0 if n % 2 else 1.0
    logC = lrF[k] - lrB[k]
    with np.errstate(divide="ignore"):
        lpF = lrF + np.log(np.abs(np.sin(phF)))
        lpB = lrB + np.log(np.abs(np.sin(phB))) + logC
    sgn = np.where(np.arange(len(grid)) <= k, np.sign(np.sin(phF)), sgnC * np.sign(np.sin(phB)))
    lp = np.where(np.arange(len(grid)) <= k, lpF, lpB)
    lp[-1] = -np.inf
    # log of int psi^2 dtau with Simpson weights
    h = grid[1] - grid[0]
    wts = np.full(len(grid), 2.0)
    wts[1:-1:2] = 4.0
    wts[0] = wts[-1] = 1.0
    lognorm = logsumexp(2.0 * lp + np.log(wts * h / 3.0))
    lp = lp - 0.5 * lognorm
    psi = sgn * np.exp(lp)
    # backward shot had psi_t(tau_m) = 1 before scaling by C and normalization
    log_dpsi_end = logC - 0.5 * lognorm
    dpsi_sign = sgnC
    return psi, lp, sgn, log_dpsi_end, dpsi_sign, k


def _zero_count(sgn: np.ndarray) -> int:
    s = sgn[:-1]
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def _green_gap(sol, grid, psi, log_dpsi_end, dpsi_sign):
    """``nu_m + 1`` from Green's identity against ``psi_0 = e^{-tau} w_tau``.

    ``psi_0`` is rescaled by ``e^{tau_m}`` to stay in range.  Returns
    ``(gap, log_abs_gap)``.
    """
    tend = grid[-1]
    wt = sol.profile.w_tau(grid)
    psi0 = np.exp(tend - grid) * wt
    integ = simpson(psi * psi0, x=grid)
    psi0_end = float(sol.profile.w_tau(tend)[0])
    if integ == 0.0 or psi0_end == 0.0:
        return None, None
    log_gap = math.log(abs(psi0_end)) + log_dpsi_end - math.log(abs(integ))
    sign = -np.sign(psi0_end) * dpsi_sign * np.sign(integ)
    gap = float(sign * math.exp(log_gap)) if log_gap > -745 else float(sign * 0.0)
    return gap, float(log_gap) if sign > 0 else None


# ---------------------------------------------------------------------------
# shooting driver


def _search_window(m: int, table: ThetaTable | None) -> float:
    table = table or theta_sequence(max(m - 1, 0))
    return -1.5 * (table.theta(m - 1) / 2.0) ** 2


def _lane_emden_base(sol: RadialSolution) -> RadialSolution:
    if sol.alpha == 0.0:
        return sol
    return solve_lane_emden(sol.config.lane_emden())


def eigenvalues_shooting(sol: RadialSolution, j_max: int | None = None,
                         options: ShootingOptions | None = None,
                         table: ThetaTable | None = None) -> SingularSpectrum:
    """Eigenvalues ``nu_1..nu_{j_max}`` by Pruefer-phase multisection.

    A Henon solution is handled by solving its Lane-Emden partner and
    applying :func:`map_henon_spectrum`.
    """
    if sol.alpha != 0.0:
        spec = eigenvalues_shooting(_lane_emden_base(sol), j_max, options, table)
        return map_henon_spectrum(spec, sol.alpha)
    opts = options or ShootingOptions()
    m = sol.m
    j_max = m if j_max is None else int(j_max)
    if not 1 <= j_max <= m:
        raise InputError(f"j_max must lie in 1..{m}")
    ph = lambda nus: end_phases(sol, nus, opts.rtol, opts.atol)

    nu_lo = _search_window(m, table)
    for _ in range(opts.max_expansions + 1):
        samples = np.unique(np.concatenate(
            [np.linspace(nu_lo, 0.0, opts.samples), [-1.0, 0.0]]))
        phis = ph(samples)
        cnt = _counts(phis)
        if cnt[0] == 0:
            break
        nu_lo *= 2.0
    else:
        raise BracketFailure(f"eigenvalues below the search floor {nu_lo}")
    total = int(cnt[-1])
    if total < m:
        raise BracketFailure(f"found {total} negative eigenvalues, expected {m}")
    if total > m:
        raise IndexMismatch(f"found {total} negative eigenvalues, expected {m}")

    xs = list(samples)
    ps = list(phis)
    brackets = {}
    for j in range(1, j_max + 1):
        brackets[j] = _bracket(xs, ps, j)
    for rnd in range(opts.max_rounds):
        todo = [j for j, (a, b, _, _) in brackets.items()
                if b - a > opts.nu_tol * max(1.0, abs(0.5 * (a + b)))]
        if not todo:
            break
        new = np.concatenate([np.linspace(brackets[j][0], brackets[j][1],
                                          opts.per_bracket + 2)[1:-1] for j in todo])
        new_ph = ph(new)
        xs.extend(new.tolist())
        ps.extend(new_ph.tolist())
        for j in todo:
            brackets[j] = _bracket(xs, ps, j)
    else:
        raise BracketFailure("multisection did not converge")

    nus, widths, misses = [], [], []
    for j in range(1, j_max + 1):
        a, b, pa, pb = brackets[j]
        # linear interpolation of the phase miss inside the final bracket
        t = (j * math.pi - pa) / (pb - pa) if pb != pa else 0.5
        nus.append(a + min(max(t, 0.0), 1.0) * (b - a))
        widths.append(b - a)
        misses.append(max(abs(pa - j * math.pi), abs(pb - j * math.pi)))
    if not all(x < y for x, y in zip(nus, nus[1:])):
        raise IndexMismatch(f"eigenvalues not increasing: {nus}")

    gap = log_gap = None
    status = "unresolved"
    psi_rows = []
    zc = []
    log_r = None
    patch = []
    if opts.eigenfunctions:
        t0 = _start_tau(sol.p, math.sqrt(-nus[-1]) if nus[-1] < 0 else 1e-3)
        n = int(min(opts.max_grid, max(2001, (sol.tau_m - t0) / opts.grid_step)))
        n += 1 - n % 2
        grid = np.linspace(t0, sol.tau_m, n)
        fg = sol.profile.f(grid)
        for j, nu in enumerate(nus, start=1):
            psi, lp, sgn, ldp, dsg, k = _eigenfunction(sol, nu, grid, fg, opts)
            psi_rows.append(psi)
            zc.append(_zero_count(sgn))
            patch.append(float(grid[k]))
            if j == m:
                gap, log_gap = _green_gap(sol, grid, psi, ldp, dsg)
        log_r = grid - sol.tau_m
        if any(z != j - 1 for j, z in enumerate(zc, start=1)):
            raise IndexMismatch(f"zero counts {zc} do not match indices 1..{j_max}")
        if gap is not None:
            # the bracket value must agree with -1 + gap to bracket accuracy
            tol = 10 * opts.nu_tol * max(1.0, abs(nus[-1]))
            if abs(nus[-1] - (-1.0 + gap)) <= tol:
                status = "resolved"
                nus[-1] = -1.0 + gap
    else:
        zc = list(range(j_max))

    return SingularSpectrum(
        p=sol.p, m=m, alpha=0.0, method="shooting",
        eigenvalues=tuple(float(x) for x in nus),
        zero_counts=tuple(zc),
        log_r=log_r,
        eigenfunctions=np.array(psi_rows) if psi_rows else None,
        gap=gap, log_gap=log_gap, gap_status=status,
        residuals={"bracket_width": widths, "phase_miss": misses},
        meta={"rtol": opts.rtol, "atol": opts.atol, "nu_tol": opts.nu_tol,
              "search_floor": nu_lo, "phase_evaluations": len(xs),
              "patch_tau": patch},
    )


def _bracket(xs, ps, j):
    order = np.argsort(xs)
    x = np.asarray(xs)[order]
    c = _counts(np.asarray(ps)[order])
    hi = int(np.argmax(c >= j))
    if c[hi] < j or hi == 0:
        raise BracketFailure(f"no bracket for eigenvalue {j}")
    ph = np.asarray(ps)[order]
    return float(x[hi - 1]), float(x[hi]), float(ph[hi - 1]), float(ph[hi])


# ---------------------------------------------------------------------------
# Galerkin oracle


def _mesh(sol, t_left, h, level):
    """Piecewise uniform tau mesh with the nodes of w as breakpoints.

    ``|w|^{p-1}`` is not smooth across a node of w (for p < 3), so the nodes
    sit on mesh points; each segment is split into ``2^level`` times its
    base count of equal cells.
    """
    brk = [t_left] + [float(t) for t in sol.profile.tau_zeros[:-1] if t > t_left] + [sol.tau_m]
    parts = []
    for lo, hi in zip(brk, brk[1:]):
        n = max(2, int(math.ceil((hi - lo) / h))) * 2**level
        parts.append(np.linspace(lo, hi, n + 1)[:-1])
    parts.append([sol.tau_m])
    return np.concatenate(parts)


def _assemble(sol, t):
    """Symmetrized lumped P1 pencil on nodes ``t`` (Dirichlet at both ends).

    Stiffness ``int psi_t^2`` and lumped masses ``M_k`` for both
    ``int f psi^2`` and ``int psi^2``; returns the diagonal and off-diagonal
    of ``M^{-1/2} (K - M F) M^{-1/2}``, ``sqrt(M)`` and the interior nodes.
    """
    hs = np.diff(t)
    ti = t[1:-1]
    M = 0.5 * (hs[:-1] + hs[1:])
    kd = 1.0 / hs[:-1] + 1.0 / hs[1:]
    ko = -1.0 / hs[1:-1]
    sq = np.sqrt(M)
    d = kd / M - sol.profile.f(ti)
    e = ko / (sq[:-1] * sq[1:])
    return d, e, sq, ti


def _fd_level(sol, t_left, h, level, nu_floor, vectors):
    t = _mesh(sol, t_left, h, level)
    d, e, sq, ti = _assemble(sol, t)
    if vectors:
        vals, vecs = eigh_tridiagonal(d, e, select="v", select_range=(nu_floor, 0.0))
        return vals, vecs / sq[:, None], (d, e, sq, t)
    vals = eigh_tridiagonal(d, e, eigvals_only=True, select="v", select_range=(nu_floor, 0.0))
    return vals, None, (d, e, sq, t)


def _richardson(levels: list[np.ndarray]) -> np.ndarray:
    T = [np.asarray(v) for v in levels]
    for k in range(1, len(levels)):
        f = 4.0**k
        T = [(f * T[i + 1] - T[i]) / (f - 1.0) for i in range(len(T) - 1)]
    return T[-1]


def _fd_gap(sol, t, sq, vec):
    """Discrete Green's identity for ``nu_m + 1`` with a mesh eigenvector."""
    tend = sol.tau_m
    ti = t[1:-1]
    h = t[-1] - t[-2]
    psi0 = np.exp(tend - ti) * sol.profile.w_tau(ti)
    dpsi_end = (-4.0 * vec[-1] + vec[-2]) / (2.0 * h)
    psi0_end = float(sol.profile.w_tau(tend)[0])
    integ = float(np.sum(sq * sq * vec * psi0))
    return -psi0_end * dpsi_end / integ


def _sign_pattern(d: np.ndarray, e: np.ndarray, lam: float) -> np.ndarray:
    """Sign pattern of the forward solution of ``(T - lam) v = 0``, ``v_1 > 0``.

    For a Jacobi matrix with negative off-diagonal the ratio ``v_{k+1}/v_k``
    has the sign of the LDL^T pivot ``D_k`` of ``T - lam``.  Just below an
    eigenvalue this is the eigenvector's sign pattern, and the pivot
    recursion stays reliable where the vector itself is far below round-off.
    """
    e2 = (e * e).tolist()
    out = np.empty(len(d))
    s = 1.0
    piv = 1.0
    tiny = np.finfo(float).tiny
    for k, dk in enumerate((d - lam).tolist()):
        out[k] = s
        piv = dk - (e2[k - 1] / piv if k else 0.0)
        if piv == 0.0:
            piv = -tiny
        if piv < 0.0:
            s = -s
    return out


def eigenvalues_galerkin(sol: RadialSolution, mesh: GalerkinMesh | None = None,
                         table: ThetaTable | None = None) -> SingularSpectrum:
    """Negative eigenvalues from P1 elements with lumped mass on [delta, 1].

    The mesh is uniform in ``log r`` between the nodes of u (log-graded in r)
    with Dirichlet ends; levels ``h0 / 2^k`` are combined by Richardson
    extrapolation.  The inner cutoff ``delta`` is chosen so the regular
    decay ``(delta/eps_0)^{2 kappa}`` is below 1e-13 for the smallest
    ``kappa`` and then confirmed by halving.
    """
    if sol.alpha != 0.0:
        spec = eigenvalues_galerkin(_lane_emden_base(sol), mesh, table)
        return map_henon_spectrum(spec, sol.alpha)
    mesh = mesh or GalerkinMesh()
    m = sol.m
    nu_floor = 2.0 * _search_window(m, table)
    # eps_0 in normalized tau is -0.5 log p
    tau_eps0 = -0.5 * math.log(sol.p)
    h0 = mesh.h0

    # the O(h^2) bias can push a near-zero continuum mode below 0 on coarse
    # meshes of sharply peaked potentials; refine the base step until the
    # coarsest level already sees exactly m eigenvalues
    for _ in range(4):
        pilot = _fd_level(sol, tau_eps0 - 20.0, h0, 0, nu_floor, False)[0]
        if len(pilot) == m:
            break
        h0 *= 0.5
    else:
        raise ConvergenceFailure(f"coarse mesh keeps {len(pilot)} eigenvalues, expected {m}")

    def extrapolate(t_left):
        lv = mesh.levels
        levels = []
        for k in range(mesh.max_levels):
            vals = _fd_level(sol, t_left, h0, k, nu_floor, False)[0]
            if len(vals) != m:
                raise ConvergenceFailure(
                    f"mesh level {k} has {len(vals)} negative eigenvalues, expected {m}")
            levels.append(vals)
            if k + 1 == lv:
                prev = _richardson(levels)
            elif k + 1 > lv:
                cur = _richardson(levels[-lv:])
                if np.max(np.abs(cur - prev) / np.maximum(1.0, np.abs(cur))) <= mesh.tol:
                    return cur, levels, k + 1
                prev = cur
        raise ConvergenceFailure("mesh refinement did not stabilize")

    if mesh.delta is not None:
        t_left = math.log(mesh.delta) + sol.tau_m
    else:
        kmin = math.sqrt(max(-float(pilot[-1]), 1e-6))
        t_left = tau_eps0 - 13.0 * math.log(10.0) / (2.0 * kmin) - 2.0
    nu, levels, used = extrapolate(t_left)
    for _ in range(mesh.max_halvings):
        t2 = t_left - math.log(2.0)
        nu2, levels2, used2 = extrapolate(t2)
        change = np.max(np.abs(nu2 - nu) / np.maximum(1.0, np.abs(nu2)))
        t_left, nu, levels, used = t2, nu2, levels2, used2
        if change <= mesh.delta_tol:
            break
    else:
        raise ConvergenceFailure("inner cutoff continuation did not stabilize")

    gaps = []
    zc = []
    psi_rows = None
    log_r = None
    if mesh.eigenvectors:
        for k in range(used - mesh.levels, used):
            vals, vecs, (d, e, sq, t) = _fd_level(sol, t_left, h0, k, nu_floor, True)
            gaps.append(_fd_gap(sol, t, sq, vecs[:, m - 1]))
        for j in range(m):
            below = vals[j - 1] if j > 0 else vals[j] - 1.0
            lam = vals[j] - 1e-3 * (vals[j] - below)
            pattern = _sign_pattern(d, e, lam)
            zc.append(int(np.count_nonzero(pattern[1:] != pattern[:-1])))
            k = int(np.argmax(np.abs(vecs[:, j])))
            # first lobe positive: the pattern starts at +1
            if np.sign(vecs[k, j]) != pattern[k]:
                vecs[:, j] = -vecs[:, j]
        psi_rows = np.vstack([np.zeros(m), vecs, np.zeros(m)]).T
        log_r = t - sol.tau_m
        if any(z != j for j, z in enumerate(zc)):
            raise IndexMismatch(f"zero counts {zc} do not match indices 1..{m}")
    else:
        zc = list(range(m))

    gap = log_gap = None
    status = "unresolved"
    if gaps:
        g = float(_richardson(gaps))
        # trust the discrete identity only while it is consistent across levels
        if g > 0 and all(x > 0 for x in gaps) and abs(gaps[-1] - g) <= 0.1 * g:
            gap, log_gap, status = g, math.log(g), "resolved"
    if status != "resolved" and float(nu[-1]) + 1.0 > 1e-7:
        gap, status = float(nu[-1]) + 1.0, "resolved"
        log_gap = math.log(gap)

    nus = [float(x) for x in nu]
    if status == "resolved" and abs(nus[-1] + 1.0) < 1e-7:
        nus[-1] = -1.0 + gap
    finest = _mesh(sol, t_left, h0, used - 1)
    return SingularSpectrum(
        p=sol.p, m=m, alpha=0.0, method="galerkin",
        eigenvalues=tuple(nus), zero_counts=tuple(zc),
        log_r=log_r, eigenfunctions=psi_rows,
        weights=None if psi_rows is None else np.concatenate([[0.0], sq * sq, [0.0]]),
        gap=gap, log_gap=log_gap, gap_status=status,
        residuals={"levels_used": used, "fd_gaps": [float(x) for x in gaps]},
        meta={"h0": h0, "finest_h": float(np.max(np.diff(finest))),
              "nodes": int(len(finest)), "delta": math.exp(t_left - sol.tau_m),
              "tol": mesh.tol, "raw_finest": [float(x) for x in levels[used - 1]]},
    )


# ---------------------------------------------------------------------------
# Henon map and rescaled eigenfunctions


def map_henon_spectrum(spec: SingularSpectrum, alpha: float) -> SingularSpectrum:
    """``nu^alpha_j = ((2+alpha)/2)^2 nu_j`` with ``psi^alpha(r) = sqrt(a) psi(r^a)``."""
    if spec.alpha != 0.0:
        raise InputError("map_henon_spectrum expects an alpha = 0 spectrum")
    if alpha < 0:
        raise InputError("alpha must be >= 0")
    if alpha == 0.0:
        return spec
    a = 0.5 * (2.0 + alpha)
    a2 = a * a
    return replace(
        spec,
        alpha=float(alpha),
        eigenvalues=tuple(a2 * x for x in spec.eigenvalues),
        log_r=None if spec.log_r is None else spec.log_r / a,
        eigenfunctions=None if spec.eigenfunctions is None else spec.eigenfunctions * math.sqrt(a),
        weights=None if spec.weights is None else spec.weights / a,
        gap=None if spec.gap is None else a2 * spec.gap,
        log_gap=None if spec.log_gap is None else spec.log_gap + math.log(a2),
        meta={**spec.meta, "henon_factor": a2},
    )


@dataclass(frozen=True, eq=False)
class RescaledEigenfunction:
    j: int
    i: int
    x: np.ndarray
    values: np.ndarray
    amplitude: float
    fit_residual: float
    window: tuple[float, float]


def rescale_eigenfunction(spec: SingularSpectrum, sol: RadialSolution, j: int, i: int,
                          K: float = 10.0, n: int = 801,
                          table: ThetaTable | None = None) -> RescaledEigenfunction:
    """``psi^i_j(x) = psi_j(eps_i x)`` and the least-squares ``A`` in ``A eta^i``.

    The fit uses ``n`` points uniform in ``log x`` on ``[1/K, K]``; the
    residual is ``||psi - A eta|| / ||eta||`` in that discrete norm.
    """
    if spec.eigenfunctions is None or spec.alpha != 0.0 or sol.alpha != 0.0:
        raise InputError("needs an alpha = 0 spectrum with eigenfunctions")
    if not (1 <= j <= len(spec.eigenvalues) and 0 <= i < sol.m):
        raise InputError("index out of range")
    table = table or theta_sequence(sol.m)
    eta = limit_eigenpair(i, table)
    lx = np.linspace(-math.log(K), math.log(K), n)
    lr = lx + sol.log_eps[i]
    vals = np.interp(lr, spec.log_r, spec.eigenfunctions[j - 1], left=0.0, right=0.0)
    x = np.exp(lx)
    e = eta(x)
    A = float(np.dot(vals, e) / np.dot(e, e))
    res = float(np.linalg.norm(vals - A * e) / np.linalg.norm(e))
    return RescaledEigenfunction(j, i, x, vals, A, res, (1.0 / K, K))
