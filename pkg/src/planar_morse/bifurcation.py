"""Degeneracy crossings ``nu^alpha_j(p) = -k^2`` along the p axis.

Branch identity comes from the Pruefer end phase: ``nu_j < -k^2`` exactly
when ``phi(tau_m; -k^2) > j pi``, i.e. when at least ``j`` eigenfunctions
(with ``0..j-1`` interior zeros) lie below ``-k^2``.  The function
``g(p) = phi(tau_m; -k^2) - j pi`` is continuous in p and vanishes at a
crossing, so it is sampled, bracketed and refined with ``brentq``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy.optimize import brentq

from .errors import (
    BracketFailure,
    InputError,
    NearResonanceWarning,
    PlanarMorseError,
    ToleranceFailure,
)
from .morse import morse_from_spectrum
from .parallel import pmap
from .radial import P_CAP, SolveConfig, solve
from .spectrum import ShootingOptions, eigenvalues_shooting, end_phases
from .theta import theta_sequence

__all__ = [
    "CrossingRecord",
    "ScanResult",
    "scan_crossings",
    "morse_change_points",
    "MorseTransitions",
    "DEFAULT_P_RANGE",
]

DEFAULT_P_RANGE = (1.05, float(P_CAP))
N_INITIAL = 32
RESIDUAL_RTOL = 1e-6


@dataclass(frozen=True)
class CrossingRecord:
    m: int
    alpha: float
    j: int
    k: int
    p_star: float
    p_lo: float
    p_hi: float
    residual: float
    direction: str      # "down": nu_j decreases through -k^2 as p grows

    def as_dict(self) -> dict:
        return {"m": self.m, "alpha": self.alpha, "j": self.j, "k": self.k,
                "p_star": self.p_star, "p_lo": self.p_lo, "p_hi": self.p_hi,
                "residual": self.residual, "direction": self.direction}


@dataclass(frozen=True)
class ScanResult:
    crossings: list
    p_range: tuple[float, float]
    effective_range: tuple[float, float]
    failures: list = field(default_factory=list)
    samples: int = 0

    def __len__(self) -> int:
        return len(self.crossings)

    def __iter__(self):
        return iter(self.crossings)

    def __getitem__(self, i):
        return self.crossings[i]


def _check_range(p_range) -> tuple[float, float]:
    lo, hi = (float(x) for x in p_range)
    if not (1.0 < lo < hi <= P_CAP):
        raise InputError(f"p_range must satisfy 1 < p_lo < p_hi <= {P_CAP}")
    return lo, hi


def _check_ks(k_set) -> tuple[int, ...]:
    ks = tuple(sorted({int(k) for k in k_set}))
    if not ks or any(k < 1 for k in ks) or any(int(k) != k for k in k_set):
        raise InputError("k_set must be a nonempty set of integers >= 1")
    return ks


def _phases(p: float, m: int, nus: tuple[float, ...]):
    try:
        sol = solve(SolveConfig(p, m))
        return end_phases(sol, list(nus))
    except PlanarMorseError as exc:
        return f"{type(exc).__name__}: {exc}"


class _Sampler:
    """Memoized Lane-Emden end phases at ``nu = -(k/a)^2`` for every k."""

    def __init__(self, m, alpha, ks, jobs):
        self.m = m
        self.a = 0.5 * (2.0 + alpha)
        self.ks = ks
        self.nus = tuple(-(k / self.a) ** 2 for k in ks)
        self.jobs = jobs
        self.cache: dict[float, object] = {}

    def add(self, ps) -> None:
        new = sorted({float(p) for p in ps} - set(self.cache))
        for p, v in zip(new, pmap(partial(_phases, m=self.m, nus=self.nus), new, self.jobs)):
            self.cache[p] = v

    def ok(self):
        ps = sorted(p for p, v in self.cache.items() if not isinstance(v, str))
        return ps, np.array([self.cache[p] for p in ps])

    def failures(self):
        return [{"p": p, "error": v} for p, v in sorted(self.cache.items()) if isinstance(v, str)]


def _sample(sampler: _Sampler, lo: float, hi: float, max_rounds: int = 4) -> None:
    sampler.add(np.geomspace(lo, hi, N_INITIAL))
    # refine where any phase moves by more than pi/2 between neighbours, so a
    # double crossing of one level cannot hide inside a single interval
    for _ in range(max_rounds):
        ps, ph = sampler.ok()
        if len(ps) < 2:
            return
        jump = np.max(np.abs(np.diff(ph, axis=0)), axis=1)
        mids = [math.sqrt(ps[i] * ps[i + 1]) for i in np.nonzero(jump > 0.5 * math.pi)[0]]
        if not mids:
            return
        sampler.add(mids)


def _refine(p_lo, p_hi, m, nu, level) -> float:
    def g(p):
        return float(end_phases(solve(SolveConfig(p, m)), [nu])[0]) - level
    try:
        return brentq(g, p_lo, p_hi, xtol=1e-11 * p_lo, rtol=1e-14, maxiter=200)
    except ValueError as exc:
        raise BracketFailure(f"lost bracket [{p_lo}, {p_hi}] for nu={nu}: {exc}") from None


def _residual(p, m, alpha, j) -> float:
    spec = eigenvalues_shooting(solve(SolveConfig(p, m, alpha)), j_max=m,
                                options=ShootingOptions(eigenfunctions=False))
    return spec.eigenvalues[j - 1]


def _crossings_from(sampler, m, alpha, branches, rtol) -> list[CrossingRecord]:
    ps, ph = sampler.ok()
    out = []
    for j, ks in branches.items():
        for k in ks:
            if j == m and k >= sampler.a:
                # nu_m > -((2+alpha)/2)^2 always; near that level g(p) is
                # pure round-off at large p, so it is not sampled for signs
                continue
            col = sampler.ks.index(k)
            g = ph[:, col] - j * math.pi
            for i in range(len(ps) - 1):
                if g[i] == 0.0 or (g[i] > 0) == (g[i + 1] > 0):
                    continue
                p_star = _refine(ps[i], ps[i + 1], m, sampler.nus[col], j * math.pi)
                nu = _residual(p_star, m, alpha, j)
                res = abs(nu + k * k)
                if res > rtol * k * k:
                    raise ToleranceFailure(
                        f"crossing j={j} k={k} at p={p_star}: residual {res:.3e} > {rtol * k * k:.3e}")
                out.append(CrossingRecord(m, float(alpha), j, k, p_star, ps[i], ps[i + 1], res,
                                          "down" if g[i] < 0 else "up"))
    out.sort(key=lambda c: (c.p_star, c.j, c.k))
    return out


def _effective(ps, lo, hi):
    return (ps[0], ps[-1]) if ps else (lo, lo)


def scan_crossings(m: int, alpha: float, j: int, p_range=DEFAULT_P_RANGE, k_set=(1,),
                   jobs: int | None = 1, rtol: float = RESIDUAL_RTOL) -> ScanResult:
    """All p in ``p_range`` with ``nu^alpha_j(p) = -k^2`` for ``k`` in ``k_set``.

    p samples where the solver fails are listed in ``failures`` and the
    reported ``effective_range`` spans only successful samples.
    """
    if int(m) != m or m < 1 or not (1 <= j <= m):
        raise InputError("need m >= 1 and 1 <= j <= m")
    if not (math.isfinite(alpha) and alpha >= 0):
        raise InputError("alpha must be >= 0")
    lo, hi = _check_range(p_range)
    ks = _check_ks(k_set)
    sampler = _Sampler(int(m), float(alpha), ks, jobs)
    _sample(sampler, lo, hi)
    ps, _ = sampler.ok()
    if len(ps) < 2:
        raise BracketFailure("fewer than two usable p samples")
    cr = _crossings_from(sampler, int(m), alpha, {int(j): ks}, rtol)
    return ScanResult(cr, (lo, hi), _effective(ps, lo, hi), sampler.failures(), len(ps))


@dataclass(frozen=True)
class MorseTransitions:
    m: int
    alpha: float
    transitions: list           # (p_star, index_before, index_after)
    crossings: list
    index_start: int
    index_end: int
    endpoint_check: dict
    failures: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "m": self.m, "alpha": self.alpha,
            "transitions": [list(t) for t in self.transitions],
            "crossings": [c.as_dict() for c in self.crossings],
            "index_start": self.index_start, "index_end": self.index_end,
            "endpoint_check": dict(self.endpoint_check), "failures": list(self.failures),
        }


def _index_at(p, m, alpha) -> int:
    # eigenfunctions are needed: the gap certificate fixes the j = m term
    spec = eigenvalues_shooting(solve(SolveConfig(p, m, alpha)), options=ShootingOptions())
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NearResonanceWarning)
        return morse_from_spectrum(spec)


def morse_change_points(m: int, alpha: float, p_range=DEFAULT_P_RANGE,
                        jobs: int | None = 1, rtol: float = RESIDUAL_RTOL) -> MorseTransitions:
    """Morse index transitions over ``p_range``.

    Branch ``j`` is scanned against ``k = 1..ceil((2+alpha) theta_{m-j} / 4)``,
    the integers that ``sqrt(-nu_j)`` can pass on its way to the large-p
    target.  Each crossing changes the index by 2.  The composed endpoint
    indices are checked against the spectral formula evaluated directly.
    """
    if int(m) != m or m < 1:
        raise InputError("m must be an integer >= 1")
    lo, hi = _check_range(p_range)
    table = theta_sequence(m)
    a = 0.5 * (2.0 + alpha)
    branches = {j: tuple(range(1, max(1, math.ceil(a * table.theta(m - j) / 2.0)) + 1))
                for j in range(1, m + 1)}
    ks = tuple(sorted({k for v in branches.values() for k in v}))
    sampler = _Sampler(int(m), float(alpha), ks, jobs)
    _sample(sampler, lo, hi)
    ps, _ = sampler.ok()
    if len(ps) < 2:
        raise BracketFailure("fewer than two usable p samples")
    cr = _crossings_from(sampler, int(m), alpha, branches, rtol)
    start = _index_at(ps[0], m, alpha)
    end_direct = _index_at(ps[-1], m, alpha)
    idx = start
    trans = []
    for c in cr:
        new = idx + (2 if c.direction == "down" else -2)
        trans.append((c.p_star, idx, new))
        idx = new
    check = {"p_start": ps[0], "p_end": ps[-1], "index_end_direct": end_direct,
             "index_end_composed": idx, "consistent": idx == end_direct}
    return MorseTransitions(int(m), float(alpha), trans, cr, start, idx, check, sampler.failures())
