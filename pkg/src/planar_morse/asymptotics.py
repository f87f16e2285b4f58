"""p-sweeps witnessing the large-p limits: eigenvalues, rescaled profiles and
rescaled potentials against the bubble tower.  Only raw errors and trend
statistics are reported; nothing is extrapolated to p = infinity."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .errors import PlanarMorseError
from .morse import morse_terms
from .parallel import pmap
from .radial import (
    P_CAP,
    SolveConfig,
    f_p_profile,
    rescaled_potential,
    rescaled_values,
    solve,
)
from .spectrum import ShootingOptions, eigenvalues_galerkin, eigenvalues_shooting
from .theta import bubble, theta_sequence

__all__ = [
    "DEFAULT_P_GRID",
    "SweepResult",
    "eigenvalue_sweep",
    "profile_convergence",
    "potential_convergence",
    "good_set_sweep",
    "trend_statistics",
]

DEFAULT_P_GRID = (5.0, 10.0, 20.0, 40.0, 80.0, 160.0)


@dataclass(frozen=True)
class SweepResult:
    kind: str
    m: int
    alpha: float
    p_grid: tuple[float, ...]
    rows: list
    trend: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "kind": self.kind, "m": self.m, "alpha": self.alpha,
            "p_grid": list(self.p_grid), "rows": self.rows,
            "trend": self.trend, "config": self.config,
        }


def _check_grid(p_grid) -> tuple[float, ...]:
    g = tuple(float(p) for p in p_grid)
    if not g:
        raise ValueError("empty p grid")
    if any(b <= a for a, b in zip(g, g[1:])):
        raise ValueError("p grid must be strictly increasing")
    if g[0] <= 1.0 or g[-1] > P_CAP:
        raise ValueError(f"p grid must lie in (1, {P_CAP}]")
    return g


def _eigen_row(p: float, m: int, alpha: float, method: str) -> dict:
    table = theta_sequence(m)
    a2 = (0.5 * (2.0 + alpha)) ** 2
    targets = [a2 * table.beta(m - j) for j in range(1, m + 1)]
    try:
        sol = solve(SolveConfig(p, m, alpha))
        if method == "galerkin":
            spec = eigenvalues_galerkin(sol, table=table)
        else:
            spec = eigenvalues_shooting(sol, options=ShootingOptions(), table=table)
    except PlanarMorseError as exc:
        return {"p": p, "status": f"failed: {type(exc).__name__}: {exc}",
                "nu": None, "target": targets, "error": None, "ceil": None,
                "gap": None, "log_gap": None, "gap_status": None}
    nu = list(spec.eigenvalues)
    err = [abs(x - t) for x, t in zip(nu, targets)]
    if spec.gap_status == "resolved" and spec.gap is not None:
        # |nu_m - target| is the gap itself, known to full relative precision
        err[-1] = abs(spec.gap)
    ceil = [t.value for t in morse_terms(spec)]
    return {"p": p, "status": "ok", "nu": nu, "target": targets, "error": err,
            "ceil": ceil, "gap": spec.gap, "log_gap": spec.log_gap,
            "gap_status": spec.gap_status}


def trend_statistics(rows: list, m: int, table=None) -> dict:
    """Per j: fraction of consecutive error decreases, whether the last three
    grid points decrease, and ceiling stabilization at ``4(m-j)+1``."""
    ok = [r for r in rows if r["status"] == "ok"]
    table = table or theta_sequence(m)
    out = {}
    for j in range(1, m + 1):
        e = [r["error"][j - 1] for r in ok]
        dec = [b < a for a, b in zip(e, e[1:])]
        target_ceil = math.floor(table.theta(m - j) / 2.0)
        ceils = [r["ceil"][j - 1] for r in ok]
        first = None
        for k in range(len(ceils) - 1):
            if ceils[k] == target_ceil and ceils[k + 1] == target_ceil:
                first = k
                break
        stable = first is not None and all(c == target_ceil for c in ceils[first:])
        out[str(j)] = {
            "decrease_fraction": (sum(dec) / len(dec)) if dec else None,
            "last_three_decreasing": len(e) >= 3 and e[-2] < e[-3] and e[-1] < e[-2],
            "target_ceil": target_ceil if j < m else 0,
            "ceil_sequence": ceils,
            "ceil_stabilized": stable if j < m else all(c == 0 for c in ceils),
        }
    return out


def eigenvalue_sweep(m: int, alpha: float = 0.0, p_grid=DEFAULT_P_GRID,
                     method: str = "shooting", jobs: int | None = 1) -> SweepResult:
    """``nu_j(p)`` against ``((2+alpha)/2)^2 beta^{m-j}`` over ``p_grid``.

    A failed p point is kept as a row with its error message; the sweep
    carries on.
    """
    grid = _check_grid(p_grid)
    rows = pmap(partial(_eigen_row, m=m, alpha=float(alpha), method=method), grid, jobs)
    rows.sort(key=lambda r: r["p"])
    return SweepResult("eigenvalues", m, float(alpha), grid, rows,
                       trend_statistics(rows, m),
                       {"method": method, "targets": "beta^{m-j}"})


def _window(i: int, K: float, n: int) -> np.ndarray:
    if i == 0:
        return np.concatenate([[0.0], np.exp(np.linspace(math.log(1e-3), math.log(K), n))])
    return np.exp(np.linspace(-math.log(K), math.log(K), n))


def _profile_row(p: float, m: int, K: float, n: int, what: str) -> list:
    table = theta_sequence(m)
    try:
        sol = solve(SolveConfig(p, m))
    except PlanarMorseError as exc:
        return [{"p": p, "i": i, "status": f"failed: {exc}"} for i in range(m)]
    rows = []
    for i in range(m):
        Z = bubble(0.0, i, table)
        x = _window(i, K, n)
        if what == "profile":
            v = rescaled_values(sol, i, x)
            ref = Z.Z(np.where(x > 0, x, 1.0)) if i else Z.Z(x)
        else:
            v = rescaled_potential(sol, i, x)
            ref = Z.density(x)
        ok = np.isfinite(v)
        dist = float(np.max(np.abs(v[ok] - ref[ok]))) if ok.any() else None
        target = math.sqrt((table.theta(i) ** 2 - 4.0) / 2.0)
        ratio = 0.0 if i == 0 else math.exp(math.log(sol.critical_radii[i]) - sol.log_eps[i])
        rows.append({
            "p": p, "i": i, "status": "ok", "sup_distance": dist,
            "window": [float(x[ok][0]), float(x[ok][-1])] if ok.any() else None,
            "window_clipped": bool(not ok.all()),
            "s_over_eps": ratio, "s_over_eps_target": target,
            "s_over_eps_error": abs(ratio - target),
        })
    return rows


def _grouped_trend(rows: list, m: int, key: str) -> dict:
    out = {}
    for i in range(m):
        vals = [r[key] for r in rows if r["i"] == i and r["status"] == "ok"]
        dec = [b < a for a, b in zip(vals, vals[1:])]
        out[str(i)] = {"values": vals,
                       "decrease_fraction": (sum(dec) / len(dec)) if dec else None,
                       "last_decreasing": bool(dec and dec[-1])}
    return out


def profile_convergence(m: int, p_grid=DEFAULT_P_GRID, K: float = 5.0, n: int = 801,
                        jobs: int | None = 1) -> SweepResult:
    """sup over the window of ``|u^i_p - Z_i|`` and ``s_i/eps_i`` per (p, i).

    The window is ``[0, K]`` for the central zone and ``[1/K, K]`` otherwise,
    clipped to the zone domain (flagged per row).
    """
    grid = _check_grid(p_grid)
    parts = pmap(partial(_profile_row, m=m, K=K, n=n, what="profile"), grid, jobs)
    rows = sorted((r for part in parts for r in part), key=lambda r: (r["p"], r["i"]))
    trend = {"sup_distance": _grouped_trend(rows, m, "sup_distance"),
             "s_over_eps_error": _grouped_trend(rows, m, "s_over_eps_error")}
    return SweepResult("profile", m, 0.0, grid, rows, trend, {"K": K, "n": n})


def potential_convergence(m: int, p_grid=DEFAULT_P_GRID, K: float = 5.0, n: int = 801,
                          jobs: int | None = 1) -> SweepResult:
    """sup over the window of ``|V^i_p - e^{Z_i}|`` per (p, i)."""
    grid = _check_grid(p_grid)
    parts = pmap(partial(_profile_row, m=m, K=K, n=n, what="potential"), grid, jobs)
    rows = sorted((r for part in parts for r in part), key=lambda r: (r["p"], r["i"]))
    for r in rows:
        for k in ("s_over_eps", "s_over_eps_target", "s_over_eps_error"):
            r.pop(k, None)
    trend = {"sup_distance": _grouped_trend(rows, m, "sup_distance")}
    return SweepResult("potential", m, 0.0, grid, rows, trend, {"K": K, "n": n})


def good_set_sweep(m: int, p_grid=DEFAULT_P_GRID, K_values=(2.0, 4.0, 8.0, 16.0)) -> SweepResult:
    """``max_{G_p(K)} f_p`` for each p and K, plus the global max of f_p."""
    grid = _check_grid(p_grid)
    rows = []
    for p in grid:
        sol = solve(SolveConfig(p, m))
        for K in K_values:
            prof = f_p_profile(sol, K)
            rows.append({"p": p, "K": K, "status": "ok", "max_f": prof.max_value,
                         "max_f_good_set": prof.max_on_good_set})
    return SweepResult("good_set", m, 0.0, grid, rows, {}, {"K_values": list(K_values)})
