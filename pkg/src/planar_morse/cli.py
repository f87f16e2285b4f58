"""``planar-morse`` command line front end.

Every subcommand builds a parameter dict, looks it up in the result cache,
computes on a miss, writes ``<kind>-<id>.json`` (plus CSV tables) under
``--out`` and appends a line to ``<out>/manifests.jsonl``.  Artifacts are
rebuilt from the cached JSON text, so a cache hit reproduces them byte for
byte.

Exit codes: 0 ok, 1 other numerical error, 2 bad input, 3 integration
failure, 4 bracketing / index mismatch, 5 convergence or tolerance failure
(including a failed invariant check).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .cache import CacheKey, ResultCache, append_manifest, default_tolerances
from .errors import InputError, NearResonanceWarning, PlanarMorseError
from .parallel import default_jobs
from .serialize import SCHEMA_VERSION, csv_text, dumps, loads, write_atomic

EXIT_OK = 0
EXIT_CHECK_FAILED = 5
N_EIG_SAMPLES = 2001


# ---------------------------------------------------------------------------
# argument helpers


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _p_range(text: str) -> tuple[float, float]:
    v = _float_list(text)
    if len(v) != 2:
        raise argparse.ArgumentTypeError("expected P_LO,P_HI")
    return v[0], v[1]


# ---------------------------------------------------------------------------
# commands: each returns (params, compute) where compute() -> result dict


def _solve_config(args, tol):
    from .radial import SolveConfig
    return SolveConfig(args.p, args.m, args.alpha,
                       ode_rel_tol=tol["ode_rel_tol"], ode_abs_tol=tol["ode_abs_tol"])


def _theta(args, tol):
    from .theta import theta_sequence

    params = {"imax": args.imax, "precision": args.precision}

    def compute():
        table = theta_sequence(args.imax, args.precision)
        return {"rows": table.rows(), "invariants": table.invariants(),
                "lambert_branch": table.lambert_branch}

    return params, compute


def _solve(args, tol):
    from .radial import solve

    params = {"p": args.p, "m": args.m, "alpha": args.alpha, "tolerances": tol}

    def compute():
        sol = solve(_solve_config(args, tol))
        r, u, du = sol.samples()
        nodes, crit = sol.nodal_radii, sol.critical_radii
        interlace = all(a < b for a, b in zip(crit, nodes)) and \
            all(b < a for a, b in zip(crit[1:], nodes))
        return {
            "config": sol.config.as_dict(),
            "log_u0": sol.log_u0,
            "nodal_radii": list(nodes),
            "critical_radii": list(crit),
            "log_amplitudes": list(sol.log_amplitudes),
            "log_eps": list(sol.log_eps),
            "boundary_residual": sol.boundary_residual,
            "boundary_ok": sol.boundary_residual <= sol.config.boundary_tol,
            "interlacing_ok": interlace,
            "diagnostics": sol.diagnostics,
            "profile": {"r": r, "u": u, "du": du},
        }

    return params, compute


def _spectrum_payload(spec) -> dict:
    out = {
        "method": spec.method,
        "eigenvalues": list(spec.eigenvalues),
        "zero_counts": list(spec.zero_counts),
        "gap": spec.gap, "log_gap": spec.log_gap, "gap_status": spec.gap_status,
        "ordering_ok": spec.ordering_ok(),
        "residuals": spec.residuals, "meta": spec.meta,
    }
    if spec.eigenfunctions is not None:
        out["orthogonality_error"] = spec.orthogonality_error()
        n = spec.log_r.size
        idx = np.unique(np.linspace(0, n - 1, min(n, N_EIG_SAMPLES)).round().astype(int))
        out["samples"] = {"log_r": spec.log_r[idx],
                          "psi": spec.eigenfunctions[:, idx]}
    return out


def _spectrum(args, tol):
    from .radial import solve
    from .spectrum import ShootingOptions, eigenvalues_galerkin, eigenvalues_shooting

    method = "galerkin" if args.oracle else args.method
    params = {"p": args.p, "m": args.m, "alpha": args.alpha, "method": method,
              "oracle": bool(args.oracle), "tolerances": tol}

    def compute():
        sol = solve(_solve_config(args, tol))
        opts = ShootingOptions(nu_tol=tol["nu_tol"])
        if method == "galerkin":
            main = eigenvalues_galerkin(sol)
        else:
            main = eigenvalues_shooting(sol, options=opts)
        res = {"p": args.p, "m": args.m, "alpha": args.alpha, **_spectrum_payload(main)}
        if args.oracle:
            ref = eigenvalues_shooting(sol, options=opts)
            res["cross_method"] = {
                "shooting": list(ref.eigenvalues),
                "relative_delta": [abs(a - b) / abs(b)
                                   for a, b in zip(main.eigenvalues, ref.eigenvalues)],
                "shooting_gap": ref.gap, "shooting_gap_status": ref.gap_status,
            }
        return res

    return params, compute


def _morse(args, tol):
    from .morse import asymptotic_morse, morse_report

    if not args.asymptotic and args.p is None:
        raise InputError("morse needs --p or --asymptotic")
    params = {"m": args.m, "alpha": args.alpha, "asymptotic": bool(args.asymptotic),
              "p": None if args.asymptotic else args.p, "margin": args.margin,
              "tolerances": None if args.asymptotic else tol}

    def compute():
        if args.asymptotic:
            v = asymptotic_morse(args.m, args.alpha)
            rep = morse_report(args.m, args.alpha).as_dict()
            rep["value"] = v.as_list() if hasattr(v, "as_list") else v
            return rep
        from .radial import solve
        from .spectrum import ShootingOptions, eigenvalues_shooting
        sol = solve(_solve_config(args, tol))
        spec = eigenvalues_shooting(sol, options=ShootingOptions(nu_tol=tol["nu_tol"]))
        rep = morse_report(args.m, args.alpha, spec, margin=args.margin).as_dict()
        rep["value"] = rep["morse_from_spectrum"]
        rep["eigenvalues"] = list(spec.eigenvalues)
        return rep

    return params, compute


def _sweep(args, tol):
    from . import asymptotics as A

    grid = tuple(args.p_grid) if args.p_grid else A.DEFAULT_P_GRID
    params = {"kind": args.kind, "m": args.m, "alpha": args.alpha, "p_grid": list(grid),
              "method": args.method, "K": args.K}

    def compute():
        if args.kind == "eigenvalues":
            r = A.eigenvalue_sweep(args.m, args.alpha, grid, args.method, args.jobs)
        elif args.kind == "profile":
            r = A.profile_convergence(args.m, grid, args.K, jobs=args.jobs)
        else:
            r = A.potential_convergence(args.m, grid, args.K, jobs=args.jobs)
        return r.as_dict()

    return params, compute


def _bifurcate(args, tol):
    from . import bifurcation as B

    params = {"m": args.m, "alpha": args.alpha, "branch": args.branch,
              "k": sorted(set(args.k)) if args.k else None, "p_range": list(args.p_range)}

    def compute():
        if args.branch is not None:
            if not args.k:
                raise InputError("--branch needs --k")
            r = B.scan_crossings(args.m, args.alpha, args.branch, args.p_range, args.k,
                                 jobs=args.jobs)
            return {"mode": "branch", "crossings": [c.as_dict() for c in r],
                    "count": len(r), "effective_range": list(r.effective_range),
                    "failures": r.failures, "samples": r.samples}
        t = B.morse_change_points(args.m, args.alpha, args.p_range, jobs=args.jobs)
        return {"mode": "transitions", **t.as_dict(), "count": len(t.crossings)}

    return params, compute


def _alphas(args, tol):
    from .theta import critical_alphas, theta_sequence

    params = {"i_max": args.imax, "n": args.n}

    def compute():
        table = theta_sequence(args.imax)
        return {"rows": [{"i": i, "theta": table.theta(i),
                          "alphas": critical_alphas(i, args.n, table)}
                         for i in range(1, args.imax + 1)]}

    return params, compute


# ---------------------------------------------------------------------------
# tables and summaries built from the parsed JSON result


def _tables(kind: str, res: dict) -> dict[str, tuple[list, list]]:
    if kind == "theta":
        rows = [[r["i"], r["theta"], r["gamma"], r["log_gamma"], r["beta"], r["bounds_ok"]]
                for r in res["rows"]]
        return {"table": (["i", "theta", "gamma", "log_gamma", "beta", "bounds_ok"], rows)}
    if kind == "solve":
        pr = res["profile"]
        return {"profile": (["r", "u", "du"], list(zip(pr["r"], pr["u"], pr["du"])))}
    if kind == "spectrum":
        rows = [[j + 1, nu, z] for j, (nu, z) in enumerate(zip(res["eigenvalues"], res["zero_counts"]))]
        out = {"eigenvalues": (["j", "nu", "zero_count"], rows)}
        if "samples" in res:
            s = res["samples"]
            cols = ["log_r"] + [f"psi_{j + 1}" for j in range(len(s["psi"]))]
            out["eigenfunctions"] = (cols, list(zip(s["log_r"], *s["psi"])))
        return out
    if kind == "sweep":
        if res["kind"] == "eigenvalues":
            rows = []
            for r in res["rows"]:
                for j in range(res["m"]):
                    nu = r["nu"][j] if r["nu"] else None
                    err = r["error"][j] if r["error"] else None
                    rows.append([r["p"], j + 1, nu, r["target"][j], err, r["status"]])
            return {"convergence": (["p", "j", "nu_j", "target", "error", "status"], rows)}
        rows = [[r["p"], r["i"], r.get("sup_distance"), r.get("s_over_eps"), r["status"]]
                for r in res["rows"]]
        return {"convergence": (["p", "i", "sup_distance", "s_over_eps", "status"], rows)}
    if kind == "bifurcate":
        rows = [[c["m"], c["alpha"], c["j"], c["k"], c["p_star"], c["residual"]]
                for c in res["crossings"]]
        return {"crossings": (["m", "alpha", "j", "k", "p_star", "residual"], rows)}
    if kind == "alphas":
        rows = [[r["i"], n + 1, a] for r in res["rows"] for n, a in enumerate(r["alphas"])]
        return {"alphas": (["i", "n", "alpha"], rows)}
    return {}


def _summary(kind: str, res: dict) -> tuple[dict, bool]:
    """Returns (summary row, invariants ok)."""
    if kind == "theta":
        ok = all(res["invariants"].values())
        return {"rows": len(res["rows"]), "theta_last": res["rows"][-1]["theta"],
                "invariants_ok": ok}, ok
    if kind == "solve":
        ok = res["boundary_ok"] and res["interlacing_ok"]
        return {"zones": len(res["nodal_radii"]), "boundary_residual": res["boundary_residual"],
                "interlacing_ok": res["interlacing_ok"]}, ok
    if kind == "spectrum":
        row = {"method": res["method"], "eigenvalues": res["eigenvalues"],
               "gap_status": res["gap_status"], "ordering_ok": res["ordering_ok"]}
        if "cross_method" in res:
            row["max_relative_delta"] = max(res["cross_method"]["relative_delta"])
        return row, bool(res["ordering_ok"])
    if kind == "morse":
        return {"value": res["value"], "flags": res["flags"]}, True
    if kind == "sweep":
        bad = sum(1 for r in res["rows"] if r["status"] != "ok")
        return {"kind": res["kind"], "rows": len(res["rows"]), "failed_rows": bad}, True
    if kind == "bifurcate":
        row = {"crossings": res["count"]}
        if res["mode"] == "transitions":
            row.update(index_start=res["index_start"], index_end=res["index_end"],
                       consistent=res["endpoint_check"]["consistent"])
            return row, bool(res["endpoint_check"]["consistent"])
        return row, True
    if kind == "alphas":
        return {"i_max": len(res["rows"])}, True
    return {}, True


def _format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return "[" + ", ".join(_format_value(x) for x in v) + "]"
    return str(v)


def _emit_stdout(kind: str, res: dict, summary: dict, fmt: str, out) -> None:
    if fmt == "json":
        out.write(dumps(res["rows"] if kind == "theta" else summary))
        return
    if fmt == "csv":
        tabs = _tables(kind, res)
        if tabs:
            header, rows = next(iter(tabs.values()))
            out.write(csv_text(header, rows))
        else:
            flat = [json.dumps(v, sort_keys=True) if isinstance(v, (dict, list)) else v
                    for v in summary.values()]
            out.write(csv_text(list(summary), [flat]))
        return
    if kind == "theta":
        header, rows = _tables(kind, res)["table"]
        out.write("  ".join(header) + "\n")
        for r in rows:
            out.write("  ".join(_format_value(v) for v in r) + "\n")
    out.write(kind + ": " + " ".join(f"{k}={_format_value(v)}" for k, v in summary.items()) + "\n")


# ---------------------------------------------------------------------------
# driver


COMMANDS = {
    "theta": _theta, "solve": _solve, "spectrum": _spectrum, "morse": _morse,
    "sweep": _sweep, "bifurcate": _bifurcate, "alphas": _alphas,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, default=Path("planar_morse_out"),
                        help="artifact directory (default: ./planar_morse_out)")
    common.add_argument("--format", choices=("table", "json", "csv"), default="table",
                        help="stdout format")
    common.add_argument("--jobs", type=int, default=None,
                        help="worker processes for sweeps (default: available cores)")
    common.add_argument("--no-cache", action="store_true", help="bypass the result cache")
    common.add_argument("--cache-dir", type=Path, default=None,
                        help="cache root (default: $PLANAR_MORSE_CACHE or ~/.cache/planar_morse)")

    ap = argparse.ArgumentParser(prog="planar-morse", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("theta", parents=[common], help="theta sequence table")
    s.add_argument("--imax", type=int, default=3)
    s.add_argument("--precision", type=float, default=1e-14)

    def pma(s, need_p=True):
        if need_p:
            s.add_argument("--p", type=float, required=True)
        s.add_argument("--m", type=int, required=True)
        s.add_argument("--alpha", type=float, default=0.0)

    s = sub.add_parser("solve", parents=[common], help="radial nodal solution")
    pma(s)
    s = sub.add_parser("spectrum", parents=[common], help="negative singular eigenvalues")
    pma(s)
    s.add_argument("--method", choices=("shooting", "galerkin"), default="shooting")
    s.add_argument("--oracle", action="store_true",
                   help="use the Galerkin method and report deltas against shooting")
    s = sub.add_parser("morse", parents=[common], help="Morse index")
    pma(s, need_p=False)
    s.add_argument("--p", type=float, default=None)
    s.add_argument("--asymptotic", action="store_true", help="large-p closed form")
    s.add_argument("--margin", type=float, default=1e-4)
    s = sub.add_parser("sweep", parents=[common], help="large-p convergence sweep")
    pma(s, need_p=False)
    s.add_argument("--kind", choices=("eigenvalues", "profile", "potential"), default="eigenvalues")
    s.add_argument("--p-grid", type=_float_list, default=None)
    s.add_argument("--method", choices=("shooting", "galerkin"), default="shooting")
    s.add_argument("--K", type=float, default=5.0)
    s = sub.add_parser("bifurcate", parents=[common], help="degeneracy crossings in p")
    pma(s, need_p=False)
    s.add_argument("--branch", type=int, default=None)
    s.add_argument("--k", type=_int_list, default=None)
    s.add_argument("--p-range", type=_p_range, default=(1.05, 200.0))
    s = sub.add_parser("alphas", parents=[common], help="critical Henon exponents")
    s.add_argument("--imax", type=int, default=3)
    s.add_argument("--n", type=int, default=5)
    return ap


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    if args.jobs is None:
        args.jobs = default_jobs()
    t0 = time.perf_counter()
    try:
        tol = default_tolerances()
        params, compute = COMMANDS[args.command](args, tol)
        key = CacheKey(args.command, params)
        cache = ResultCache(args.cache_dir, enabled=not args.no_cache)
        text = cache.get(key)
        hit = text is not None
        if not hit:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", NearResonanceWarning)
                result = compute()
            for w in caught:
                print(f"warning: {w.message}", file=sys.stderr)
            payload = {"schema": SCHEMA_VERSION, "kind": args.command,
                       "manifest_id": key.short, "params": params, "result": result}
            text = cache.put(key, dumps(payload))
        payload = loads(text)
        res = payload["result"]
        stem = f"{args.command}-{key.short}"
        artifacts = [str(write_atomic(args.out / f"{stem}.json", text))]
        for suffix, (header, rows) in _tables(args.command, res).items():
            artifacts.append(str(write_atomic(args.out / f"{stem}-{suffix}.csv",
                                              csv_text(header, rows))))
        summary, ok = _summary(args.command, res)
        append_manifest(args.out, args.command, key, params,
                        {"ok": ok, "summary": summary}, time.perf_counter() - t0,
                        [Path(a).name for a in artifacts], hit)
        _emit_stdout(args.command, res, summary, args.format, stdout)
        return EXIT_OK if ok else EXIT_CHECK_FAILED
    except PlanarMorseError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":  # pragma: no cover
    main()
