"""Content-addressed result cache and append-only run manifests.

Environment:

``PLANAR_MORSE_CACHE``
    cache root (default ``~/.cache/planar_morse``).
``PLANAR_MORSE_ODE_RTOL``, ``PLANAR_MORSE_ODE_ATOL``, ``PLANAR_MORSE_NU_TOL``
    override the default tolerances; they enter the cache key.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .errors import InputError
from .serialize import SCHEMA_VERSION, dumps, jsonable, write_atomic

__all__ = ["CacheKey", "ResultCache", "default_tolerances", "cache_root", "append_manifest"]

_TOL_ENV = {
    "ode_rel_tol": ("PLANAR_MORSE_ODE_RTOL", 1e-13),
    "ode_abs_tol": ("PLANAR_MORSE_ODE_ATOL", 1e-16),
    "nu_tol": ("PLANAR_MORSE_NU_TOL", 1e-9),
}


def default_tolerances(env=None) -> dict[str, float]:
    env = os.environ if env is None else env
    out = {}
    for name, (var, dflt) in _TOL_ENV.items():
        raw = env.get(var)
        if raw is None or raw == "":
            out[name] = dflt
            continue
        try:
            val = float(raw)
        except ValueError:
            raise InputError(f"{var}={raw!r} is not a number") from None
        if not (0.0 < val < 1.0):
            raise InputError(f"{var} must lie in (0, 1)")
        out[name] = val
    return out


def cache_root(env=None) -> Path:
    env = os.environ if env is None else env
    raw = env.get("PLANAR_MORSE_CACHE")
    return Path(raw) if raw else Path.home() / ".cache" / "planar_morse"


@dataclass(frozen=True)
class CacheKey:
    kind: str
    params: dict

    def canonical(self) -> str:
        body = {"kind": self.kind, "params": jsonable(self.params),
                "schema": SCHEMA_VERSION, "version": __version__}
        return json.dumps(body, sort_keys=True, separators=(",", ":"), allow_nan=False)

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    @property
    def short(self) -> str:
        return self.digest[:16]


class ResultCache:
    """``<root>/<hh>/<digest>.json``; entries are never evicted automatically."""

    def __init__(self, root=None, enabled: bool = True):
        self.root = Path(root) if root is not None else cache_root()
        self.enabled = enabled

    def path(self, key: CacheKey) -> Path:
        d = key.digest
        return self.root / d[:2] / f"{d}.json"

    def get(self, key: CacheKey) -> str | None:
        if not self.enabled:
            return None
        p = self.path(key)
        try:
            return p.read_text(encoding="utf-8")
        except FileNotFoundError:
            return None

    def put(self, key: CacheKey, payload) -> str:
        text = payload if isinstance(payload, str) else dumps(payload)
        if self.enabled:
            write_atomic(self.path(key), text)
        return text


def append_manifest(out_dir, command: str, key: CacheKey, config: dict, status: dict,
                    wall_time: float, artifacts: list[str], cache_hit: bool) -> dict:
    """Append one line to ``<out_dir>/manifests.jsonl``.

    The manifest id is the cache key digest, which the artifacts also carry,
    so artifacts stay byte-stable while wall time lives only here.
    """
    rec = {
        "manifest_id": key.short,
        "command": command,
        "config": jsonable(config),
        "tool_version": __version__,
        "schema": SCHEMA_VERSION,
        "wall_time_s": round(float(wall_time), 6),
        "status": jsonable(status),
        "artifacts": sorted(artifacts),
        "cache_hit": bool(cache_hit),
        "finished_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "manifests.jsonl", "a", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(rec, sort_keys=True, allow_nan=False) + "\n")
    return rec
