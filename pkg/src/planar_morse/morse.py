"""Morse index formulas: from a computed spectrum, the large-p closed forms,
the bubble decomposition and the known lower bounds (all in dimension 2)."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

from .errors import InputError, NearResonanceWarning
from .spectrum import SingularSpectrum
from .theta import ThetaTable, theta_sequence

__all__ = [
    "MorseInterval",
    "MorseReport",
    "morse_terms",
    "morse_from_spectrum",
    "asymptotic_morse",
    "bubble_decomposition",
    "lower_bounds",
    "morse_report",
]

RESONANCE_RTOL = 1e-9


@dataclass(frozen=True)
class MorseInterval:
    """Closed integer interval ``[lo, hi]`` (the resonant case)."""

    lo: int
    hi: int

    def __contains__(self, v: int) -> bool:
        return self.lo <= v <= self.hi

    def as_list(self) -> list[int]:
        return [self.lo, self.hi]


@dataclass(frozen=True)
class MorseTerm:
    j: int
    root: float          # sqrt(-nu_j)
    value: int           # max(0, ceil(root - 1))
    near_integer: bool
    alternatives: tuple[int, ...]


def _ceil_term(x: float) -> int:
    return max(0, math.ceil(x - 1.0))


def morse_terms(spec: SingularSpectrum, margin: float = 1e-4) -> list[MorseTerm]:
    """Per-eigenvalue contributions ``ceil(sqrt(-nu_j) - 1)`` clamped at 0.

    A root within ``margin`` of an integer is flagged and both adjacent
    ceilings are listed, except for ``j = m`` when the gap certificate
    settles which side of ``(2+alpha)/2`` the root lies on.
    """
    out = []
    m = len(spec.eigenvalues)
    a = spec.scale
    for j, nu in enumerate(spec.eigenvalues, start=1):
        if nu >= 0:
            raise InputError(f"nu_{j} = {nu} is not negative")
        x = math.sqrt(-nu)
        n = round(x)
        near = abs(x - n) <= margin
        alts = (_ceil_term(x),)
        if near:
            alts = tuple(sorted({_ceil_term(n - 0.5), _ceil_term(n + 0.5)}))
            certified = (j == m and spec.gap_status == "resolved" and spec.gap is not None
                         and spec.gap > 0 and abs(n - a) < 1e-12)
            if certified:
                # sqrt(-nu_m) < (2+alpha)/2 = n strictly
                near, alts = False, (_ceil_term(n - 0.5),)
        value = alts[0] if len(alts) == 1 else _ceil_term(x)
        out.append(MorseTerm(j, x, value, near, alts))
    return out


def morse_from_spectrum(spec: SingularSpectrum, margin: float = 1e-4) -> int:
    """``m + 2 sum_j max(0, ceil(sqrt(-nu^alpha_j) - 1))``.

    Emits :class:`NearResonanceWarning` when a root is within ``margin`` of
    an integer; the message carries both candidate indices.
    """
    terms = morse_terms(spec, margin)
    total = spec.m + 2 * sum(t.value for t in terms)
    near = [t for t in terms if t.near_integer]
    if near:
        lo = total - 2 * sum(t.value - min(t.alternatives) for t in near)
        hi = total + 2 * sum(max(t.alternatives) - t.value for t in near)
        warnings.warn(
            NearResonanceWarning(
                f"sqrt(-nu_j) within {margin} of an integer for j="
                f"{[t.j for t in near]}; index is {lo} or {hi} (reported {total})"
            ),
            stacklevel=2,
        )
    return total


def _resonance(x: float, rtol: float) -> tuple[bool, int]:
    n = round(x)
    return (n >= 1 and abs(x - n) <= rtol * max(1.0, abs(x))), n


def asymptotic_morse(m: int, alpha: float, table: ThetaTable | None = None,
                     rtol: float = RESONANCE_RTOL) -> int | MorseInterval:
    """Large-p Morse index ``m + 2 ceil(alpha/2) + 2 sum_i [(2+alpha) theta_i / 4]``.

    When some ``(2+alpha) theta_i / 4`` is an integer (to ``rtol``), the
    value is only known to lie in ``[base - 2 k, base]`` with ``k`` the number
    of such indices, and that interval is returned.
    """
    if int(m) != m or m < 1:
        raise InputError("m must be an integer >= 1")
    if not (math.isfinite(alpha) and alpha >= 0):
        raise InputError("alpha must be >= 0")
    table = table if table is not None and table.i_max >= m - 1 else theta_sequence(m - 1)
    base = m + 2 * math.ceil(alpha / 2.0)
    n_res = 0
    for i in range(1, m):
        x = (2.0 + alpha) * table.theta(i) / 4.0
        res, n = _resonance(x, rtol)
        if res:
            n_res += 1
            base += 2 * n
        else:
            base += 2 * math.floor(x)
    if n_res:
        return MorseInterval(base - 2 * n_res, base)
    return base


def resonant_indices(m: int, alpha: float, table: ThetaTable | None = None,
                     rtol: float = RESONANCE_RTOL) -> list[int]:
    table = table if table is not None and table.i_max >= m - 1 else theta_sequence(m - 1)
    return [i for i in range(1, m)
            if _resonance((2.0 + alpha) * table.theta(i) / 4.0, rtol)[0]]


def bubble_decomposition(m: int, table: ThetaTable | None = None) -> list[int]:
    """Per-bubble Morse indices ``1 + 2 [theta_k / 2]`` for k = m-1..1, then 1."""
    if int(m) != m or m < 1:
        raise InputError("m must be an integer >= 1")
    table = table if table is not None and table.i_max >= m - 1 else theta_sequence(m - 1)
    return [1 + 2 * math.floor(table.theta(k) / 2.0) for k in range(m - 1, 0, -1)] + [1]


def lower_bounds(m: int, alpha: float, le_morse: int, le_radial: int) -> dict[str, int]:
    """Known lower bounds specialized to N = 2 (all sphere multiplicities are 2).

    ``classic``: ``m + 2(m-1)`` for alpha < 2, else ``m + (m-1)(2 + 2[alpha/2])``.
    ``monotonicity``: ``m + (le_morse - le_radial)(1 + [alpha/2])``.
    ``remark``: ``monotonicity + 2(ceil(alpha/2) - m + 1)``.
    """
    if int(m) != m or m < 1 or alpha < 0:
        raise InputError("need m >= 1 and alpha >= 0")
    half = math.floor(alpha / 2.0)
    classic = m + 2 * (m - 1) if alpha < 2 else m + (m - 1) * (2 + 2 * half)
    mono = m + (le_morse - le_radial) * (1 + half)
    remark = mono + 2 * (math.ceil(alpha / 2.0) - m + 1)
    return {"classic": classic, "monotonicity": mono, "remark": remark}


@dataclass(frozen=True)
class MorseReport:
    p: float | None
    m: int
    alpha: float
    morse_from_spectrum: int | None
    asymptotic_value: int | MorseInterval
    radial_index: int
    lower_bounds: dict
    flags: dict = field(default_factory=dict)
    terms: tuple = ()

    def as_dict(self) -> dict:
        av = self.asymptotic_value
        return {
            "p": self.p,
            "m": self.m,
            "alpha": self.alpha,
            "morse_from_spectrum": self.morse_from_spectrum,
            "asymptotic_value": av.as_list() if isinstance(av, MorseInterval) else av,
            "radial_index": self.radial_index,
            "lower_bounds": dict(self.lower_bounds),
            "flags": dict(self.flags),
            "terms": [
                {"j": t.j, "sqrt_minus_nu": t.root, "ceil": t.value,
                 "near_integer": t.near_integer, "alternatives": list(t.alternatives)}
                for t in self.terms
            ],
        }


def morse_report(m: int, alpha: float, spec: SingularSpectrum | None = None,
                 table: ThetaTable | None = None, margin: float = 1e-4) -> MorseReport:
    """Collect every formula for one ``(p, m, alpha)``.

    ``agreement`` compares the spectral index with the asymptotic value (or
    interval); it is ``None`` without a spectrum.  The lower bounds use the
    Lane-Emden asymptotic index ``4m^2 - m - 2`` for ``le_morse``.
    """
    table = table if table is not None and table.i_max >= m - 1 else theta_sequence(m - 1)
    asym = asymptotic_morse(m, alpha, table)
    le = asymptotic_morse(m, 0.0, table)
    lb = lower_bounds(m, alpha, int(le), m)
    value = None
    terms: tuple = ()
    near = False
    if spec is not None:
        if spec.m != m or abs(spec.alpha - alpha) > 0:
            raise InputError("spectrum does not match (m, alpha)")
        terms = tuple(morse_terms(spec, margin))
        near = any(t.near_integer for t in terms)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NearResonanceWarning)
            value = morse_from_spectrum(spec, margin)
    if value is None:
        agree = None
    elif isinstance(asym, MorseInterval):
        agree = value in asym
    else:
        agree = value == asym
    flags = {
        "resonant_alpha": isinstance(asym, MorseInterval),
        "agreement": agree,
        "near_resonance": near,
    }
    return MorseReport(None if spec is None else spec.p, m, float(alpha), value, asym,
                       m, lb, flags, terms)
