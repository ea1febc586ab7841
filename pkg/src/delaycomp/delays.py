"""Time-varying delay profiles and their admissibility checks.

A profile maps time to a nonnegative delay and carries declared bounds:
``phi1`` dominating the delay itself, ``phi2`` dominating the magnitude of
its rate. The rate bound must stay below one so the delayed time t - tau(t)
never runs backwards. The input-channel profile additionally needs
phi1 + phi2 < 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_KINDS = ("constant", "sinusoidal", "table")


@dataclass(frozen=True)
class DelayProfile:
    """One delay channel: tau(t) with declared bounds.

    Construct via :meth:`constant`, :meth:`sinusoidal` or :meth:`from_table`
    so the tight bounds get filled in; declared bounds may pad the tight
    ones but never undercut them (validation reports that).
    """

    kind: str
    phi1: float
    phi2: float
    value: float = 0.0
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    table_t: tuple[float, ...] = field(default=())
    table_tau: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown delay kind {self.kind!r}")

    # -- constructors ----------------------------------------------------

    @classmethod
    def constant(cls, value: float, phi1: float | None = None,
                 phi2: float | None = None) -> "DelayProfile":
        p1 = float(value) if phi1 is None else float(phi1)
        p2 = 0.0 if phi2 is None else float(phi2)
        return cls(kind="constant", value=float(value), phi1=p1, phi2=p2)

    @classmethod
    def sinusoidal(cls, a: float, b: float, c: float,
                   phi1: float | None = None,
                   phi2: float | None = None) -> "DelayProfile":
        """tau(t) = a + b*sin(c*t); tight bounds a+|b| and |b*c|."""
        p1 = a + abs(b) if phi1 is None else float(phi1)
        p2 = abs(b * c) if phi2 is None else float(phi2)
        return cls(kind="sinusoidal", a=float(a), b=float(b), c=float(c),
                   phi1=p1, phi2=p2)

    @classmethod
    def from_table(cls, times, taus, phi1: float | None = None,
                   phi2: float | None = None) -> "DelayProfile":
        """Piecewise-linear table; constant extension outside the extent.

        Declared bounds default to the table's own sups; explicitly
        declared bounds must dominate them (checked by validation).
        """
        t = tuple(float(x) for x in times)
        v = tuple(float(x) for x in taus)
        if len(t) != len(v) or len(t) < 2:
            raise ValueError("table needs >= 2 matching breakpoints")
        if any(t2 <= t1 for t1, t2 in zip(t, t[1:])):
            raise ValueError("table times must be strictly increasing")
        sup_tau = max(v)
        sup_rate = max(abs((v2 - v1) / (t2 - t1))
                       for (t1, v1), (t2, v2) in zip(zip(t, v), zip(t[1:], v[1:])))
        p1 = sup_tau if phi1 is None else float(phi1)
        p2 = sup_rate if phi2 is None else float(phi2)
        return cls(kind="table", table_t=t, table_tau=v, phi1=p1, phi2=p2)

    @classmethod
    def zero(cls) -> "DelayProfile":
        return cls.constant(0.0)

    # -- evaluation -------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        """True for the identically-zero profile (delay-free channel)."""
        return self.kind == "constant" and self.value == 0.0

    def tau(self, t: float) -> float:
        if self.kind == "constant":
            return self.value
        if self.kind == "sinusoidal":
            return self.a + self.b * math.sin(self.c * t)
        return self._table_eval(t)

    def tau_rate(self, t: float) -> float:
        """Analytic d(tau)/dt; right-derivative at table breakpoints."""
        if self.kind == "constant":
            return 0.0
        if self.kind == "sinusoidal":
            return self.b * self.c * math.cos(self.c * t)
        tt, vv = self.table_t, self.table_tau
        if t < tt[0] or t >= tt[-1]:
            return 0.0
        for i in range(len(tt) - 1):
            if tt[i] <= t < tt[i + 1]:
                return (vv[i + 1] - vv[i]) / (tt[i + 1] - tt[i])
        return 0.0

    def _table_eval(self, t: float) -> float:
        tt, vv = self.table_t, self.table_tau
        if t <= tt[0]:
            return vv[0]
        if t >= tt[-1]:
            return vv[-1]
        return float(np.interp(t, tt, vv))

    def computed_sups(self, span: tuple[float, float] | None = None,
                      n: int = 10_000) -> tuple[float, float]:
        """Sampled (sup tau, sup |tau_rate|) over a span."""
        lo, hi = span if span is not None else self._default_span()
        ts = np.linspace(lo, hi, n)
        tau_max = max(self.tau(t) for t in ts)
        rate_max = max(abs(self.tau_rate(t)) for t in ts)
        return tau_max, rate_max

    def _default_span(self) -> tuple[float, float]:
        if self.kind == "sinusoidal" and self.c != 0.0:
            return (0.0, 2.0 * math.pi / abs(self.c))
        if self.kind == "table":
            return (self.table_t[0], self.table_t[-1])
        return (0.0, 1.0)


@dataclass(frozen=True)
class DelayValidation:
    """Outcome of an admissibility check: ok flag plus failure witnesses."""

    ok: bool
    failures: tuple[tuple[str, float, float], ...]  # (condition, witness t, value)

    def describe(self) -> str:
        if self.ok:
            return "ok"
        return "; ".join(f"{name} violated at t={t:.6g} (value {v:.6g})"
                         for name, t, v in self.failures)


def _validate(p: DelayProfile, require_sum: bool,
              span: tuple[float, float] | None, n: int) -> DelayValidation:
    lo, hi = span if span is not None else p._default_span()
    ts = np.linspace(lo, hi, n)
    failures: list[tuple[str, float, float]] = []

    def worst(cond, vals):
        # first and worst witness of a violated condition
        bad = [(t, v) for t, v in zip(ts, vals) if cond(v)]
        if bad:
            t, v = max(bad, key=lambda tv: abs(tv[1]))
            return (t, v)
        return None

    taus = [p.tau(t) for t in ts]
    rates = [p.tau_rate(t) for t in ts]
    w = worst(lambda v: v < 0.0, taus)
    if w:
        failures.append(("tau >= 0",) + w)
    w = worst(lambda v: v > p.phi1, taus)
    if w:
        failures.append(("tau <= phi1",) + w)
    w = worst(lambda v: abs(v) > p.phi2, rates)
    if w:
        failures.append(("|tau_rate| <= phi2",) + w)
    if not p.phi2 < 1.0:
        failures.append(("phi2 < 1", lo, p.phi2))
    if require_sum and not p.phi1 + p.phi2 < 1.0:
        failures.append(("phi1 + phi2 < 1", lo, p.phi1 + p.phi2))
    if p.kind == "table":
        sup_tau, sup_rate = p.computed_sups(span, n)
        if p.phi1 < sup_tau:
            failures.append(("declared phi1 dominates table sup", lo, sup_tau))
        if p.phi2 < sup_rate:
            failures.append(("declared phi2 dominates table rate sup", lo, sup_rate))
    return DelayValidation(ok=not failures, failures=tuple(failures))


def validate_input_delay(p: DelayProfile,
                         span: tuple[float, float] | None = None,
                         n: int = 10_000) -> DelayValidation:
    """Input-channel admissibility: bounds hold and phi1 + phi2 < 1."""
    return _validate(p, require_sum=True, span=span, n=n)


def validate_state_delay(p: DelayProfile,
                         span: tuple[float, float] | None = None,
                         n: int = 10_000) -> DelayValidation:
    """State-channel admissibility: bounds hold, rate bound below one."""
    return _validate(p, require_sum=False, span=span, n=n)
