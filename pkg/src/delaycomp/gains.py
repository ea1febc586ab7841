"""Gain conditions, decay rates, attraction regions, ultimate bounds.

The closed loop is certifiable when the control gains clear a set of strict
inequalities tied to the declared delay bounds and to user-supplied
nondecreasing envelope functions rho1, rho2 that dominate the state-dependent
part of the tracking residual. This module evaluates those inequalities with
signed margins, computes the two decay rates (the core-error rate and the
full Lyapunov rate), the ultimate tracking bound, and the radii of the
region where the certificate is valid. A constant combined envelope
(``rho_bar``) switches the machinery into the global regime where the region
is the whole space.

Everything here is pure float arithmetic: no trajectories, no integration.
Strict inequalities are enforced strictly; a zero denominator coming from a
zero delay bound disables the corresponding term (treated as +inf).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

INF = float("inf")

# cap for the bracket-doubling search: beyond this the envelope is treated
# as never reaching the threshold (empty inverse image)
_BRACKET_CAP = 1e12
_BISECT_RTOL = 1e-10


@dataclass(frozen=True)
class GainSet:
    """Controller and certification gains.

    alpha1, alpha2: error-filter gains; ks: robust feedback gain;
    gamma1, gamma2: weights of the delayed-state functionals;
    omega: weight of the delayed-input functionals.
    """

    alpha1: float
    alpha2: float
    ks: float
    gamma1: float
    gamma2: float
    omega: float

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "ks", "gamma1", "gamma2", "omega"):
            v = getattr(self, name)
            if not v > 0:
                raise ValueError(f"{name} must be positive, got {v}")


@dataclass(frozen=True)
class DelayBounds:
    """Declared sups for the two delay channels.

    input_max / state_max dominate the delays, input_rate_max /
    state_rate_max their rates. Rate bounds must sit strictly below one
    for the delayed clock to stay monotone.
    """

    input_max: float
    input_rate_max: float
    state_max: float
    state_rate_max: float

    def __post_init__(self):
        if self.input_max < 0 or self.state_max < 0:
            raise ValueError("delay bounds must be nonnegative")
        if not (0 <= self.input_rate_max < 1 and 0 <= self.state_rate_max < 1):
            raise ValueError("delay rate bounds must lie in [0, 1)")


def _as_envelope(shape) -> Callable[[float], float]:
    # number -> constant envelope; (a, b) pair -> affine a + b*s
    if callable(shape):
        return shape
    if isinstance(shape, (int, float)):
        return ConstantEnvelope(float(shape))
    a, b = shape
    return AffineEnvelope(float(a), float(b))


@dataclass(frozen=True)
class ConstantEnvelope:
    level: float

    def __call__(self, s: float) -> float:
        return self.level


@dataclass(frozen=True)
class AffineEnvelope:
    offset: float
    slope: float

    def __post_init__(self):
        if self.slope < 0 or self.offset < 0:
            raise ValueError("envelopes must be nonnegative and nondecreasing")

    def __call__(self, s: float) -> float:
        return self.offset + self.slope * s


@dataclass(frozen=True)
class BoundingData:
    """User-declared bounding information for the uncertainty terms.

    rho1 and rho2 are nondecreasing envelopes (numbers, (offset, slope)
    pairs, or callables) dominating the instantaneous-state and
    delayed-state parts of the residual growth. nd_bound, when given,
    dominates the norm of the reference-side residual rate along the run;
    omitting it switches the monitor into (non-rigorous) estimation mode.
    rho_bar declares a constant combined envelope: the global regime.
    """

    rho1: Callable[[float], float]
    rho2: Callable[[float], float]
    nd_bound: float | None = None
    rho_bar: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "rho1", _as_envelope(self.rho1))
        object.__setattr__(self, "rho2", _as_envelope(self.rho2))

    def effective_rho_bar(self, gains: "GainSet",
                          bounds: "DelayBounds") -> float | None:
        """Declared rho_bar, else derived when both envelopes are constant."""
        if self.rho_bar is not None:
            return self.rho_bar
        if isinstance(self.rho1, ConstantEnvelope) and \
                isinstance(self.rho2, ConstantEnvelope):
            return combined_envelope(gains, bounds, self, 0.0)
        return None


@dataclass(frozen=True)
class ConditionReport:
    """One strict inequality: pass flag plus signed margin (pass iff > 0)."""

    name: str
    passed: bool
    value: float
    threshold: float
    margin: float
    note: str = ""


def combined_envelope(gains: GainSet, bounds: DelayBounds, b: BoundingData,
                      err_norm: float) -> float:
    """Combined residual envelope at a given error magnitude.

    sqrt((gamma1 + 2*gamma2*state_max) * rho2^2 + 3 * rho1^2), nondecreasing
    because rho1 and rho2 are.
    """
    w = gains.gamma1 + 2.0 * gains.gamma2 * bounds.state_max
    return math.sqrt(w * b.rho2(err_norm) ** 2 + 3.0 * b.rho1(err_norm) ** 2)


def core_decay_rate(gains: GainSet, bounds: DelayBounds) -> float:
    """Quadratic decay rate of the core error block.

    Half the minimum of the four per-block coefficients; the input-delay
    term drops out (treated as +inf) when the input delay bound is zero.
    """
    terms = [gains.alpha1 / 2.0, gains.alpha2 / 2.0, 1.0]
    if bounds.input_max > 0:
        terms.append(gains.omega * (1.0 - bounds.input_rate_max)
                     / (6.0 * bounds.input_max))
    return 0.5 * min(terms)


def lyap_decay_rate(gains: GainSet, bounds: DelayBounds,
                    sigma: float | None = None) -> float:
    """Decay rate of the full Lyapunov functional (core + memory terms).

    Zero delay bounds disable the corresponding terms rather than dividing
    by zero.
    """
    if sigma is None:
        sigma = core_decay_rate(gains, bounds)
    terms = [sigma, gains.gamma2 * (1.0 - bounds.state_rate_max) / gains.gamma1]
    if bounds.input_max > 0:
        terms.append(gains.omega * (1.0 - bounds.input_rate_max)
                     / (3.0 * bounds.input_max))
        terms.append((1.0 - bounds.input_rate_max) / (3.0 * bounds.input_max))
    if bounds.state_max > 0:
        terms.append((1.0 - bounds.state_rate_max) / (2.0 * bounds.state_max))
    return 0.5 * min(terms)


def check_gain_conditions(gains: GainSet,
                          bounds: DelayBounds) -> list[ConditionReport]:
    """The four strict base gain inequalities, each with a signed margin."""
    reps = []

    def rep(name, value, threshold, note=""):
        margin = value - threshold
        reps.append(ConditionReport(name=name, passed=margin > 0.0,
                                    value=value, threshold=threshold,
                                    margin=margin, note=note))

    rep("alpha1 > 1", gains.alpha1, 1.0)
    rep("alpha2 > 2", gains.alpha2, 2.0)
    rep("gamma1 > 1/(1 - state_rate_max)", gains.gamma1,
        1.0 / (1.0 - bounds.state_rate_max))
    if bounds.input_rate_max < 1.0:
        thr = 3.0 * bounds.input_max / (1.0 - bounds.input_rate_max)
    else:  # unreachable given DelayBounds validation, kept defensive
        thr = INF
    rep("omega > 3*input_max/(1 - input_rate_max)", gains.omega, thr)
    return reps


def check_delay_cond1(gains: GainSet, bounds: DelayBounds) -> ConditionReport:
    """Input-delay smallness: input_max < ks / (6*(omega+1)*(ks+1)^2)."""
    rhs = gains.ks / (6.0 * (gains.omega + 1.0) * (gains.ks + 1.0) ** 2)
    margin = rhs - bounds.input_max
    return ConditionReport(
        name="input delay below small-gain ceiling",
        passed=margin > 0.0, value=bounds.input_max, threshold=rhs,
        margin=margin,
        note=f"ceiling {rhs:.6g} at ks={gains.ks:.6g}")


def region_radius(gains: GainSet, bounds: DelayBounds,
                  b: BoundingData) -> float:
    """Radius where the combined envelope first reaches sqrt(2*ks*sigma).

    Returns +inf when the envelope never reaches the threshold (bracket
    doubled past 1e12), 0 when it already starts at or above it.
    """
    sigma = core_decay_rate(gains, bounds)
    thr = math.sqrt(2.0 * gains.ks * sigma)

    def env(a):
        return combined_envelope(gains, bounds, b, a)

    if env(0.0) >= thr:
        return 0.0
    hi = 1.0
    while env(hi) < thr:
        hi *= 2.0
        if hi > _BRACKET_CAP:
            return INF
    lo = hi / 2.0 if hi > 1.0 else 0.0
    # bisect the first crossing; env is nondecreasing
    while hi - lo > _BISECT_RTOL * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if env(mid) >= thr:
            hi = mid
        else:
            lo = mid
    return hi


def region_radii(gains: GainSet, bounds: DelayBounds,
                 b: BoundingData) -> tuple[float, float]:
    """(validity-region radius, safe-start radius = radius / sqrt(2))."""
    r = region_radius(gains, bounds, b)
    return r, r / math.sqrt(2.0)


def check_delay_cond2(gains: GainSet, bounds: DelayBounds, b: BoundingData,
                      nd_bound: float) -> ConditionReport:
    """Region size check: 3*nd_bound^2/(ks*delta) < region_radius^2."""
    delta = lyap_decay_rate(gains, bounds)
    lhs = 3.0 * nd_bound ** 2 / (gains.ks * delta)
    r = region_radius(gains, bounds, b)
    rhs = r * r if math.isfinite(r) else INF
    if math.isinf(rhs):
        margin = INF
        passed = True
    else:
        margin = rhs - lhs
        passed = margin > 0.0
    return ConditionReport(
        name="ultimate bound fits inside validity region",
        passed=passed, value=lhs, threshold=rhs, margin=margin,
        note=f"region radius {r:.6g}")


def check_global_gain_margin(gains: GainSet, bounds: DelayBounds,
                  b: BoundingData) -> ConditionReport:
    """Global-regime gate for a constant combined envelope.

    ks > rho_bar / (2*sigma). Requires rho_bar (declared or derived from
    constant envelopes).
    """
    rho_bar = b.effective_rho_bar(gains, bounds)
    if rho_bar is None:
        raise ValueError("global-regime check needs a constant combined "
                         "envelope (rho_bar)")
    sigma = core_decay_rate(gains, bounds)
    thr = rho_bar / (2.0 * sigma)
    margin = gains.ks - thr
    return ConditionReport(
        name="feedback gain clears global-regime threshold",
        passed=margin > 0.0, value=gains.ks, threshold=thr, margin=margin,
        note=f"rho_bar {rho_bar:.6g}, core rate {sigma:.6g}")


def ultimate_bound(nd_bound: float, ks: float, delta: float) -> float:
    """Radius of the ball the certified trajectory ultimately enters."""
    return math.sqrt(3.0 * nd_bound ** 2 / (ks * delta))


@dataclass(frozen=True)
class ConditionSet:
    """Everything the gain machinery derives for one configuration."""

    gain_checks: tuple[ConditionReport, ...]
    delay_check1: ConditionReport
    delay_check2: ConditionReport
    global_regime: bool
    sigma: float
    delta: float
    bound: float
    radius: float
    safe_radius: float

    @property
    def all_passed(self) -> bool:
        return (all(r.passed for r in self.gain_checks)
                and self.delay_check1.passed and self.delay_check2.passed)


def evaluate_conditions(gains: GainSet, bounds: DelayBounds, b: BoundingData,
                        nd_bound: float) -> ConditionSet:
    """Run every certification inequality and collect the derived numbers.

    A constant combined envelope switches the region check to the
    global-regime gate; the validity region is then the whole space.
    """
    sigma = core_decay_rate(gains, bounds)
    delta = lyap_decay_rate(gains, bounds, sigma)
    rho_bar = b.effective_rho_bar(gains, bounds)
    if rho_bar is not None:
        c2 = check_global_gain_margin(gains, bounds, b)
        radius, safe_radius = INF, INF
    else:
        c2 = check_delay_cond2(gains, bounds, b, nd_bound)
        radius, safe_radius = region_radii(gains, bounds, b)
    return ConditionSet(
        gain_checks=tuple(check_gain_conditions(gains, bounds)),
        delay_check1=check_delay_cond1(gains, bounds),
        delay_check2=c2,
        global_regime=rho_bar is not None,
        sigma=sigma,
        delta=delta,
        bound=ultimate_bound(nd_bound, gains.ks, delta),
        radius=radius,
        safe_radius=safe_radius,
    )


def search_feasible_ks(alpha1: float, alpha2: float, gamma1: float,
                       gamma2: float, omega: float, bounds: DelayBounds,
                       b: BoundingData, nd_bound: float,
                       ks_lo: float = 1e-3, ks_hi: float = 1e4,
                       grid: int = 200) -> tuple[float, float] | None:
    """Feasible ks interval for both delay conditions, None when empty.

    Log grid (with ks = 1 forced in, where the small-gain ceiling peaks)
    then bisection refinement of the interval edges.
    """

    def feasible(ks: float) -> bool:
        g = GainSet(alpha1=alpha1, alpha2=alpha2, ks=ks, gamma1=gamma1,
                    gamma2=gamma2, omega=omega)
        if not check_delay_cond1(g, bounds).passed:
            return False
        if b.effective_rho_bar(g, bounds) is not None:
            return check_global_gain_margin(g, bounds, b).passed
        return check_delay_cond2(g, bounds, b, nd_bound).passed

    # both conditions carve monotone-edged sets in ks, so the feasible
    # set is a single interval and [first True, last True] brackets it
    ks_grid = sorted(set(
        [1.0] + list(_logspace(ks_lo, ks_hi, grid))))
    flags = [feasible(k) for k in ks_grid]
    if not any(flags):
        return None
    i0 = flags.index(True)
    i1 = len(flags) - 1 - flags[::-1].index(True)
    lo = ks_grid[i0]
    hi = ks_grid[i1]
    if i0 > 0:
        lo = _edge_bisect(feasible, ks_grid[i0 - 1], lo)
    if i1 < len(ks_grid) - 1:
        hi = _edge_bisect(feasible, hi, ks_grid[i1 + 1])
    return lo, hi


def _logspace(lo: float, hi: float, n: int):
    llo, lhi = math.log10(lo), math.log10(hi)
    return [10.0 ** (llo + (lhi - llo) * i / (n - 1)) for i in range(n)]


def _edge_bisect(pred, bad: float, good: float, iters: int = 60) -> float:
    # refine the boundary between an infeasible and a feasible point,
    # approaching from whichever side `bad` sits on
    for _ in range(iters):
        mid = 0.5 * (bad + good)
        if pred(mid):
            good = mid
        else:
            bad = mid
        if abs(good - bad) <= _BISECT_RTOL * max(1.0, abs(good)):
            break
    return good
