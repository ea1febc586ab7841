"""Analysis-side runtime monitor: energy functionals and certification.

The monitor is deliberately omniscient. Unlike the controller it sees the
plant drift, the disturbance, the true delays and the acceleration, because
its job is to evaluate the stability certificate along the simulated run,
not to be implementable.

Per recorded step it assembles the error stack

    z = [pos_err; filt_err; aux_err; input_err]

where aux_err = filt_err' + alpha2*filt_err + input_err uses the true
(unmeasurable) acceleration, and accumulates four windowed energy terms over
the delay horizons:

    in_energy        = input_max * int_{t-tau_i}^{t} ||u'||^2
    in_energy_dbl    = omega * int_{t-tau_i}^{t} int_{s}^{t} ||u'||^2 dtheta ds
    state_energy     = gamma1/(2 ks) * int_{t-tau_s}^{t} rho2(||z||)^2 ||z||^2
    state_energy_dbl = gamma2/ks * (nested form of the same integrand)

The input-rate integrand is the squared slope of the recorded control
polyline; the state-error integrand is sampled at nodes. Signals are zero
before the start time, so the running cumulative of each integrand starts
accumulating at t0 and single-integral windows clip there; the double terms
keep their literal outer range (the inner integral is simply the full
cumulative for outer times before t0). Double integrals use the identity
int_{t-tau}^{t} (U(t) - U(s)) ds  with U the running cumulative, which is
O(1) amortized per step instead of O(window).

The certification state is y = [pos_err; filt_err; aux_err;
sqrt of each energy term], and the candidate functional

    V = (||pos_err||^2 + ||filt_err||^2 + ||aux_err||^2)/2 + energies

must sit between ||y||^2/2 and ||y||^2 and decay at rate delta*||y||^2
outside a residual ball. ``certify`` grades all of that plus the declared
residual bounds and produces a verdict.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field

import numpy as np

from .delays import DelayProfile
from .gains import BoundingData, ConditionSet, GainSet, ultimate_bound
from .history import SampleBuffer
from .plants import DesiredTrajectory, Disturbance, PlantDynamics


class WindowedEnergy:
    """Running windowed integrals of a nonnegative sampled integrand.

    Two sample conventions, picked at construction:

      kind="nodes"   sample w(t_k) at nodes, integrand piecewise linear
                     between them (used for the delayed-error energy)
      kind="panels"  sample is the constant integrand value over the panel
                     ending at t_k (used for the input-rate energy, fed
                     with squared slopes of the recorded control polyline
                     so the input-error inequality is exact discrete
                     Cauchy-Schwarz rather than a quadrature estimate)

    Nothing accumulates before t0; window ranges clip there. Queries are
    anchored at the newest sample time t:

      single(tau) = integral of w over [t - tau, t]
      double(tau) = integral over s in [t - tau, t] of (U(t) - U(s)) ds,
                    U(s) = integral of w over [t0, s], zero before t0

    Both match a brute-force nested quadrature on the same partition to
    round-off (panel integrands exactly; node integrands up to the shared
    trapezoid convention for the outer integral).
    """

    def __init__(self, t0: float, kind: str = "nodes"):
        if kind not in ("nodes", "panels"):
            raise ValueError(f"kind must be 'nodes' or 'panels', got {kind!r}")
        self.kind = kind
        self.ts: list[float] = [float(t0)]
        self.w: list[float] = [0.0]
        self.cum: list[float] = [0.0]       # U at nodes
        self.cum2: list[float] = [0.0]      # trapezoid cumulative of U

    def seed(self, w0: float) -> None:
        """Set the node integrand value at t0 itself (trapezoid left edge)."""
        if self.kind != "nodes":
            raise RuntimeError("panel integrands have no t0 sample")
        if len(self.ts) > 1:
            raise RuntimeError("seed before appending samples")
        if w0 < 0.0:
            raise ValueError("integrand must be nonnegative")
        self.w[0] = float(w0)

    def append(self, t: float, w: float) -> None:
        t, w = float(t), float(w)
        if t <= self.ts[-1]:
            raise ValueError("integrand samples must advance in time")
        if w < 0.0:
            raise ValueError("integrand must be nonnegative")
        dt = t - self.ts[-1]
        if self.kind == "nodes":
            u_new = self.cum[-1] + 0.5 * dt * (self.w[-1] + w)
        else:
            u_new = self.cum[-1] + dt * w
        self.cum2.append(self.cum2[-1] + 0.5 * dt * (self.cum[-1] + u_new))
        self.cum.append(u_new)
        self.ts.append(t)
        self.w.append(w)

    # exact value of U at an off-node time
    def _cum_at(self, a: float) -> float:
        if a <= self.ts[0]:
            return 0.0
        i = bisect_left(self.ts, a)
        if i < len(self.ts) and self.ts[i] == a:
            return self.cum[i]
        t_lo = self.ts[i - 1]
        if self.kind == "panels":
            return self.cum[i - 1] + (a - t_lo) * self.w[i]
        t_hi = self.ts[i]
        w_a = self.w[i - 1] + (self.w[i] - self.w[i - 1]) * (a - t_lo) / (t_hi - t_lo)
        return self.cum[i - 1] + 0.5 * (a - t_lo) * (self.w[i - 1] + w_a)

    def single(self, tau: float) -> float:
        """Window integral of w over [t - tau, t], clipped at t0."""
        if tau < 0:
            raise ValueError("window must be nonnegative")
        a = self.ts[-1] - tau
        return self.cum[-1] - self._cum_at(a)

    def double(self, tau: float) -> float:
        """Nested window integral via the cumulative identity."""
        if tau < 0:
            raise ValueError("window must be nonnegative")
        t_end = self.ts[-1]
        a = t_end - tau
        u_end = self.cum[-1]
        # integral of U over [max(a, t0), t] on the partition the nested
        # oracle would use: partial panel by trapezoid, full panels exact
        a_eff = max(a, self.ts[0])
        i = bisect_left(self.ts, a_eff)
        if i < len(self.ts) and self.ts[i] == a_eff:
            tail = self.cum2[-1] - self.cum2[i]
        else:
            partial = 0.5 * (self.ts[i] - a_eff) * (self._cum_at(a_eff) + self.cum[i])
            tail = partial + self.cum2[-1] - self.cum2[i]
        return tau * u_end - tail


@dataclass(frozen=True)
class MonitorRecord:
    """One analysis sample of the closed loop."""

    t: float
    pos_err: np.ndarray
    filt_err: np.ndarray
    aux_err: np.ndarray
    input_err: np.ndarray
    nd: np.ndarray
    in_energy: float
    in_energy_dbl: float
    state_energy: float
    state_energy_dbl: float
    z_norm: float
    y_norm: float
    v_lyap: float
    vdot_fd: float
    decay_ok: bool
    inside_safe: bool


class MonitorLog:
    """Columnar store of monitor samples, finalized into numpy arrays."""

    def __init__(self, n: int):
        self.n = n
        self.t: list[float] = []
        self.pos_err: list[np.ndarray] = []
        self.filt_err: list[np.ndarray] = []
        self.aux_err: list[np.ndarray] = []
        self.input_err: list[np.ndarray] = []
        self.s2: list[np.ndarray] = []
        self.in_energy: list[float] = []
        self.in_energy_dbl: list[float] = []
        self.state_energy: list[float] = []
        self.state_energy_dbl: list[float] = []
        self.z_norm: list[float] = []
        self.y_norm: list[float] = []
        self.v_lyap: list[float] = []
        self.arr: dict[str, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self.t)

    def finalize(self) -> None:
        """Convert columns to arrays and fill the derived FD columns."""
        a = self.arr
        a["t"] = np.asarray(self.t)
        for name in ("pos_err", "filt_err", "aux_err", "input_err", "s2"):
            a[name] = np.asarray(getattr(self, name)).reshape(len(self.t), self.n)
        for name in ("in_energy", "in_energy_dbl", "state_energy",
                     "state_energy_dbl", "z_norm", "y_norm", "v_lyap"):
            a[name] = np.asarray(getattr(self, name))
        a["nd"] = _central_fd(a["s2"], a["t"])
        a["vdot_fd"] = _central_fd(a["v_lyap"][:, None], a["t"])[:, 0]

    def record(self, i: int) -> MonitorRecord:
        a = self.arr
        return MonitorRecord(
            t=float(a["t"][i]), pos_err=a["pos_err"][i],
            filt_err=a["filt_err"][i], aux_err=a["aux_err"][i],
            input_err=a["input_err"][i], nd=a["nd"][i],
            in_energy=float(a["in_energy"][i]),
            in_energy_dbl=float(a["in_energy_dbl"][i]),
            state_energy=float(a["state_energy"][i]),
            state_energy_dbl=float(a["state_energy_dbl"][i]),
            z_norm=float(a["z_norm"][i]), y_norm=float(a["y_norm"][i]),
            v_lyap=float(a["v_lyap"][i]),
            vdot_fd=float(a["vdot_fd"][i]),
            decay_ok=bool(a.get("decay_ok", np.ones(len(self.t), bool))[i]),
            inside_safe=bool(a.get("inside_safe", np.ones(len(self.t), bool))[i]),
        )


def _central_fd(values: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Central differences inside, one-sided at the ends."""
    out = np.empty_like(values, dtype=float)
    if len(t) < 2:
        out[:] = 0.0
        return out
    out[1:-1] = (values[2:] - values[:-2]) / (t[2:] - t[:-2])[:, None]
    out[0] = (values[1] - values[0]) / (t[1] - t[0])
    out[-1] = (values[-1] - values[-2]) / (t[-1] - t[-2])
    return out


class Monitor:
    """Accumulates analysis records along a run.

    Reads the same state/input histories the engine integrates with, but
    evaluates everything with the true delays (the certificate concerns the
    real closed loop, not the controller's beliefs).
    """

    def __init__(self, plant: PlantDynamics, traj: DesiredTrajectory,
                 dist: Disturbance, input_delay: DelayProfile,
                 state_delay: DelayProfile, gains: GainSet,
                 bounding: BoundingData, state_hist: SampleBuffer,
                 input_hist: SampleBuffer, t0: float, h: float):
        self.plant = plant
        self.traj = traj
        self.dist = dist
        self.input_delay = input_delay
        self.state_delay = state_delay
        self.gains = gains
        self.bounding = bounding
        self.state_hist = state_hist
        self.input_hist = input_hist
        self.t0 = float(t0)
        self.h = float(h)
        self.n = plant.n
        # panel samples (polyline slopes) make ||e_u||^2 <= P exact
        # discrete Cauchy-Schwarz instead of a quadrature estimate
        self.energy_u = WindowedEnergy(t0, kind="panels")
        self.energy_z = WindowedEnergy(t0, kind="nodes")
        self.log = MonitorLog(plant.n)
        self._u_prev: np.ndarray | None = None
        self._t_prev = float(t0)

    def _delayed_state(self, t: float,
                       x: np.ndarray, xdot: np.ndarray
                       ) -> tuple[np.ndarray, np.ndarray]:
        if self.state_delay.is_zero:
            return x, xdot
        both = self.state_hist.eval(t - self.state_delay.tau(t))
        return both[:self.n], both[self.n:]

    def ref_side_drift(self, t: float) -> np.ndarray:
        """Reference-and-disturbance part of the closed-loop forcing.

        Differentiating this in time gives the residual rate whose sup the
        declared nd_bound must dominate.
        """
        xd = self.traj.position(t)
        xd_dot = self.traj.velocity(t)
        tau = self.state_delay.tau(t)
        td = t - tau
        if td > self.t0:
            g_term = self.plant.g(self.traj.position(td),
                                  self.traj.velocity(td), t)
        else:
            zero = np.zeros(self.n)
            g_term = self.plant.g(zero, zero, t)
        return (self.traj.acceleration(t) - self.plant.f(xd, xd_dot, t)
                - g_term - self.dist.value(t))

    def update(self, t: float, x: np.ndarray, xdot: np.ndarray,
               u_now: np.ndarray) -> None:
        """Record one analysis sample at a step boundary."""
        g = self.gains
        ref_pos = self.traj.position(t)
        ref_vel = self.traj.velocity(t)
        ref_acc = self.traj.acceleration(t)
        pos_err = ref_pos - x
        vel_err = ref_vel - xdot
        filt_err = vel_err + g.alpha1 * pos_err

        x_del, xdot_del = self._delayed_state(t, x, xdot)
        if self.input_delay.is_zero:
            u_del_true = u_now
        else:
            u_del_true = self.input_hist.eval(t - self.input_delay.tau(t))
        accel = (self.plant.f(x, xdot, t) + self.plant.g(x_del, xdot_del, t)
                 + self.dist.value(t) + u_del_true)
        filt_err_rate = (ref_acc - accel) + g.alpha1 * vel_err
        input_err = u_del_true - u_now
        aux_err = filt_err_rate + g.alpha2 * filt_err + input_err

        z_sq = (pos_err @ pos_err + filt_err @ filt_err
                + aux_err @ aux_err + input_err @ input_err)
        z_norm = math.sqrt(z_sq)
        w_z = self.bounding.rho2(z_norm) ** 2 * z_sq
        if t > self.t0:
            du = (u_now - self._u_prev) / (t - self._t_prev)
            self.energy_u.append(t, float(du @ du))
            self.energy_z.append(t, w_z)
        else:
            self.energy_z.seed(w_z)
        self._u_prev = u_now.copy()
        self._t_prev = t

        tau_i = self.input_delay.tau(t)
        tau_s = self.state_delay.tau(t)
        p_term = self.input_delay.phi1 * self.energy_u.single(tau_i)
        q_term = g.omega * self.energy_u.double(tau_i)
        r_term = g.gamma1 / (2.0 * g.ks) * self.energy_z.single(tau_s)
        s_term = g.gamma2 / g.ks * self.energy_z.double(tau_s)

        core_sq = pos_err @ pos_err + filt_err @ filt_err + aux_err @ aux_err
        energies = p_term + q_term + r_term + s_term
        v_lyap = 0.5 * core_sq + energies
        y_norm = math.sqrt(core_sq + energies)

        log = self.log
        log.t.append(t)
        log.pos_err.append(pos_err.copy())
        log.filt_err.append(filt_err.copy())
        log.aux_err.append(aux_err.copy())
        log.input_err.append(input_err.copy())
        log.s2.append(self.ref_side_drift(t))
        log.in_energy.append(p_term)
        log.in_energy_dbl.append(q_term)
        log.state_energy.append(r_term)
        log.state_energy_dbl.append(s_term)
        log.z_norm.append(z_norm)
        log.y_norm.append(y_norm)
        log.v_lyap.append(v_lyap)

    def finalize(self) -> MonitorLog:
        self.log.finalize()
        return self.log


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CertificationReport:
    """Graded stability certificate for one simulated run."""

    verdict: str
    conditions_passed: bool
    decay_violations: int
    decay_checked: int
    decay_fraction: float
    bound: float
    decay_radius: float
    first_entry_time: float | None
    stays_within: bool
    start_in_safe_region: bool
    left_region: bool
    nd_sup: float
    nd_bound_ok: bool
    residual_max_ratio: float
    residual_ok: bool
    sandwich_ok: bool
    embedding_ok: bool
    input_energy_ok: bool
    nd_bound_used: float
    nd_bound_estimated: bool
    diagnostics: tuple[str, ...] = field(default=())


def _interp_rows(t_query: float, t: np.ndarray, rows: np.ndarray,
                 t0: float) -> np.ndarray:
    """Linear interpolation of logged vector rows, zero at or before t0."""
    if t_query <= t0:
        return np.zeros(rows.shape[1])
    i = np.searchsorted(t, t_query)
    if i >= len(t):
        return rows[-1]
    if t[i] == t_query or i == 0:
        return rows[i]
    w = (t_query - t[i - 1]) / (t[i] - t[i - 1])
    return rows[i - 1] + w * (rows[i] - rows[i - 1])


def residual_check(log: MonitorLog, gains: GainSet, bounding: BoundingData,
                   state_delay: DelayProfile, t0: float,
                   rel_cushion: float = 1e-3) -> tuple[bool, float]:
    """Verify the declared envelopes dominate the measured residual.

    The residual is reconstructed from the closed loop as
    aux_err' - nd + filt_err + (ks+1)*aux_err with aux_err' by central
    differences (endpoints skipped). Returns (ok, max ratio to the bound).
    """
    a = log.arr
    t = a["t"]
    if len(t) < 3:
        return True, 0.0
    aux_rate = _central_fd(a["aux_err"], t)
    worst = 0.0
    ok = True
    z_rows = np.hstack([a["pos_err"], a["filt_err"], a["aux_err"],
                        a["input_err"]])
    for k in range(1, len(t) - 1):
        resid = (aux_rate[k] - a["nd"][k] + a["filt_err"][k]
                 + (gains.ks + 1.0) * a["aux_err"][k])
        z_nrm = a["z_norm"][k]
        z_del = _interp_rows(t[k] - state_delay.tau(t[k]), t, z_rows, t0)
        zd_nrm = float(np.linalg.norm(z_del))
        envelope = (bounding.rho1(z_nrm) * z_nrm
                    + bounding.rho2(zd_nrm) * zd_nrm)
        allowed = envelope * (1.0 + rel_cushion) + 1e-9
        r = float(np.linalg.norm(resid))
        if envelope > 0:
            worst = max(worst, r / envelope)
        elif r > 1e-9:
            worst = math.inf
        if r > allowed:
            ok = False
    return ok, worst


def certify(log: MonitorLog, conds: ConditionSet, gains: GainSet,
            bounding: BoundingData, state_delay: DelayProfile, t0: float,
            delay_scale: float = 1.0,
            diverged: bool = False) -> CertificationReport:
    """Grade a finished run against the certificate.

    Certification requires: every gain/delay condition strictly satisfied, a
    declared (not estimated) residual-rate bound that the measured rate
    respects, the envelope residual check, zero decay violations outside the
    residual ball, entry into (and containment near) the ultimate-bound
    ball, start inside the safe-start region without ever leaving the
    validity region, the structural norm inequalities, and a matched input
    delay. Anything less, with the run still finite, is bounded but
    uncertified.
    """
    diags: list[str] = []
    a = log.arr
    t = a["t"]
    n_rec = len(t)

    nd_norm = np.linalg.norm(a["nd"], axis=1) if n_rec else np.zeros(0)
    nd_sup = float(nd_norm.max()) if n_rec else 0.0
    estimated = bounding.nd_bound is None
    nd_bound = bounding.nd_bound if not estimated else 1.1 * nd_sup
    if estimated:
        diags.append(f"residual-rate bound estimated from samples "
                     f"(non-rigorous): {nd_bound:.6g}")
    nd_bound_ok = bool(nd_sup <= nd_bound)
    if not nd_bound_ok:
        k_bad = int(nd_norm.argmax())
        diags.append(
            f"declared residual-rate bound violated: measured sup "
            f"{nd_sup:.6g} > bound {nd_bound:.6g} at t={t[k_bad]:.6g}")

    bound = ultimate_bound(nd_bound, gains.ks, conds.delta)
    decay_radius = bound / math.sqrt(2.0)

    # decay inequality outside the residual ball, central-FD interior only
    violations = 0
    checked = 0
    decay_ok = np.ones(n_rec, dtype=bool)
    for k in range(1, n_rec - 1):
        y = a["y_norm"][k]
        if y < decay_radius:
            continue
        checked += 1
        tol = max(1e-6, 0.05 * conds.delta * y * y)
        if a["vdot_fd"][k] > -conds.delta * y * y + tol:
            violations += 1
            decay_ok[k] = False
    if violations:
        diags.append(f"decay inequality violated at {violations} of "
                     f"{checked} active samples")

    # ultimate-bound entry and containment
    first_entry = None
    stays = True
    for k in range(n_rec):
        if first_entry is None:
            if a["y_norm"][k] <= bound:
                first_entry = float(t[k])
        elif a["y_norm"][k] > 1.05 * bound:
            stays = False
            diags.append(f"left 1.05x ultimate ball at t={t[k]:.6g}")
            break
    if first_entry is None:
        stays = False
        diags.append("never entered the ultimate-bound ball")

    # region membership (trivial in the global regime)
    inside_safe = np.ones(n_rec, dtype=bool)
    if math.isfinite(conds.safe_radius):
        inside_safe = a["y_norm"] < conds.safe_radius
    start_safe = bool(n_rec and a["y_norm"][0] < conds.safe_radius)
    left_region = bool(n_rec and (a["y_norm"] >= conds.radius).any()) \
        if math.isfinite(conds.radius) else False
    if not start_safe:
        diags.append("initial certification state outside safe-start region")
    if left_region:
        diags.append("trajectory left the validity region")
    log.arr["decay_ok"] = decay_ok
    log.arr["inside_safe"] = inside_safe

    # structural inequalities
    core_sq = (np.linalg.norm(a["pos_err"], axis=1) ** 2
               + np.linalg.norm(a["filt_err"], axis=1) ** 2
               + np.linalg.norm(a["aux_err"], axis=1) ** 2)
    energies = (a["in_energy"] + a["in_energy_dbl"] + a["state_energy"]
                + a["state_energy_dbl"])
    y_sq = a["y_norm"] ** 2
    v = a["v_lyap"]
    sandwich_ok = bool(np.all(0.5 * y_sq <= v * (1 + 1e-9) + 1e-12)
                       and np.all(v <= y_sq * (1 + 1e-9) + 1e-12))
    eu_sq = np.linalg.norm(a["input_err"], axis=1) ** 2
    z_sq = core_sq + eu_sq
    embedding_ok = bool(np.all(z_sq <= y_sq * (1 + 1e-9) + 1e-12))
    input_energy_ok = bool(np.all(
        eu_sq <= a["in_energy"] * (1 + 1e-6) + 1e-12))
    if not sandwich_ok:
        diags.append("functional left the norm sandwich")
    if not embedding_ok:
        diags.append("error stack norm exceeded certification state norm")
    if not input_energy_ok:
        diags.append("input-error energy inequality violated")

    residual_ok, residual_ratio = residual_check(
        log, gains, bounding, state_delay, t0)
    if not residual_ok:
        diags.append(
            f"declared envelopes do not dominate the measured residual "
            f"(worst ratio {residual_ratio:.3f})")

    mismatch = delay_scale != 1.0
    if mismatch:
        diags.append(f"input-delay estimate scaled by {delay_scale:g}; "
                     "certificate does not apply")

    horizon = float(t[-1] - t[0]) if n_rec > 1 else 0.0
    min_horizon = 5.0 * max(1.0 / gains.alpha1, 1.0 / gains.alpha2,
                            1.0 / conds.delta)
    too_short = horizon < min_horizon

    if diverged:
        verdict = "diverged"
    elif n_rec < 3 or too_short:
        verdict = "inconclusive"
        diags.append(f"horizon {horizon:.3g} below heuristic minimum "
                     f"{min_horizon:.3g}")
    elif not conds.all_passed:
        verdict = "conditions not satisfied"
    elif (violations == 0 and first_entry is not None and stays
          and start_safe and not left_region and nd_bound_ok
          and not estimated and residual_ok and sandwich_ok
          and embedding_ok and input_energy_ok and not mismatch):
        verdict = "certified"
    else:
        verdict = "bounded (uncertified)"

    return CertificationReport(
        verdict=verdict,
        conditions_passed=conds.all_passed,
        decay_violations=violations,
        decay_checked=checked,
        decay_fraction=violations / checked if checked else 0.0,
        bound=bound,
        decay_radius=decay_radius,
        first_entry_time=first_entry,
        stays_within=stays,
        start_in_safe_region=start_safe,
        left_region=left_region,
        nd_sup=nd_sup,
        nd_bound_ok=nd_bound_ok,
        residual_max_ratio=residual_ratio,
        residual_ok=residual_ok,
        sandwich_ok=sandwich_ok,
        embedding_ok=embedding_ok,
        input_energy_ok=input_energy_ok,
        nd_bound_used=float(nd_bound),
        nd_bound_estimated=estimated,
        diagnostics=tuple(diags),
    )
