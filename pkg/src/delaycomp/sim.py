"""Fixed-step integration of the delayed closed loop.

Classical RK4 on the extended state (x, xdot, v) with history-based lookups
for the delayed terms. The state history holds (x, xdot) jointly; the input
history is the controller's own output record, appended at step boundaries
and interpolated at stage times (the control signal is continuous, so the
piecewise-linear record sits below the delayed-term error floor of the
integrator).

Delayed lookups never read past the integration frontier. The only
exception is a delay dipping under the step size, where stage times can
outrun the newest record; those lookups clamp to the frontier, are counted,
and mark the run "reduced-order accuracy". Zero-delay channels short-circuit
to stage-local values so the delay-free reduction keeps full RK4 order.
"""

from __future__ import annotations

import functools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .controller import Controller, ControllerConfig
from .delays import DelayProfile
from .gains import (BoundingData, ConditionSet, DelayBounds, GainSet,
                    evaluate_conditions)
from .history import SampleBuffer
from .monitor import CertificationReport, Monitor, MonitorLog, certify
from .plants import DesiredTrajectory, Disturbance, PlantDynamics

DIVERGENCE_NORM = 1e9

EXIT_OK = 0
EXIT_DIVERGED = 3


@dataclass(frozen=True)
class SimConfig:
    """One closed-loop experiment, fully specified."""

    plant: PlantDynamics
    trajectory: DesiredTrajectory
    disturbance: Disturbance
    input_delay: DelayProfile
    state_delay: DelayProfile
    bounds: DelayBounds
    gains: GainSet
    bounding: BoundingData
    t0: float = 0.0
    t_end: float = 10.0
    h: float = 1e-3
    x0: np.ndarray | None = None
    xdot0: np.ndarray | None = None
    delay_scale: float = 1.0
    monitor_enabled: bool = True
    seed: int = 0
    init_jitter: float = 0.0

    def validate(self) -> None:
        if not self.h > 0:
            raise ValueError(f"step size must be positive, got {self.h}")
        if not self.t_end > self.t0:
            raise ValueError("t_end must exceed t0")
        if self.delay_scale <= 0:
            raise ValueError("delay_scale must be positive")
        if self.init_jitter < 0:
            raise ValueError("init_jitter must be nonnegative")
        n = self.plant.n
        if self.trajectory.n != n or self.disturbance.d0.shape != (n,):
            raise ValueError("plant/trajectory/disturbance dimension mismatch")
        for name in ("x0", "xdot0"):
            val = getattr(self, name)
            if val is not None and np.shape(val) != (n,):
                raise ValueError(f"{name} must have shape ({n},)")

    def steps(self) -> int:
        return int(round((self.t_end - self.t0) / self.h))

    def initial_state(self) -> tuple[np.ndarray, np.ndarray]:
        """Configured initial condition, jittered when requested.

        The draw order is fixed (position block then velocity block) so a
        given seed always produces the same experiment.
        """
        n = self.plant.n
        x0 = np.zeros(n) if self.x0 is None else np.asarray(self.x0, float)
        xd0 = np.zeros(n) if self.xdot0 is None else np.asarray(self.xdot0,
                                                                float)
        if self.init_jitter > 0:
            rng = np.random.default_rng(self.seed)
            x0 = x0 + self.init_jitter * (2.0 * rng.random(n) - 1.0)
            xd0 = xd0 + self.init_jitter * (2.0 * rng.random(n) - 1.0)
        return x0, xd0


@dataclass
class SimResult:
    """Trajectory record plus certification for one run."""

    t: np.ndarray
    x: np.ndarray
    xdot: np.ndarray
    ref_pos: np.ndarray
    pos_err: np.ndarray
    filt_err: np.ndarray
    u: np.ndarray
    input_err: np.ndarray
    tau_input: np.ndarray
    tau_state: np.ndarray
    monitor: MonitorLog | None
    certification: CertificationReport | None
    conditions: ConditionSet
    diverged: bool
    exit_status: int
    labels: tuple[str, ...]
    clamped_lookups: int
    pruned_samples: int
    config: SimConfig

    @property
    def verdict(self) -> str:
        if self.certification is not None:
            return self.certification.verdict
        return "diverged" if self.diverged else "not monitored"


def _sampled_delay_range(p: DelayProfile, t0: float, t_end: float,
                         n: int = 4096) -> tuple[float, float]:
    ts = np.linspace(t0, t_end, n)
    vals = [p.tau(float(t)) for t in ts]
    return min(vals), max(vals)


def run(cfg: SimConfig) -> SimResult:
    """Integrate one experiment and grade it.

    Proceeds even when the gain or delay conditions fail (the certification
    verdict carries the label); aborts only on numerical divergence, and
    then still returns the partial trajectory with exit status 3.
    """
    cfg.validate()
    plant, traj, dist = cfg.plant, cfg.trajectory, cfg.disturbance
    in_delay, st_delay = cfg.input_delay, cfg.state_delay
    gains = cfg.gains
    n = plant.n
    t0, h = cfg.t0, cfg.h
    n_steps = cfg.steps()

    x, xdot = cfg.initial_state()
    v = np.zeros(n)
    state_hist = SampleBuffer(t0, 2 * n, np.concatenate([x, xdot]))
    ctrl = Controller(
        ControllerConfig(gains.alpha1, gains.alpha2, gains.ks, in_delay,
                         cfg.delay_scale), n, t0)
    u_hist = ctrl.past_outputs

    pos_err, filt_err = ctrl.errors(x, xdot, traj.position(t0),
                                    traj.velocity(t0))
    ctrl.freeze_initial(filt_err)
    u = ctrl.output(filt_err, v)

    monitor = None
    if cfg.monitor_enabled:
        monitor = Monitor(plant, traj, dist, in_delay, st_delay, gains,
                          cfg.bounding, state_hist, u_hist, t0, h)
        monitor.update(t0, x, xdot, u)

    labels: list[str] = []
    in_lo, in_hi = _sampled_delay_range(in_delay, t0, cfg.t_end)
    st_lo, st_hi = _sampled_delay_range(st_delay, t0, cfg.t_end)
    min_pos = min((lo for lo in (in_lo, st_lo) if lo > 0), default=math.inf)
    if math.isfinite(min_pos) and h > min_pos / 4.0:
        labels.append("step size exceeds a quarter of the smallest delay")
    prune_horizon = (max(in_delay.phi1 * max(1.0, cfg.delay_scale),
                         st_delay.phi1, in_hi * max(1.0, cfg.delay_scale),
                         st_hi) + 4.0 * h)

    cols_t = [t0]
    cols = {name: [arr.copy()] for name, arr in (
        ("x", x), ("xdot", xdot), ("ref_pos", traj.position(t0)),
        ("pos_err", pos_err), ("filt_err", filt_err), ("u", u),
        ("input_err", np.zeros(n)))}
    cols_taui = [in_delay.tau(t0)]
    cols_taus = [st_delay.tau(t0)]

    ks1 = gains.ks + 1.0
    a1, a2 = gains.alpha1, gains.alpha2
    e2_0 = ctrl.filt_err0
    stage_clamps = 0
    pruned = 0
    diverged = False

    traj_pos, traj_vel = traj.position, traj.velocity
    plant_f, plant_g, dist_val = plant.f, plant.g, dist.value
    in_zero, st_zero = in_delay.is_zero, st_delay.is_zero
    in_tau, st_tau = in_delay.tau, st_delay.tau
    ctrl_input_err = ctrl.input_err
    st_eval, u_eval = state_hist.eval_clamped, u_hist.eval_clamped

    def deriv(ts, xs, xds, vs):
        nonlocal stage_clamps
        e2s = (traj_vel(ts) - xds) + a1 * (traj_pos(ts) - xs)
        us = ks1 * (e2s - e2_0) + vs
        vdot = ks1 * (a2 * e2s + ctrl_input_err(ts, us))
        if st_zero:
            x_del, xd_del = xs, xds
        else:
            both, clamped = st_eval(ts - st_tau(ts))
            stage_clamps += clamped
            x_del, xd_del = both[:n], both[n:]
        if in_zero:
            u_del = us
        else:
            u_del, clamped = u_eval(ts - in_tau(ts))
            stage_clamps += clamped
        acc = (plant_f(xs, xds, ts) + plant_g(x_del, xd_del, ts)
               + dist_val(ts) + u_del)
        return xds, acc, vdot

    half = 0.5 * h
    sixth = h / 6.0
    for k in range(n_steps):
        t = t0 + k * h
        d1x, d1v, d1f = deriv(t, x, xdot, v)
        d2x, d2v, d2f = deriv(t + half, x + half * d1x, xdot + half * d1v,
                              v + half * d1f)
        d3x, d3v, d3f = deriv(t + half, x + half * d2x, xdot + half * d2v,
                              v + half * d2f)
        d4x, d4v, d4f = deriv(t + h, x + h * d3x, xdot + h * d3v,
                              v + h * d3f)
        x = x + sixth * (d1x + 2.0 * (d2x + d3x) + d4x)
        xdot = xdot + sixth * (d1v + 2.0 * (d2v + d3v) + d4v)
        v = v + sixth * (d1f + 2.0 * (d3f + d2f) + d4f)
        t_next = t0 + (k + 1) * h

        flat = math.sqrt(float(x @ x + xdot @ xdot + v @ v))
        if not math.isfinite(flat) or flat > DIVERGENCE_NORM:
            diverged = True
            break

        ref_p, ref_v = traj_pos(t_next), traj_vel(t_next)
        pos_err, filt_err = ctrl.errors(x, xdot, ref_p, ref_v)
        u = ctrl.output(filt_err, v)
        state_hist.append(t_next, np.concatenate([x, xdot]))
        ctrl.record_output(t_next, u)
        if in_zero:
            eu_true = np.zeros(n)
        else:
            u_past, clamped = u_eval(t_next - in_tau(t_next))
            stage_clamps += clamped
            eu_true = u_past - u

        cols_t.append(t_next)
        cols["x"].append(x)
        cols["xdot"].append(xdot)
        cols["ref_pos"].append(ref_p)
        cols["pos_err"].append(pos_err)
        cols["filt_err"].append(filt_err)
        cols["u"].append(u)
        cols["input_err"].append(eu_true)
        cols_taui.append(in_tau(t_next))
        cols_taus.append(st_tau(t_next))

        if monitor is not None:
            monitor.update(t_next, x, xdot, u)
        if k % 512 == 511:
            pruned += state_hist.prune(prune_horizon)
            pruned += u_hist.prune(prune_horizon)

    total_clamps = stage_clamps + ctrl.clamp_count
    if total_clamps:
        labels.append("reduced-order accuracy")

    log = monitor.finalize() if monitor is not None else None

    # conditions need a concrete residual-rate bound; estimation mode takes
    # the same padded sample sup the certification report documents
    nd_for_conditions = cfg.bounding.nd_bound
    if nd_for_conditions is None:
        nd_for_conditions = 0.0
        if log is not None and len(log):
            nd_norm = np.linalg.norm(log.arr["nd"], axis=1)
            nd_for_conditions = 1.1 * float(nd_norm.max())
    conds = evaluate_conditions(gains, cfg.bounds, cfg.bounding,
                                nd_for_conditions)

    cert = None
    if log is not None:
        cert = certify(log, conds, gains, cfg.bounding, st_delay, t0,
                       delay_scale=cfg.delay_scale, diverged=diverged)

    return SimResult(
        t=np.asarray(cols_t),
        x=np.asarray(cols["x"]),
        xdot=np.asarray(cols["xdot"]),
        ref_pos=np.asarray(cols["ref_pos"]),
        pos_err=np.asarray(cols["pos_err"]),
        filt_err=np.asarray(cols["filt_err"]),
        u=np.asarray(cols["u"]),
        input_err=np.asarray(cols["input_err"]),
        tau_input=np.asarray(cols_taui),
        tau_state=np.asarray(cols_taus),
        monitor=log,
        certification=cert,
        conditions=conds,
        diverged=diverged,
        exit_status=EXIT_DIVERGED if diverged else EXIT_OK,
        labels=tuple(labels),
        clamped_lookups=total_clamps,
        pruned_samples=pruned,
        config=cfg,
    )


# ---------------------------------------------------------------------------
# parameter sweeps
# ---------------------------------------------------------------------------

_GAIN_KEYS = ("alpha1", "alpha2", "ks", "gamma1", "gamma2", "omega")
_SIM_KEYS = ("h", "t_end", "seed", "init_jitter")

SWEEPABLE_KEYS = tuple(
    ["controller.input_delay_scale"]
    + [f"gains.{k}" for k in _GAIN_KEYS]
    + [f"sim.{k}" for k in _SIM_KEYS]
    + ["delays.input.phi1", "delays.state.phi1"]
)


def apply_axis(cfg: SimConfig, axis: str, value: float) -> SimConfig:
    """Return a copy of cfg with one sweepable key replaced."""
    if axis == "controller.input_delay_scale" or axis == "input_delay_scale":
        return replace(cfg, delay_scale=float(value))
    scope, _, leaf = axis.partition(".")
    if scope == "gains" and leaf in _GAIN_KEYS:
        return replace(cfg, gains=replace(cfg.gains, **{leaf: float(value)}))
    if scope == "sim" and leaf in _SIM_KEYS:
        cast = int if leaf == "seed" else float
        return replace(cfg, **{leaf: cast(value)})
    if axis in ("delays.input.phi1", "phi_i1"):
        return replace(cfg,
                       input_delay=replace(cfg.input_delay,
                                           phi1=float(value)),
                       bounds=replace(cfg.bounds, input_max=float(value)))
    if axis in ("delays.state.phi1", "phi_s1"):
        return replace(cfg,
                       state_delay=replace(cfg.state_delay,
                                           phi1=float(value)),
                       bounds=replace(cfg.bounds, state_max=float(value)))
    raise KeyError(f"unknown sweep axis {axis!r}; "
                   f"known: {', '.join(SWEEPABLE_KEYS)}")


@dataclass(frozen=True)
class SweepRow:
    """Summary of one sweep member."""

    value: float
    verdict: str
    steady_y_norm: float
    max_pos_err_tail: float
    error: str = ""


def _summarize(value: float, res: SimResult) -> SweepRow:
    tail = slice(len(res.t) // 2, None)
    pos_tail = np.linalg.norm(res.pos_err[tail], axis=1)
    steady = math.nan
    if res.monitor is not None and len(res.monitor):
        steady = float(res.monitor.arr["y_norm"][tail].max())
    return SweepRow(value=float(value), verdict=res.verdict,
                    steady_y_norm=steady,
                    max_pos_err_tail=float(pos_tail.max()))


def _sweep_one(cfg: SimConfig, axis: str, value: float) -> SweepRow:
    try:
        return _summarize(value, run(apply_axis(cfg, axis, value)))
    except Exception as exc:  # per-run failure must not kill the sweep
        return SweepRow(value=float(value), verdict="error",
                        steady_y_norm=math.nan, max_pos_err_tail=math.nan,
                        error=f"{type(exc).__name__}: {exc}")


def worker_cap() -> int:
    env = os.environ.get("DELAYCOMP_THREADS", "")
    if env.strip():
        try:
            cap = int(env)
        except ValueError as exc:
            raise ValueError(
                f"DELAYCOMP_THREADS must be an integer, got {env!r}") from exc
        if cap < 1:
            raise ValueError("DELAYCOMP_THREADS must be >= 1")
        return cap
    return os.cpu_count() or 1


def sweep(cfg: SimConfig, axis: str, values) -> list[SweepRow]:
    """Run one simulation per value of a single config axis.

    Runs are independent; failures are captured per row so the rest of the
    sweep completes. An empty value list yields an empty table.
    """
    vals = [float(val) for val in values]
    if not vals:
        return []
    apply_axis(cfg, axis, vals[0])  # validate the axis before spawning
    workers = min(worker_cap(), len(vals))
    if workers == 1:
        return [_sweep_one(cfg, axis, val) for val in vals]
    job = functools.partial(_sweep_one, cfg, axis)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, vals))
