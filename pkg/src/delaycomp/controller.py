"""Delay-compensating tracking controller.

The control law never differentiates measurements and never sees the state
delay, the drift terms, or the disturbance: it reads the reference, the
measured state, its own past outputs, and an input-delay profile (possibly a
scaled misestimate of the true one). The output is

    u = (ks + 1) * (filt_err - filt_err(t0)) + v
    v' = (ks + 1) * (alpha2 * filt_err + input_err)

so u(t0) = 0 exactly and u is continuous. input_err compares the delayed own
output against the current one; with a zero delay profile it vanishes
identically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .delays import DelayProfile
from .history import SampleBuffer


@dataclass(frozen=True)
class ControllerConfig:
    alpha1: float
    alpha2: float
    ks: float
    input_delay: DelayProfile
    delay_scale: float = 1.0  # misestimation factor for robustness studies

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "ks"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.delay_scale > 0:
            raise ValueError("delay_scale must be positive")


class Controller:
    """Holds the frozen initial error, the integrator state convention and
    the buffer of past outputs. The v integrator itself is advanced by the
    simulation engine as part of the coupled state."""

    def __init__(self, cfg: ControllerConfig, n: int, t0: float):
        self.cfg = cfg
        self.n = n
        self.t0 = float(t0)
        self.filt_err0: np.ndarray | None = None
        self.past_outputs = SampleBuffer(t0, n)  # u(t0) = 0
        self.clamp_count = 0

    def errors(self, x, xdot, ref_pos, ref_vel):
        """(pos_err, filt_err) from measurements and the reference."""
        pos_err = ref_pos - x
        filt_err = (ref_vel - xdot) + self.cfg.alpha1 * pos_err
        return pos_err, filt_err

    def freeze_initial(self, filt_err: np.ndarray) -> None:
        if self.filt_err0 is not None:
            raise RuntimeError("initial filtered error already frozen")
        self.filt_err0 = np.asarray(filt_err, dtype=float).copy()

    def output(self, filt_err: np.ndarray, v: np.ndarray) -> np.ndarray:
        if self.filt_err0 is None:
            raise RuntimeError("freeze_initial must run before output")
        return (self.cfg.ks + 1.0) * (filt_err - self.filt_err0) + v

    def input_err(self, t: float, u_now: np.ndarray) -> np.ndarray:
        """Believed delayed output minus current output.

        Uses the scaled delay estimate; the plant's true delay lives in the
        engine. Zero profile short-circuits to exact zeros so the delay-free
        reduction stays smooth.
        """
        p = self.cfg.input_delay
        if p.is_zero:
            return np.zeros(self.n)
        target = t - self.cfg.delay_scale * p.tau(t)
        u_del, clamped = self.past_outputs.eval_clamped(target)
        self.clamp_count += clamped
        return u_del - u_now

    def v_rate(self, filt_err: np.ndarray,
               input_err: np.ndarray) -> np.ndarray:
        return (self.cfg.ks + 1.0) * (self.cfg.alpha2 * filt_err + input_err)

    def record_output(self, t: float, u: np.ndarray) -> None:
        """Engine hook: store the realized output at a step boundary."""
        self.past_outputs.append(t, u)
