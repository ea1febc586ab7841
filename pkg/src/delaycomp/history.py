"""Time-stamped sample buffers with dense interpolated output.

Delayed terms in the closed loop are evaluated by interpolating stored
trajectory samples. Signals are undefined before the start time, so delayed
lookups that land at or before t0 return the zero vector; dense output inside
the recorded window uses the same interpolant without that convention.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Sample:
    """One recorded point: time plus the signal value at that time."""

    t: float
    value: np.ndarray


class SampleBuffer:
    """Strictly increasing time series of fixed-dimension vector samples.

    The first sample is pinned at the start time ``t0``. Lookups between
    nodes are piecewise linear, exact at nodes. ``prune`` drops samples
    older than a horizon behind the newest one but always keeps at least
    two so interpolation stays well defined.
    """

    def __init__(self, t0: float, dim: int, value0: np.ndarray | None = None):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.t0 = float(t0)
        self.dim = int(dim)
        v0 = np.zeros(dim) if value0 is None else np.asarray(value0, dtype=float)
        if v0.shape != (dim,):
            raise ValueError(f"value0 shape {v0.shape} != ({dim},)")
        self._times: list[float] = [self.t0]
        self._values: list[np.ndarray] = [v0.copy()]
        self._zero = np.zeros(dim)

    def __len__(self) -> int:
        return len(self._times)

    @property
    def last_time(self) -> float:
        return self._times[-1]

    @property
    def first_time(self) -> float:
        return self._times[0]

    def append(self, t: float, value: np.ndarray) -> None:
        """Append a sample; time must exceed the newest stored time."""
        t = float(t)
        if t <= self._times[-1]:
            raise ValueError(
                f"non-monotone append: t={t!r} <= last={self._times[-1]!r}"
            )
        value = np.asarray(value, dtype=float)
        if value.shape != (self.dim,):
            raise ValueError(f"sample shape {value.shape} != ({self.dim},)")
        self._times.append(t)
        self._values.append(value.copy())

    def eval(self, t: float, delayed_semantics: bool = True) -> np.ndarray:
        """Interpolated value at time t.

        With ``delayed_semantics`` (the default, used for delay lookups)
        any t <= t0 returns the zero vector. Without it the buffer acts as
        dense output and t < t0 is an error. Times beyond the newest sample
        are an error either way: the integrator must never read the future.
        """
        t = float(t)
        if delayed_semantics:
            if t <= self.t0:
                return self._zero.copy()
        elif t < self.t0:
            raise ValueError(f"dense eval at t={t!r} before t0={self.t0!r}")
        times = self._times
        if t > times[-1]:
            raise ValueError(
                f"eval at t={t!r} beyond recorded history (last={times[-1]!r})"
            )
        if t < times[0]:
            # Can only happen after pruning; delayed lookups must stay
            # within the retained horizon.
            raise ValueError(
                f"eval at t={t!r} before retained history (first={times[0]!r})"
            )
        i = bisect_left(times, t)
        if i < len(times) and times[i] == t:
            return self._values[i].copy()
        lo, hi = times[i - 1], times[i]
        w = (t - lo) / (hi - lo)
        v0, v1 = self._values[i - 1], self._values[i]
        return v0 + w * (v1 - v0)

    def eval_clamped(self, t: float) -> tuple[np.ndarray, bool]:
        """Delayed-semantics eval that clamps future targets to the newest
        sample instead of raising; the flag reports whether it clamped.

        Integration stages may legitimately land a lookup past the recorded
        frontier only when a delay is allowed to dip below the step size;
        callers count clamps and degrade the accuracy label.
        """
        if t > self._times[-1]:
            return self._values[-1].copy(), True
        return self.eval(t, delayed_semantics=True), False

    def prune(self, horizon: float) -> int:
        """Drop samples older than last_time - horizon; returns count dropped.

        At least two samples are always retained.
        """
        if horizon < 0:
            raise ValueError(f"horizon must be >= 0, got {horizon}")
        cutoff = self._times[-1] - horizon
        i = bisect_left(self._times, cutoff)
        i = min(i, len(self._times) - 2)
        if i <= 0:
            return 0
        del self._times[:i]
        del self._values[:i]
        return i

    def samples(self) -> list[Sample]:
        """Snapshot of the retained samples, oldest first."""
        return [Sample(t, v.copy()) for t, v in zip(self._times, self._values)]
