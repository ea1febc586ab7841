"""Second-order plants with delayed terms, disturbances, reference motions.

The simulated family is

    xddot = f(x, xdot, t) + g(x_del, xdot_del, t) + d(t) + u_del

with ``x_del``, ``xdot_del`` the state evaluated at the delayed time and
``u_del`` the delayed control. Plants are registered by name and built from
plain numeric parameters; there is deliberately no expression parser.

All callables are module-level functions bound with ``functools.partial`` so
configured plants pickle cleanly into sweep worker processes.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Vector = np.ndarray
StateFn = Callable[[Vector, Vector, float], Vector]


@dataclass(frozen=True)
class PlantDynamics:
    """Dimension plus the undelayed and delayed drift terms.

    Attributes:
        n: configuration dimension (x and xdot are length n).
        f: instantaneous drift, f(x, xdot, t) -> (n,).
        g: delayed drift, g(x_del, xdot_del, t) -> (n,).
        name: registry name the plant was built from.
        params: numeric parameters used to build it.
    """

    n: int
    f: StateFn
    g: StateFn
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"plant dimension must be >= 1, got {self.n}")


def accel(plant: PlantDynamics, x: Vector, xdot: Vector, x_del: Vector,
          xdot_del: Vector, d_val: Vector, u_del: Vector, t: float) -> Vector:
    """Right-hand side of the second-order dynamics (additive bundles)."""
    return plant.f(x, xdot, t) + plant.g(x_del, xdot_del, t) + d_val + u_del


# ---------------------------------------------------------------------------
# disturbance and reference trajectory
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Disturbance:
    """Per-coordinate sinusoid d_i(t) = d0_i * sin(w_i t + phase_i).

    ``bound`` dominates sup ||d(t)|| and ``rate_bound`` dominates
    sup ||d'(t)||; the defaults are the tight amplitude norms.
    """

    d0: Vector
    omega: Vector
    phase: Vector
    bound: float
    rate_bound: float

    @classmethod
    def sinusoidal(cls, n: int, d0=0.0, omega=1.0, phase=0.0) -> "Disturbance":
        d0v = np.broadcast_to(np.asarray(d0, dtype=float), (n,)).copy()
        omv = np.broadcast_to(np.asarray(omega, dtype=float), (n,)).copy()
        phv = np.broadcast_to(np.asarray(phase, dtype=float), (n,)).copy()
        return cls(d0=d0v, omega=omv, phase=phv,
                   bound=float(np.linalg.norm(d0v)),
                   rate_bound=float(np.linalg.norm(d0v * omv)))

    @classmethod
    def zero(cls, n: int) -> "Disturbance":
        return cls.sinusoidal(n, 0.0, 1.0, 0.0)

    def value(self, t: float) -> Vector:
        return self.d0 * np.sin(self.omega * t + self.phase)

    def validate(self, span: tuple[float, float], n: int = 2000,
                 fd_h: float = 1e-5) -> bool:
        """Sampled sup of ||d|| within bound, FD rate within rate_bound."""
        ts = np.linspace(span[0], span[1], n)
        ok = True
        for t in ts:
            ok &= np.linalg.norm(self.value(t)) <= self.bound * (1 + 1e-12) + 1e-12
            rate = (self.value(t + fd_h) - self.value(t - fd_h)) / (2 * fd_h)
            ok &= np.linalg.norm(rate) <= self.rate_bound * (1 + 1e-3) + 1e-9
        return bool(ok)


@dataclass(frozen=True)
class DesiredTrajectory:
    """Reference motion x_d,i(t) = offset_i + amp_i * sin(w_i t + phase_i).

    Analytic derivatives through third order; the certification machinery
    needs the reference three times differentiable with known sups.
    """

    n: int
    amp: Vector
    omega: Vector
    phase: Vector
    offset: Vector

    @classmethod
    def sinusoid(cls, n: int, amp=0.0, omega=1.0, phase=0.0,
                 offset=0.0) -> "DesiredTrajectory":
        def bc(v):
            return np.broadcast_to(np.asarray(v, dtype=float), (n,)).copy()
        return cls(n=n, amp=bc(amp), omega=bc(omega), phase=bc(phase),
                   offset=bc(offset))

    @classmethod
    def rest_to_sway(cls, n: int, amp=0.5, omega=0.8) -> "DesiredTrajectory":
        """amp*(1 - cos(w t)): starts at rest at the origin."""
        a = np.broadcast_to(np.asarray(amp, dtype=float), (n,)).copy()
        w = np.broadcast_to(np.asarray(omega, dtype=float), (n,)).copy()
        return cls(n=n, amp=a, omega=w, phase=np.full(n, -np.pi / 2),
                   offset=a.copy())

    def position(self, t: float) -> Vector:
        return self.offset + self.amp * np.sin(self.omega * t + self.phase)

    def velocity(self, t: float) -> Vector:
        return self.amp * self.omega * np.cos(self.omega * t + self.phase)

    def acceleration(self, t: float) -> Vector:
        return -self.amp * self.omega**2 * np.sin(self.omega * t + self.phase)

    def jerk(self, t: float) -> Vector:
        return -self.amp * self.omega**3 * np.cos(self.omega * t + self.phase)

    @property
    def sup_velocity(self) -> float:
        return float(np.linalg.norm(self.amp * self.omega))

    @property
    def sup_acceleration(self) -> float:
        return float(np.linalg.norm(self.amp * self.omega**2))

    @property
    def sup_jerk(self) -> float:
        return float(np.linalg.norm(self.amp * self.omega**3))


# ---------------------------------------------------------------------------
# builtin plants
# ---------------------------------------------------------------------------

_REGISTRY: dict[str, Callable[..., PlantDynamics]] = {}


def register_plant(name: str):
    def deco(fn):
        _REGISTRY[name] = fn
        return fn
    return deco


def build_plant(name: str, **params) -> PlantDynamics:
    if name not in _REGISTRY:
        raise KeyError(
            f"unknown plant {name!r}; known: {sorted(_REGISTRY)}")
    return _REGISTRY[name](**params)


def plant_names() -> list[str]:
    return sorted(_REGISTRY)


def _scalar_f(a1: float, a2: float, x, xdot, t):
    return -a1 * x - a2 * np.tanh(xdot)


def _scalar_g(b1: float, b2: float, x_del, xdot_del, t):
    return b1 * np.sin(x_del) + b2 * np.tanh(xdot_del)


@register_plant("scalar")
def builtin_scalar(a1: float = 1.0, a2: float = 1.0, b1: float = 0.5,
                   b2: float = 0.5) -> PlantDynamics:
    """n = 1 benchmark: linear-plus-saturating drift, bounded delayed drift.

    Both drift terms vanish at the origin with zero velocity, and g is
    globally Lipschitz with constant max(|b1|, |b2|) per argument, which is
    what makes constant residual-bound envelopes workable for it.
    """
    return PlantDynamics(
        n=1,
        f=functools.partial(_scalar_f, float(a1), float(a2)),
        g=functools.partial(_scalar_g, float(b1), float(b2)),
        name="scalar",
        params={"a1": float(a1), "a2": float(a2),
                "b1": float(b1), "b2": float(b2)},
    )


def _twolink_f(k1, k2, c1, c2, eps, x, xdot, t):
    # inertia-like trigonometric coupling between the two joints
    return np.array([
        -k1 * x[0] - c1 * xdot[0] + eps * np.sin(x[1]) * xdot[1] ** 2,
        -k2 * x[1] - c2 * xdot[1] + eps * np.sin(x[0]) * xdot[0] ** 2,
    ])


def _twolink_g(gs, gv, gc, x_del, xdot_del, t):
    cross = np.sin(x_del[1] - x_del[0])
    return np.array([
        gs * np.sin(x_del[0]) + gv * np.tanh(xdot_del[0]) + gc * cross,
        gs * np.sin(x_del[1]) + gv * np.tanh(xdot_del[1]) - gc * cross,
    ])


@register_plant("twolink")
def builtin_twolink(k1: float = 1.2, k2: float = 0.9, c1: float = 0.7,
                    c2: float = 0.5, eps: float = 0.2, gs: float = 0.3,
                    gv: float = 0.3, gc: float = 0.2) -> PlantDynamics:
    """n = 2 articulated benchmark with velocity-squared joint coupling.

    The quadratic velocity coupling makes the residual envelopes genuinely
    state dependent (affine envelopes instead of constants), exercising the
    local region-of-validity path of the gain machinery.
    """
    return PlantDynamics(
        n=2,
        f=functools.partial(_twolink_f, float(k1), float(k2), float(c1),
                            float(c2), float(eps)),
        g=functools.partial(_twolink_g, float(gs), float(gv), float(gc)),
        name="twolink",
        params={"k1": float(k1), "k2": float(k2), "c1": float(c1),
                "c2": float(c2), "eps": float(eps), "gs": float(gs),
                "gv": float(gv), "gc": float(gc)},
    )
