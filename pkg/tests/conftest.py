"""Shared fixtures: shipped scenario paths and a cheap scalar experiment."""

from __future__ import annotations

import math
import time
from dataclasses import replace
from pathlib import Path

import pytest

from delaycomp import (BoundingData, DelayBounds, DelayProfile,
                       DesiredTrajectory, Disturbance, GainSet, SimConfig,
                       build_plant, load_scenario, run)

REPO = Path(__file__).resolve().parents[1]
SCALAR_SCENARIO = REPO / "scenarios" / "scalar_global.toml"
TWOLINK_SCENARIO = REPO / "scenarios" / "twolink_local.toml"


def make_fast_config(**overrides) -> SimConfig:
    """Small scalar experiment for plumbing tests.

    Short horizon, so certification lands on "inconclusive"; the tests that
    care about verdicts use the shipped benchmark instead.
    """
    cfg = SimConfig(
        plant=build_plant("scalar"),
        trajectory=DesiredTrajectory.rest_to_sway(1, amp=0.3, omega=1.0),
        disturbance=Disturbance.sinusoidal(1, d0=0.2, omega=0.5),
        input_delay=DelayProfile.constant(0.02),
        state_delay=DelayProfile.constant(0.04),
        bounds=DelayBounds(input_max=0.02, input_rate_max=0.0,
                           state_max=0.04, state_rate_max=0.0),
        gains=GainSet(alpha1=1.5, alpha2=2.1, ks=10.0, gamma1=1.2,
                      gamma2=1.0, omega=0.5),
        bounding=BoundingData(rho1=2.0, rho2=1.0, nd_bound=5.0),
        t_end=2.0,
        h=5e-3,
    )
    return replace(cfg, **overrides) if overrides else cfg


@pytest.fixture
def fast_config() -> SimConfig:
    return make_fast_config()


@pytest.fixture(scope="session")
def benchmark_run():
    """The shipped scalar benchmark, run once per session with its wall time."""
    scn = load_scenario(SCALAR_SCENARIO)
    start = time.perf_counter()
    res = run(scn.config)
    elapsed = time.perf_counter() - start
    assert res.certification is not None
    return res, elapsed


def rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


def assert_close(a: float, b: float, rtol: float, what: str = "") -> None:
    assert math.isfinite(a) and math.isfinite(b), f"{what}: non-finite"
    assert rel_err(a, b) <= rtol, f"{what}: {a!r} vs {b!r} (rtol {rtol})"
