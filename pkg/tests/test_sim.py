"""Engine behavior: determinism, reductions, divergence, labels, sweeps."""

import numpy as np
import pytest

from delaycomp import (
    DelayBounds,
    DelayProfile,
    DesiredTrajectory,
    GainSet,
    apply_axis,
    build_plant,
    run,
    sweep,
)
from delaycomp.sim import EXIT_DIVERGED, SWEEPABLE_KEYS, worker_cap

from conftest import make_fast_config


def test_repeated_runs_are_identical(fast_config):
    r1 = run(fast_config)
    r2 = run(fast_config)
    for name in ("t", "x", "xdot", "u", "input_err", "pos_err"):
        assert np.array_equal(getattr(r1, name), getattr(r2, name)), name
    assert np.array_equal(r1.monitor.arr["y_norm"], r2.monitor.arr["y_norm"])
    assert r1.verdict == r2.verdict


def test_init_jitter_seed_semantics():
    base = dict(x0=np.array([0.4]), init_jitter=0.05, monitor_enabled=False,
                t_end=0.1)
    a = run(make_fast_config(seed=3, **base))
    b = run(make_fast_config(seed=3, **base))
    c = run(make_fast_config(seed=4, **base))
    assert a.x[0, 0] == b.x[0, 0]
    assert a.x[0, 0] != c.x[0, 0]
    assert abs(a.x[0, 0] - 0.4) <= 0.05
    assert abs(a.xdot[0, 0]) <= 0.05
    # zero jitter makes the seed irrelevant
    plain = run(make_fast_config(x0=np.array([0.4]), seed=99,
                                 monitor_enabled=False, t_end=0.1))
    assert plain.x[0, 0] == 0.4


def test_delay_free_reduction_matches_plain_rk4():
    """With both delays zero the engine must be an ordinary RK4 loop."""
    cfg = make_fast_config(
        input_delay=DelayProfile.zero(), state_delay=DelayProfile.zero(),
        bounds=DelayBounds(0.0, 0.0, 0.0, 0.0),
        x0=np.array([0.4]), xdot0=np.array([-0.2]),
        monitor_enabled=False)
    res = run(cfg)

    plant, traj, dist, g = cfg.plant, cfg.trajectory, cfg.disturbance, cfg.gains
    ks1 = g.ks + 1.0
    e2_0 = (traj.velocity(0.0) - cfg.xdot0) + g.alpha1 * (
        traj.position(0.0) - cfg.x0)

    def rhs(t, x, xd, v):
        e1 = traj.position(t) - x
        e2 = (traj.velocity(t) - xd) + g.alpha1 * e1
        u = ks1 * (e2 - e2_0) + v
        acc = plant.f(x, xd, t) + plant.g(x, xd, t) + dist.value(t) + u
        return xd, acc, ks1 * g.alpha2 * e2

    h = cfg.h
    x, xd, v = cfg.x0.copy(), cfg.xdot0.copy(), np.zeros(1)
    for k in range(cfg.steps()):
        t = k * h
        d1 = rhs(t, x, xd, v)
        d2 = rhs(t + h / 2, x + h / 2 * d1[0], xd + h / 2 * d1[1],
                 v + h / 2 * d1[2])
        d3 = rhs(t + h / 2, x + h / 2 * d2[0], xd + h / 2 * d2[1],
                 v + h / 2 * d2[2])
        d4 = rhs(t + h, x + h * d3[0], xd + h * d3[1], v + h * d3[2])
        x = x + h / 6 * (d1[0] + 2 * (d2[0] + d3[0]) + d4[0])
        xd = xd + h / 6 * (d1[1] + 2 * (d2[1] + d3[1]) + d4[1])
        v = v + h / 6 * (d1[2] + 2 * (d2[2] + d3[2]) + d4[2])
        assert np.allclose(res.x[k + 1], x, rtol=1e-9, atol=1e-12)
        assert np.allclose(res.xdot[k + 1], xd, rtol=1e-9, atol=1e-12)
    assert res.clamped_lookups == 0
    assert res.labels == ()


def test_divergence_aborts_with_partial_trajectory():
    # the controller believes 5% of the true input delay: unstable loop
    cfg = make_fast_config(
        input_delay=DelayProfile.constant(0.5),
        bounds=DelayBounds(0.5, 0.0, 0.04, 0.0),
        gains=GainSet(alpha1=1.5, alpha2=2.1, ks=80.0, gamma1=1.2,
                      gamma2=1.0, omega=0.5),
        delay_scale=0.05, t_end=20.0, h=0.01)
    res = run(cfg)
    assert res.diverged
    assert res.exit_status == EXIT_DIVERGED
    assert res.verdict == "diverged"
    assert 0 < len(res.t) < cfg.steps() + 1
    assert np.isfinite(res.x).all() and np.isfinite(res.u).all()
    assert res.certification.verdict == "diverged"


def test_coarse_step_label():
    res = run(make_fast_config(h=0.01, monitor_enabled=False, t_end=0.5))
    assert "step size exceeds a quarter of the smallest delay" in res.labels
    res = run(make_fast_config(monitor_enabled=False, t_end=0.5))
    assert res.labels == ()


def test_delay_dipping_below_step_clamps_and_labels():
    # state delay bottoms out at 0.002 (< h = 0.005) near t = pi/4:
    # stage lookups outrun the history frontier and clamp
    cfg = make_fast_config(
        state_delay=DelayProfile.sinusoidal(0.01, -0.008, 2.0),
        bounds=DelayBounds(0.02, 0.0, 0.018, 0.016),
        monitor_enabled=False, t_end=1.0)
    res = run(cfg)
    assert res.clamped_lookups > 0
    assert "reduced-order accuracy" in res.labels


def test_verdict_without_monitor(fast_config):
    res = run(make_fast_config(monitor_enabled=False))
    assert res.monitor is None and res.certification is None
    assert res.verdict == "not monitored"


def test_history_pruning_keeps_long_runs_bounded():
    res = run(make_fast_config(t_end=4.0, monitor_enabled=False))
    assert res.pruned_samples > 0
    assert len(res.t) == 801


def test_config_validation():
    with pytest.raises(ValueError, match="step size"):
        run(make_fast_config(h=0.0))
    with pytest.raises(ValueError, match="t_end"):
        run(make_fast_config(t_end=0.0))
    with pytest.raises(ValueError, match="delay_scale"):
        run(make_fast_config(delay_scale=-1.0))
    with pytest.raises(ValueError, match="init_jitter"):
        run(make_fast_config(init_jitter=-0.1))
    with pytest.raises(ValueError, match="dimension mismatch"):
        run(make_fast_config(trajectory=DesiredTrajectory.rest_to_sway(2)))
    with pytest.raises(ValueError, match="x0"):
        run(make_fast_config(x0=np.zeros(3)))


def test_apply_axis_each_scope(fast_config):
    cfg = fast_config
    assert apply_axis(cfg, "gains.ks", 20.0).gains.ks == 20.0
    assert apply_axis(cfg, "sim.h", 1e-3).h == 1e-3
    assert apply_axis(cfg, "sim.seed", 5.0).seed == 5
    assert apply_axis(cfg, "controller.input_delay_scale", 1.2).delay_scale \
        == 1.2
    assert apply_axis(cfg, "input_delay_scale", 0.8).delay_scale == 0.8
    moved = apply_axis(cfg, "delays.input.phi1", 0.03)
    assert moved.input_delay.phi1 == 0.03
    assert moved.bounds.input_max == 0.03
    moved = apply_axis(cfg, "phi_s1", 0.05)
    assert moved.state_delay.phi1 == 0.05
    assert moved.bounds.state_max == 0.05
    # source config untouched
    assert cfg.gains.ks == 10.0 and cfg.delay_scale == 1.0
    with pytest.raises(KeyError, match="plant.mass"):
        apply_axis(cfg, "plant.mass", 2.0)
    for key in SWEEPABLE_KEYS:
        apply_axis(cfg, key, 0.5)  # every advertised key must apply


def test_sweep_serial_row_order_and_error_capture(monkeypatch):
    monkeypatch.setenv("DELAYCOMP_THREADS", "1")
    cfg = make_fast_config(monitor_enabled=False, t_end=0.5)
    rows = sweep(cfg, "controller.input_delay_scale", [1.0, -1.0, 0.9])
    assert [r.value for r in rows] == [1.0, -1.0, 0.9]
    assert rows[0].verdict == "not monitored" and rows[0].error == ""
    assert rows[1].verdict == "error"
    assert "delay_scale" in rows[1].error
    assert np.isnan(rows[1].max_pos_err_tail)
    assert rows[2].verdict == "not monitored"
    assert np.isfinite(rows[2].max_pos_err_tail)


def test_sweep_parallel_and_empty(monkeypatch):
    monkeypatch.setenv("DELAYCOMP_THREADS", "2")
    cfg = make_fast_config(monitor_enabled=False, t_end=0.5)
    assert sweep(cfg, "gains.ks", []) == []
    rows = sweep(cfg, "gains.ks", [8.0, 12.0])
    assert [r.value for r in rows] == [8.0, 12.0]
    assert all(r.verdict == "not monitored" for r in rows)


def test_sweep_rejects_bad_axis_before_running(monkeypatch):
    monkeypatch.setenv("DELAYCOMP_THREADS", "1")
    with pytest.raises(KeyError):
        sweep(make_fast_config(), "gains.kp", [1.0, 2.0])


def test_worker_cap_env(monkeypatch):
    monkeypatch.setenv("DELAYCOMP_THREADS", "3")
    assert worker_cap() == 3
    monkeypatch.setenv("DELAYCOMP_THREADS", "abc")
    with pytest.raises(ValueError, match="DELAYCOMP_THREADS"):
        worker_cap()
    monkeypatch.setenv("DELAYCOMP_THREADS", "0")
    with pytest.raises(ValueError, match=">= 1"):
        worker_cap()
    monkeypatch.delenv("DELAYCOMP_THREADS")
    assert worker_cap() >= 1
