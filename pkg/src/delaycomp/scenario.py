"""Scenario files: TOML sections in, a validated SimConfig out.

A scenario is a plain TOML file with the sections

    [plant] [trajectory] [disturbance] [delays.input] [delays.state]
    [gains] [bounding] [sim] [output]

Unknown sections or keys are rejected rather than ignored; a silently
misspelled key in a certification input is worse than a hard error. Every
key is documented in the README key table.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # 3.10
    import tomli as tomllib

from .delays import DelayProfile
from .gains import BoundingData, DelayBounds, GainSet
from .plants import DesiredTrajectory, Disturbance, PlantDynamics, build_plant
from .sim import SimConfig


class ScenarioError(ValueError):
    """Malformed scenario file."""


_TOP_SECTIONS = ("plant", "trajectory", "disturbance", "delays", "gains",
                 "bounding", "sim", "output")
_REQUIRED_SECTIONS = ("plant", "trajectory", "delays", "gains", "bounding",
                      "sim")


def _table(raw: dict, name: str) -> dict:
    tbl = raw.get(name, {})
    if not isinstance(tbl, dict):
        raise ScenarioError(f"[{name}] must be a section")
    return dict(tbl)


def _reject_unknown(tbl: dict, section: str, allowed) -> None:
    unknown = sorted(set(tbl) - set(allowed))
    if unknown:
        raise ScenarioError(
            f"unknown key(s) in [{section}]: {', '.join(unknown)}; "
            f"allowed: {', '.join(sorted(allowed))}")


def _need(tbl: dict, section: str, key: str):
    if key not in tbl:
        raise ScenarioError(f"[{section}] is missing required key '{key}'")
    return tbl[key]


def _num(value, section: str, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"[{section}].{key} must be a number")
    return float(value)


def _vector(value, n: int, section: str, key: str) -> np.ndarray:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return np.full(n, float(value))
    if isinstance(value, list) and all(
            isinstance(x, (int, float)) and not isinstance(x, bool)
            for x in value):
        arr = np.asarray(value, dtype=float)
        if arr.shape != (n,):
            raise ScenarioError(
                f"[{section}].{key} must have {n} entries, got {len(value)}")
        return arr
    raise ScenarioError(f"[{section}].{key} must be a number or number list")


def _envelope(value, section: str, key: str):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if (isinstance(value, list) and len(value) == 2
            and all(isinstance(x, (int, float)) and not isinstance(x, bool)
                    for x in value)):
        return (float(value[0]), float(value[1]))
    raise ScenarioError(
        f"[{section}].{key} must be a constant or a [offset, slope] pair")


def _build_plant(tbl: dict) -> PlantDynamics:
    name = _need(tbl, "plant", "name")
    params = {k: v for k, v in tbl.items() if k != "name"}
    try:
        return build_plant(name, **params)
    except (KeyError, TypeError) as exc:
        raise ScenarioError(f"[plant]: {exc}") from exc


def _build_trajectory(tbl: dict, n: int) -> DesiredTrajectory:
    kind = _need(tbl, "trajectory", "kind")
    if kind == "sinusoid":
        _reject_unknown(tbl, "trajectory",
                        ("kind", "amp", "omega", "phase", "offset"))
        return DesiredTrajectory.sinusoid(
            n, amp=tbl.get("amp", 0.0), omega=tbl.get("omega", 1.0),
            phase=tbl.get("phase", 0.0), offset=tbl.get("offset", 0.0))
    if kind == "rest_to_sway":
        _reject_unknown(tbl, "trajectory", ("kind", "amp", "omega"))
        return DesiredTrajectory.rest_to_sway(
            n, amp=tbl.get("amp", 0.5), omega=tbl.get("omega", 0.8))
    raise ScenarioError(f"[trajectory].kind {kind!r} not recognized "
                        "(sinusoid, rest_to_sway)")


def _build_disturbance(tbl: dict, n: int) -> Disturbance:
    kind = tbl.get("kind", "zero")
    if kind == "zero":
        _reject_unknown(tbl, "disturbance", ("kind",))
        return Disturbance.zero(n)
    if kind == "sinusoidal":
        _reject_unknown(tbl, "disturbance", ("kind", "d0", "omega", "phase"))
        return Disturbance.sinusoidal(
            n, d0=tbl.get("d0", 0.0), omega=tbl.get("omega", 1.0),
            phase=tbl.get("phase", 0.0))
    raise ScenarioError(f"[disturbance].kind {kind!r} not recognized "
                        "(zero, sinusoidal)")


def _build_delay(tbl: dict, section: str) -> DelayProfile:
    kind = _need(tbl, section, "kind")
    phi1 = tbl.get("phi1")
    phi2 = tbl.get("phi2")
    try:
        if kind == "zero":
            _reject_unknown(tbl, section, ("kind",))
            return DelayProfile.zero()
        if kind == "constant":
            _reject_unknown(tbl, section, ("kind", "value", "phi1", "phi2"))
            return DelayProfile.constant(
                _num(_need(tbl, section, "value"), section, "value"),
                phi1=phi1, phi2=phi2)
        if kind == "sinusoidal":
            _reject_unknown(tbl, section,
                            ("kind", "a", "b", "c", "phi1", "phi2"))
            return DelayProfile.sinusoidal(
                _num(_need(tbl, section, "a"), section, "a"),
                _num(_need(tbl, section, "b"), section, "b"),
                _num(_need(tbl, section, "c"), section, "c"),
                phi1=phi1, phi2=phi2)
        if kind == "table":
            _reject_unknown(tbl, section,
                            ("kind", "times", "taus", "phi1", "phi2"))
            return DelayProfile.from_table(
                _need(tbl, section, "times"), _need(tbl, section, "taus"),
                phi1=phi1, phi2=phi2)
    except ValueError as exc:
        raise ScenarioError(f"[{section}]: {exc}") from exc
    raise ScenarioError(f"[{section}].kind {kind!r} not recognized "
                        "(zero, constant, sinusoidal, table)")


def _build_gains(tbl: dict) -> GainSet:
    keys = ("alpha1", "alpha2", "ks", "gamma1", "gamma2", "omega")
    _reject_unknown(tbl, "gains", keys)
    vals = {k: _num(_need(tbl, "gains", k), "gains", k) for k in keys}
    try:
        return GainSet(**vals)
    except ValueError as exc:
        raise ScenarioError(f"[gains]: {exc}") from exc


def _build_bounding(tbl: dict) -> BoundingData:
    _reject_unknown(tbl, "bounding", ("rho1", "rho2", "nd_bound", "rho_bar"))
    kwargs = {}
    if "nd_bound" in tbl:
        kwargs["nd_bound"] = _num(tbl["nd_bound"], "bounding", "nd_bound")
    if "rho_bar" in tbl:
        kwargs["rho_bar"] = _num(tbl["rho_bar"], "bounding", "rho_bar")
    try:
        return BoundingData(
            rho1=_envelope(_need(tbl, "bounding", "rho1"), "bounding", "rho1"),
            rho2=_envelope(_need(tbl, "bounding", "rho2"), "bounding", "rho2"),
            **kwargs)
    except ValueError as exc:
        raise ScenarioError(f"[bounding]: {exc}") from exc


@dataclass(frozen=True)
class Scenario:
    """A loaded scenario: the experiment plus output preferences."""

    config: SimConfig
    out_dir: str


def load_scenario(path: str | Path) -> Scenario:
    """Parse and validate a scenario file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc

    unknown = sorted(set(raw) - set(_TOP_SECTIONS))
    if unknown:
        raise ScenarioError(f"unknown section(s): {', '.join(unknown)}")
    missing = [s for s in _REQUIRED_SECTIONS if s not in raw]
    if missing:
        raise ScenarioError(f"missing section(s): {', '.join(missing)}")

    plant = _build_plant(_table(raw, "plant"))
    n = plant.n
    trajectory = _build_trajectory(_table(raw, "trajectory"), n)
    disturbance = _build_disturbance(_table(raw, "disturbance"), n)

    delays = _table(raw, "delays")
    _reject_unknown(delays, "delays", ("input", "state"))
    for sub in ("input", "state"):
        if sub not in delays:
            raise ScenarioError(f"missing section [delays.{sub}]")
    input_delay = _build_delay(dict(delays["input"]), "delays.input")
    state_delay = _build_delay(dict(delays["state"]), "delays.state")
    try:
        bounds = DelayBounds(input_max=input_delay.phi1,
                             input_rate_max=input_delay.phi2,
                             state_max=state_delay.phi1,
                             state_rate_max=state_delay.phi2)
    except ValueError as exc:
        raise ScenarioError(f"[delays]: {exc}") from exc

    gains = _build_gains(_table(raw, "gains"))
    bounding = _build_bounding(_table(raw, "bounding"))

    sim_tbl = _table(raw, "sim")
    _reject_unknown(sim_tbl, "sim",
                    ("t0", "t_end", "h", "x0", "xdot0", "seed", "init_jitter",
                     "input_delay_scale", "monitor"))
    x0 = sim_tbl.get("x0")
    xdot0 = sim_tbl.get("xdot0")
    monitor = sim_tbl.get("monitor", True)
    if not isinstance(monitor, bool):
        raise ScenarioError("[sim].monitor must be a boolean")
    seed = sim_tbl.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ScenarioError("[sim].seed must be an integer")
    cfg = SimConfig(
        plant=plant, trajectory=trajectory, disturbance=disturbance,
        input_delay=input_delay, state_delay=state_delay, bounds=bounds,
        gains=gains, bounding=bounding,
        t0=_num(sim_tbl.get("t0", 0.0), "sim", "t0"),
        t_end=_num(_need(sim_tbl, "sim", "t_end"), "sim", "t_end"),
        h=_num(_need(sim_tbl, "sim", "h"), "sim", "h"),
        x0=None if x0 is None else _vector(x0, n, "sim", "x0"),
        xdot0=None if xdot0 is None else _vector(xdot0, n, "sim", "xdot0"),
        delay_scale=_num(sim_tbl.get("input_delay_scale", 1.0), "sim",
                         "input_delay_scale"),
        monitor_enabled=monitor,
        seed=seed,
        init_jitter=_num(sim_tbl.get("init_jitter", 0.0), "sim",
                         "init_jitter"),
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc

    out_tbl = _table(raw, "output")
    _reject_unknown(out_tbl, "output", ("dir",))
    out_dir = out_tbl.get("dir", "out")
    if not isinstance(out_dir, str):
        raise ScenarioError("[output].dir must be a string")
    return Scenario(config=cfg, out_dir=out_dir)
