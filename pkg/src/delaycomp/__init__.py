"""Simulation and certification toolkit for tracking control of
second-order systems under simultaneous input and state delays."""

from .controller import Controller, ControllerConfig
from .delays import (DelayProfile, DelayValidation, validate_input_delay,
                     validate_state_delay)
from .gains import (AffineEnvelope, BoundingData, ConditionReport,
                    ConditionSet, ConstantEnvelope, DelayBounds, GainSet,
                    check_delay_cond1, check_delay_cond2,
                    check_gain_conditions, check_global_gain_margin,
                    combined_envelope, core_decay_rate, evaluate_conditions,
                    lyap_decay_rate, region_radii, region_radius,
                    search_feasible_ks, ultimate_bound)
from .history import Sample, SampleBuffer
from .monitor import (CertificationReport, Monitor, MonitorLog,
                      MonitorRecord, WindowedEnergy, certify)
from .plants import (DesiredTrajectory, Disturbance, PlantDynamics, accel,
                     build_plant, plant_names, register_plant)
from .scenario import Scenario, ScenarioError, load_scenario
from .sim import (SimConfig, SimResult, SweepRow, apply_axis, run, sweep)

__version__ = "0.1.0"

__all__ = [
    "AffineEnvelope", "BoundingData", "CertificationReport",
    "ConditionReport", "ConditionSet", "ConstantEnvelope", "Controller",
    "ControllerConfig", "DelayBounds", "DelayProfile", "DelayValidation",
    "DesiredTrajectory", "Disturbance", "GainSet", "Monitor", "MonitorLog",
    "MonitorRecord", "PlantDynamics", "Sample", "SampleBuffer", "Scenario",
    "ScenarioError", "SimConfig", "SimResult", "SweepRow", "WindowedEnergy",
    "accel", "apply_axis", "build_plant", "certify", "check_delay_cond1",
    "check_delay_cond2", "check_gain_conditions", "check_global_gain_margin",
    "combined_envelope", "core_decay_rate", "evaluate_conditions",
    "load_scenario", "lyap_decay_rate", "plant_names", "region_radii",
    "region_radius", "register_plant", "run", "search_feasible_ks", "sweep",
    "ultimate_bound", "validate_input_delay", "validate_state_delay",
]
