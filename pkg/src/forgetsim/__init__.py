"""Simulator for networks of forgetful electrochemical synapses.

The package models crossbar layers of differential organic-device pairs
whose gate states self-discharge at open circuit, trains them with a
sign-based (Manhattan) backpropagation rule, tracks inference degradation
over time, and restores performance with model-derived reminder pulses.
"""

from .crossbar import (
    CrossbarLayer,
    CurrentMonitor,
    ReadErrorModel,
    synapse_weight,
)
from .datasets import make_circle, make_zvn
from .device import (
    CalibrationError,
    DecayTarget,
    DeviceParams,
    DeviceState,
    MobilityCorrection,
    apply_pulse,
    calibrate_discharge,
    conductance,
    discharge_solution,
    load_params,
    params_from_dict,
    params_to_dict,
    program_to,
    save_params,
    step_discharge,
)
from .discharge import ReminderPolicy, simulate
from .experiments import EXPERIMENTS, decision_grid, run_experiment
from .network import ForwardTrace, Network, activation, mse_loss
from .reminder import ReminderMap, apply_reminder, build_map, load_map, lookup, save_map
from .trace import ExperimentTrace
from .training import (
    TrainConfig,
    classification_accuracy,
    hidden_deltas,
    lr_schedule,
    manhattan_step,
    output_deltas,
    train,
)

__all__ = [
    "CalibrationError",
    "CrossbarLayer",
    "CurrentMonitor",
    "DecayTarget",
    "DeviceParams",
    "DeviceState",
    "EXPERIMENTS",
    "ExperimentTrace",
    "ForwardTrace",
    "MobilityCorrection",
    "Network",
    "ReadErrorModel",
    "ReminderMap",
    "ReminderPolicy",
    "TrainConfig",
    "activation",
    "apply_pulse",
    "apply_reminder",
    "build_map",
    "calibrate_discharge",
    "classification_accuracy",
    "conductance",
    "decision_grid",
    "discharge_solution",
    "hidden_deltas",
    "load_map",
    "load_params",
    "lookup",
    "lr_schedule",
    "make_circle",
    "make_zvn",
    "manhattan_step",
    "mse_loss",
    "output_deltas",
    "params_from_dict",
    "params_to_dict",
    "program_to",
    "run_experiment",
    "save_map",
    "save_params",
    "simulate",
    "step_discharge",
    "synapse_weight",
    "train",
]
