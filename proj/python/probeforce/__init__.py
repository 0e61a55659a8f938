"""Adaptive force control with impedance probing."""

from ._core import (
    ConfigError,
    ImpedanceEstimator,
    convolve,
    design_bandpass,
    design_lowpass,
    hertz_force,
    hertz_tangent_stiffness,
    impedance_to_theta,
    margins,
    recover_impedance,
    run_scenario,
    run_scenario_json,
    tune_pi,
    version,
)

__version__ = version()

__all__ = [
    "ConfigError",
    "ImpedanceEstimator",
    "convolve",
    "design_bandpass",
    "design_lowpass",
    "hertz_force",
    "hertz_tangent_stiffness",
    "impedance_to_theta",
    "margins",
    "recover_impedance",
    "run_scenario",
    "run_scenario_json",
    "tune_pi",
    "version",
]
