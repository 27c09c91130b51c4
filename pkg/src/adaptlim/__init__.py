"""Output-feedback adaptive control for plants with hard input magnitude
and rate limits: offline gain design, closed-loop simulation, and
region-of-attraction analysis."""

from .actuator import ActuatorConfig, ActuatorState, compute_rate
from .controller import ControllerGains, ControllerState
from .design import ControllerDesign, SprCertificate, design_controller
from .linalg import StateSpace, input_relative_degree, solve_care, \
    solve_lyapunov, transmission_zeros
from .plant import AugmentedPlant, PlantModel, augment
from .saturation import LimitVector, deficiency, elliptical_saturate
from .scenarios import builtin_scenario, builtin_scenarios
from .sim import CommandSchedule, Scenario, TrajectoryLog, run, run_modes
from .stability import StabilityReport, assemble_closed_loop, \
    compute_report, runtime_monitor

__version__ = "0.1.0"
