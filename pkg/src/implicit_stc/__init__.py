"""Proper implicit discretization of the super-twisting controller.

Submodules:
    core       closed-form step functions and the shared resolvent
    plant      exact zero-order-hold simulation and disturbance generators
    analysis   Lyapunov function, invariant sets, steady-state metrics
    verify     randomized property suites
    scenarios  YAML scenarios, single runs and sweeps
    cli        ``implicit-stc`` command line
"""

from .core import (
    ControllerState,
    ControlOutput,
    ErrorState,
    Gains,
    brogliato_stc_step,
    conditioned_stc_step,
    error_dynamics_step,
    explicit_euler_stc_step,
    get_controller,
    implicit_fosm_step,
    implicit_stc_step,
    resolvent,
)
from .errors import DomainError, ParameterError, SimulationError
from .plant import (
    PiecewiseLinearSignal,
    Trajectory,
    adversarial_run,
    adversary_disturbance,
    average_disturbance,
    integrate_interval,
    run_closed_loop,
    sawtooth_disturbance,
)

__version__ = "0.1.0"
