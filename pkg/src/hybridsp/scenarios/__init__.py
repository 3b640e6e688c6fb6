"""Concrete systems: benchmarks, the quadratic game, unicycles, and the
zeroth-order equilibrium-seeking controller with their composition."""

from .base import ParamError, Scenario
from .benchmarks import (Example1Params, Example2Params, build_example1,
                         build_example2, initial_sampler)
from .composed import (ComposedLayout, build_full_system,
                       composed_initial_state)
from .game import (GameParams, NashSolution, SingularSystem, all_costs,
                   eval_cost, measurement, pseudogradient,
                   solve_nash_quadratic)
from .nes import (ConcurrentSampling, NESControllerParams,
                  build_nes_controller, controller_jump, default_frequencies,
                  initial_controller_state)
from .unicycle import (UnicycleParams, build_unicycle_agent, equilibrium_state,
                       error_coords, feedback, tracking_error,
                       tracking_lyapunov)

__all__ = [
    "ParamError", "Scenario",
    "Example1Params", "Example2Params", "build_example1", "build_example2",
    "initial_sampler",
    "GameParams", "NashSolution", "SingularSystem", "all_costs", "eval_cost",
    "measurement", "pseudogradient", "solve_nash_quadratic",
    "ConcurrentSampling", "NESControllerParams", "build_nes_controller",
    "controller_jump", "default_frequencies", "initial_controller_state",
    "UnicycleParams", "build_unicycle_agent", "equilibrium_state",
    "error_coords", "feedback", "tracking_error", "tracking_lyapunov",
    "ComposedLayout", "build_full_system", "composed_initial_state",
]
