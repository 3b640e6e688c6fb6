"""Two small timer-driven benchmark systems with state-halving jumps.

Both systems have slow states (u, v) and one fast state x chasing u at rate
1/epsilon. A timer v fills at rate 1/tau; when it hits 1 the system jumps:
u takes half the fast state's value and the timer resets. They differ in the
fast-state reset: the first re-injects a fixed excursion x+ = R on a compact
domain (attractivity of the slow set only), the second doubles the fast
state on an unbounded domain, and its jump map fixes the restricted
attractor, giving convergence of the fast state as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import HybridSystem
from ..perturbation import SteadyStateMap, TimescaleDecomposition
from ..sets import box_set
from .base import ParamError, Scenario

Array = np.ndarray

INF = math.inf


@dataclass(frozen=True)
class Example1Params:
    """Compact-domain variant: states live in [0,R] x [0,1] x [0,R]."""

    gamma: float
    tau: float
    epsilon: float
    R: float = 10.0
    x0: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if min(self.gamma, self.tau, self.epsilon) < 0 or self.tau <= 0 \
                or self.epsilon <= 0:
            raise ParamError("tau and epsilon must be positive, gamma >= 0")
        if self.R <= 0:
            raise ParamError("R must be positive")
        u, v, x = self.x0
        if not (0.0 <= u <= self.R and 0.0 <= x <= self.R and 0.0 <= v <= 1.0):
            raise ParamError("x0 must satisfy u, x in [0,R] and v in [0,1]")


@dataclass(frozen=True)
class Example2Params:
    """Unbounded variant: u, x free reals, timer v in [0,1]."""

    gamma: float
    tau: float
    epsilon: float
    x0: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if min(self.gamma, self.tau, self.epsilon) < 0 or self.tau <= 0 \
                or self.epsilon <= 0:
            raise ParamError("tau and epsilon must be positive, gamma >= 0")
        if not 0.0 <= self.x0[1] <= 1.0:
            raise ParamError("timer v must start in [0,1]")


_LABELS = ("u", "v", "x")


def _steady_state(tol: float = 1e-9) -> SteadyStateMap:
    # Fast equilibrium: x = u, affine in the slow state (u, v).
    m_mat = np.array([[1.0, 0.0]])
    b = np.zeros(1)
    return SteadyStateMap(
        h1=lambda x1: np.array([x1[0]]),
        membership=lambda x1, x2: abs(float(x2[0]) - float(x1[0])) <= tol,
        h1_affine=(m_mat, b))


def build_example1(p: Example1Params) -> Scenario:
    """Compact benchmark: clamped slow drift, jump (u,v,x) -> (x/2, 0, R)."""
    gamma, tau, eps, radius = p.gamma, p.tau, p.epsilon, p.R

    def flow(s: Array) -> Array:
        u, _, x = s
        return np.array([gamma * max(0.0, 1.0 - abs(u) / radius),
                         1.0 / tau,
                         -(x - u) / eps])

    def jump(s: Array) -> Array:
        return np.array([0.5 * s[2], 0.0, radius])

    flow_set = box_set([0.0, 0.0, 0.0], [radius, 1.0, radius])
    jump_set = box_set([0.0, 1.0, 0.0], [radius, 1.0, radius])
    system = HybridSystem(
        n=3, flow_map=flow, jump_map=jump, flow_set=flow_set,
        jump_set=jump_set, guards=(lambda s: s[1] - 1.0,), labels=_LABELS)

    dec = TimescaleDecomposition(n1=2, n2=1, epsilon=eps)
    ssm = _steady_state()
    attractor = box_set([0.0, 0.0, 0.0], [0.0, 1.0, radius])
    slow_attractor = box_set([0.0, 0.0], [0.0, 1.0])

    def slow_project(x1: Array) -> Array:
        return np.array([0.0, min(max(float(x1[1]), 0.0), 1.0)])

    return Scenario(
        system=system, decomposition=dec, steady_state=ssm,
        attractor=attractor, slow_attractor=slow_attractor,
        slow_project=slow_project,
        v1=lambda x1: (2.0 - float(x1[1])) * float(x1[0]) ** 2,
        v2=lambda s: 0.5 * (float(s[2]) - float(s[0])) ** 2,
        x0=np.array(p.x0, dtype=float),
        extras={"params": p})


def build_example2(p: Example2Params) -> Scenario:
    """Unbounded benchmark: jump (u,v,x) -> (x/2, 0, 2x) fixes the origin."""
    gamma, tau, eps = p.gamma, p.tau, p.epsilon

    def flow(s: Array) -> Array:
        return np.array([gamma, 1.0 / tau, -(s[2] - s[0]) / eps])

    def jump(s: Array) -> Array:
        return np.array([0.5 * s[2], 0.0, 2.0 * s[2]])

    flow_set = box_set([-INF, 0.0, -INF], [INF, 1.0, INF])
    jump_set = box_set([-INF, 1.0, -INF], [INF, 1.0, INF])
    system = HybridSystem(
        n=3, flow_map=flow, jump_map=jump, flow_set=flow_set,
        jump_set=jump_set, guards=(lambda s: s[1] - 1.0,), labels=_LABELS)

    dec = TimescaleDecomposition(n1=2, n2=1, epsilon=eps)
    ssm = _steady_state()
    attractor = box_set([0.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    slow_attractor = box_set([0.0, 0.0], [0.0, 1.0])

    def slow_project(x1: Array) -> Array:
        return np.array([0.0, min(max(float(x1[1]), 0.0), 1.0)])

    return Scenario(
        system=system, decomposition=dec, steady_state=ssm,
        attractor=attractor, slow_attractor=slow_attractor,
        slow_project=slow_project,
        v1=lambda x1: (2.0 - float(x1[1])) * float(x1[0]) ** 2,
        v2=lambda s: 0.5 * (float(s[2]) - float(s[0])) ** 2,
        x0=np.array(p.x0, dtype=float),
        extras={"params": p})


def initial_sampler(scenario: Scenario, radius_cap: float | None = None):
    """Uniform per-coordinate sampler for sweep initial conditions.

    Bounded coordinates sample their natural ranges; unbounded u and x
    sample [-Delta, Delta] (clipped by ``radius_cap`` when the domain is
    compact). Timer v always samples [0, 1].
    """
    p = scenario.extras["params"]
    compact = isinstance(p, Example1Params)

    def sample(rng: np.random.Generator, delta: float) -> Array:
        if compact:
            top = min(delta, p.R) if radius_cap is None else radius_cap
            u = rng.uniform(0.0, top)
            x = rng.uniform(0.0, p.R)
        else:
            u = rng.uniform(-delta, delta)
            x = rng.uniform(-delta, delta)
        v = rng.uniform(0.0, 1.0)
        return np.array([u, v, x])

    return sample
