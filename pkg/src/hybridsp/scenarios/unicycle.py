"""Sampled-feedback unicycle tracking a fixed reference position.

Agent state: (x, y, theta_e, timer, theta, v_hat, omega_hat). Between
samples the vehicle flows with the held inputs (v_hat, omega_hat); a timer
filling at rate 1/sigma triggers resampling of the feedback law. The heading
reference rotates at a constant rate omega_r, and theta_e is the heading
error against it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import HybridSystem
from ..sets import box_set
from .base import ParamError

Array = np.ndarray

INF = math.inf

STATE_LABELS = ("x", "y", "theta_e", "timer", "theta", "v_hat", "omega_hat")


@dataclass(frozen=True)
class UnicycleParams:
    """Sampling period and feedback gains.

    ``from_rates`` wires the gains from the sampling period and reference
    angular rate (c2 = sigma, c3 = 1/(3 omega_r), c1 = 1/(2 c3)); that wiring
    keeps c3 below sqrt(2)/(2 omega_bar) for the quadratic envelope of the
    tracking certificate as long as 2 c2 Delta stays below about 1.12 omega_r.
    """

    sigma: float
    omega_r: float
    c1: float
    c2: float
    c3: float

    def __post_init__(self):
        if min(self.sigma, self.omega_r, self.c1, self.c2, self.c3) <= 0:
            raise ParamError("all unicycle parameters must be positive")

    @classmethod
    def from_rates(cls, sigma: float, omega_r: float) -> "UnicycleParams":
        c3 = 1.0 / (3.0 * omega_r)
        return cls(sigma=sigma, omega_r=omega_r, c1=1.0 / (2.0 * c3),
                   c2=sigma, c3=c3)

    def envelope_ok(self, delta: float) -> bool:
        """True when the quadratic Lyapunov envelope holds for ||r|| <= 2*delta."""
        omega_bar = self.omega_r + 2.0 * self.c2 * delta
        return self.c3 <= math.sqrt(2.0) / (2.0 * omega_bar)


def error_coords(q: Array, u1: float, u2: float) -> tuple[float, float]:
    """Position error rotated into the body frame."""
    th = float(q[4])
    dx = u1 - float(q[0])
    dy = u2 - float(q[1])
    c, s = math.cos(th), math.sin(th)
    return c * dx + s * dy, -s * dx + c * dy


def feedback(q: Array, u1: float, u2: float,
             p: UnicycleParams) -> tuple[float, float]:
    """Sampled inputs (v, omega) from the current state and reference."""
    xe, ye = error_coords(q, u1, u2)
    te = float(q[2])
    om = p.omega_r + p.c2 * te
    v = (p.c1 * (xe - p.c3 * om * ye)
         - p.c3 * p.c2 * (p.omega_r - om) * ye
         + p.c3 * om * om * xe)
    return v, om


def unicycle_flow(q: Array, p: UnicycleParams) -> Array:
    th = float(q[4])
    vh = float(q[5])
    wh = float(q[6])
    return np.array([vh * math.cos(th), vh * math.sin(th),
                     p.omega_r - wh, 1.0 / p.sigma, wh, 0.0, 0.0])


def unicycle_jump(q: Array, u1: float, u2: float, p: UnicycleParams) -> Array:
    v, om = feedback(q, u1, u2, p)
    return np.array([q[0], q[1], q[2], 0.0, q[4], v, om])


def build_unicycle_agent(p: UnicycleParams,
                         reference: tuple[float, float]) -> HybridSystem:
    """Standalone 7-state agent tracking the fixed reference position."""
    u1, u2 = float(reference[0]), float(reference[1])

    flow_set = box_set([-INF, -INF, -INF, 0.0, -INF, -INF, -INF],
                       [INF, INF, INF, 1.0, INF, INF, INF])
    jump_set = box_set([-INF, -INF, -INF, 1.0, -INF, -INF, -INF],
                       [INF, INF, INF, 1.0, INF, INF, INF])
    return HybridSystem(
        n=7,
        flow_map=lambda q: unicycle_flow(q, p),
        jump_map=lambda q: unicycle_jump(q, u1, u2, p),
        flow_set=flow_set, jump_set=jump_set,
        guards=(lambda q: float(q[3]) - 1.0,),
        labels=STATE_LABELS)


def tracking_error(q: Array, u1: float, u2: float) -> Array:
    """(position error, heading error) vector whose norm the envelope bounds."""
    return np.array([float(q[0]) - u1, float(q[1]) - u2, float(q[2])])


def tracking_lyapunov(p: UnicycleParams, reference: tuple[float, float]):
    """Quadratic tracking certificate; satisfies ||r||^2/4 <= V <= ||r||^2."""
    u1, u2 = float(reference[0]), float(reference[1])

    def V(q: Array) -> float:
        xe, ye = error_coords(q, u1, u2)
        te = float(q[2])
        om = p.omega_r + p.c2 * te
        return (0.5 * (xe - p.c3 * om * ye) ** 2
                + 0.5 * ye ** 2 + 0.5 * te ** 2)

    return V


def equilibrium_state(reference: tuple[float, float], p: UnicycleParams,
                      theta: float = 0.0, timer: float = 0.0) -> Array:
    """Zero-error state: at the reference, heading aligned, inputs held at
    (0, omega_r)."""
    return np.array([reference[0], reference[1], 0.0, timer, theta,
                     0.0, p.omega_r])
