"""Asynchronous zeroth-order equilibrium-seeking controller.

Per agent: a 2-D action block u_i, a 2-D filter block xi_i, two unit-circle
oscillator pairs mu_i, and a timer. Timers flow; everything else moves at
jumps. When an agent's timer fills, that agent alone queries the cost at the
dither-perturbed positions, refreshes its filter with the scaled measurement
along the dither direction, steps its action against the filter, advances
its oscillator pairs by their rotation angles, and resets its timer. Exact
timer ties are rejected: the timer set excludes concurrent sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..core import HybridSystem
from ..sets import SetDescriptor
from .base import ParamError
from .game import GameParams

Array = np.ndarray


class ConcurrentSampling(RuntimeError):
    """Two timers reached their threshold within tolerance of each other."""


@dataclass(frozen=True)
class NESControllerParams:
    """Gains, dither, and sampling for the asynchronous controller.

    ``amplitudes`` holds one dither amplitude per agent (applied to both of
    its action coordinates); ``frequencies`` holds the per-jump oscillator
    rotation angles, one pair per agent, all pairwise distinct. ``tau`` lists
    per-agent sampling periods; timers fill at rate 1/(tau0 * tau_i).
    ``filter_box`` clamps each filter coordinate; it should be large enough
    that the clamp never engages in normal operation.
    """

    alpha: float
    beta: float
    amplitudes: tuple[float, ...]
    frequencies: tuple[tuple[float, float], ...]
    tau: tuple[float, ...]
    t0: tuple[float, ...]
    tau0: float = 1.0
    filter_box: float = 100.0
    dither_in_measurement: bool = True

    def __post_init__(self):
        n = len(self.tau)
        if n < 1:
            raise ParamError("need at least one agent")
        if len(self.amplitudes) != n or len(self.frequencies) != n \
                or len(self.t0) != n:
            raise ParamError("per-agent parameter lengths disagree")
        if self.alpha <= 0 or self.beta <= 0 or self.tau0 <= 0 \
                or self.filter_box <= 0:
            raise ParamError("alpha, beta, tau0, filter_box must be positive")
        if min(self.amplitudes) <= 0 or min(self.tau) <= 0:
            raise ParamError("amplitudes and sampling periods must be positive")
        flat = [w for pair in self.frequencies for w in pair]
        if len(set(flat)) != len(flat):
            raise ParamError("oscillator rotation angles must be distinct")
        if any(not 0.0 <= t <= 1.0 for t in self.t0):
            raise ParamError("initial timers must lie in [0, 1]")
        if len(set(self.t0)) != n:
            raise ParamError("initial timers must be pairwise distinct "
                             "(no concurrent sampling)")

    @property
    def n_agents(self) -> int:
        return len(self.tau)

    def timer_rates(self) -> Array:
        return 1.0 / (self.tau0 * np.asarray(self.tau, dtype=float))

    def amplitude_per_coord(self) -> Array:
        return np.repeat(np.asarray(self.amplitudes, dtype=float), 2)


# Per-jump rotation angles act modulo 2*pi. Angles near 0 (mod 2*pi) freeze
# the dither relative to the filter's averaging window and break the
# measurement averaging; angles near pi sign-lock it. Draws violating the
# margins are rejected and retaken.
_FREEZE_MARGIN = 0.9   # min distance of the effective angle from 0 and 2*pi
_FLIP_MARGIN = 0.2     # min distance from pi

_TWO_PI = 2.0 * math.pi


def _well_mixed(angle: float) -> bool:
    a = math.fmod(angle, _TWO_PI)
    if a < 0:
        a += _TWO_PI
    return (min(a, _TWO_PI - a) >= _FREEZE_MARGIN
            and abs(a - math.pi) >= _FLIP_MARGIN)


def _natural_bases(count: int) -> list[int]:
    bases: list[int] = []
    k = 1
    while len(bases) < count:
        if _well_mixed(float(k)):
            bases.append(k)
        k += 1
    return bases


def default_frequencies(n_agents: int,
                        rng: np.random.Generator) -> tuple[tuple[float, float], ...]:
    """Distinct natural numbers plus uniform perturbations up to 0.5.

    Base naturals are taken in increasing order, skipping values whose
    effective rotation angle would freeze or sign-lock the dither; the
    perturbed draws are rejection-sampled under the same margins and kept
    pairwise distinct.
    """
    bases = _natural_bases(2 * n_agents)
    vals: list[float] = []
    for b in bases:
        for _ in range(1000):
            cand = float(b + rng.uniform(-0.5, 0.5))
            if _well_mixed(cand) and all(abs(cand - v) > 1e-6 for v in vals):
                vals.append(cand)
                break
        else:
            raise ParamError(f"could not draw a well-mixed angle near {b}")
    return tuple((vals[2 * i], vals[2 * i + 1]) for i in range(n_agents))


# State layout for an N-agent controller block, total 9N:
#   u: [0, 2N), xi: [2N, 4N), mu: [4N, 8N), t: [8N, 9N)


def layout_slices(n_agents: int) -> dict[str, slice]:
    n = n_agents
    return {"u": slice(0, 2 * n), "xi": slice(2 * n, 4 * n),
            "mu": slice(4 * n, 8 * n), "t": slice(8 * n, 9 * n)}


def dither_components(mu: Array) -> Array:
    """First entry of every oscillator pair: shape (2N,) from (4N,)."""
    return mu[0::2]


def triggered_agent(t: Array, tol: float = 1e-9) -> int:
    """Index of the unique timer at threshold; rejects concurrent hits."""
    hits = np.flatnonzero(t >= 1.0 - tol)
    if hits.size == 0:
        raise ValueError("no timer at threshold; jump applied outside jump set")
    if hits.size > 1:
        raise ConcurrentSampling(
            f"timers {hits.tolist()} reached the threshold together")
    return int(hits[0])


def controller_jump(chi: Array, positions: Array, p: NESControllerParams,
                    measure: Callable[[Array], Array],
                    tol: float = 1e-9) -> Array:
    """One asynchronous update: only the triggered agent's blocks change.

    ``positions`` (N, 2) are the measured plant positions the cost oracle is
    queried at; for the reduced/standalone controller they equal the action
    block itself.
    """
    n = p.n_agents
    sl = layout_slices(n)
    u = chi[sl["u"]]
    xi = chi[sl["xi"]]
    mu = chi[sl["mu"]]
    t = chi[sl["t"]]
    k = triggered_agent(t, tol)

    d = mu[0::2]  # (2N,) dither components
    a = p.amplitude_per_coord()
    flat = np.asarray(positions, dtype=float).reshape(-1)
    query = flat + a * d if p.dither_in_measurement else flat
    costs = np.asarray(measure(query.reshape(n, 2)), dtype=float)
    if costs.shape != (n,):
        raise ValueError("measurement must return one cost per agent")
    est = (2.0 / a) * np.repeat(costs, 2) * d

    out = np.array(chi, dtype=float, copy=True)
    lo = 2 * k
    hi = lo + 2
    out[sl["u"]][lo:hi] = u[lo:hi] - p.alpha * p.beta * xi[lo:hi]
    xi_new = xi[lo:hi] + p.alpha * (est[lo:hi] - xi[lo:hi])
    out[sl["xi"]][lo:hi] = np.clip(xi_new, -p.filter_box, p.filter_box)
    # rotate the two oscillator pairs of agent k; renormalize to the circle
    for jj in range(2):
        base = 4 * k + 2 * jj
        c = float(mu[base])
        s = float(mu[base + 1])
        w = p.frequencies[k][jj]
        cw, sw = math.cos(w), math.sin(w)
        nc = cw * c - sw * s
        ns = sw * c + cw * s
        norm = math.hypot(nc, ns)
        out[sl["mu"]][base] = nc / norm
        out[sl["mu"]][base + 1] = ns / norm
    out[sl["t"]][k] = 0.0
    return out


def build_nes_controller(p: NESControllerParams, g: GameParams,
                         measure: Callable[[Array], Array]) -> HybridSystem:
    """Standalone controller: the cost oracle sees the action block itself."""
    if g.n_agents != p.n_agents:
        raise ParamError("game and controller agent counts disagree")
    n = p.n_agents
    sl = layout_slices(n)
    rates = p.timer_rates()
    dim = 9 * n

    def flow(chi: Array) -> Array:
        out = np.zeros(dim)
        out[sl["t"]] = rates
        return out

    def jump(chi: Array) -> Array:
        return controller_jump(chi, chi[sl["u"]].reshape(n, 2), p, measure)

    box = p.filter_box

    def flow_membership(chi: Array) -> bool:
        t = chi[sl["t"]]
        if ((t < -1e-9) | (t > 1.0 + 1e-9)).any():
            return False
        if (np.abs(chi[sl["xi"]]) > box + 1e-9).any():
            return False
        mu = chi[sl["mu"]]
        norms = np.hypot(mu[0::2], mu[1::2])
        return bool((np.abs(norms - 1.0) <= 1e-6).all())

    def flow_distance(chi: Array) -> float:
        t = np.clip(chi[sl["t"]], 0.0, 1.0) - chi[sl["t"]]
        xi_over = np.maximum(np.abs(chi[sl["xi"]]) - box, 0.0)
        mu = chi[sl["mu"]]
        norms = np.hypot(mu[0::2], mu[1::2]) - 1.0
        return float(np.sqrt((t ** 2).sum() + (xi_over ** 2).sum()
                             + (norms ** 2).sum()))

    def jump_membership(chi: Array) -> bool:
        return flow_membership(chi) and bool((chi[sl["t"]] >= 1.0 - 1e-9).any())

    def jump_distance(chi: Array) -> float:
        return max(1.0 - float(chi[sl["t"]].max()), 0.0)

    t_off = 8 * n
    guards = tuple((lambda i: (lambda chi: float(chi[t_off + i]) - 1.0))(i)
                   for i in range(n))
    labels = ([f"u{i}_{c}" for i in range(n) for c in ("x", "y")]
              + [f"xi{i}_{c}" for i in range(n) for c in ("x", "y")]
              + [f"mu{i}_{k}" for i in range(n) for k in range(4)]
              + [f"t{i}" for i in range(n)])
    return HybridSystem(
        n=dim, flow_map=flow, jump_map=jump,
        flow_set=SetDescriptor(flow_membership, flow_distance, tolerance=1e-6),
        jump_set=SetDescriptor(jump_membership, jump_distance, tolerance=1e-9),
        guards=guards,
        guard_tags=tuple("controller" for _ in range(n)),
        jump_tag=lambda chi: "controller",
        slow_jump_tags=frozenset({"controller"}),
        labels=tuple(labels))


def initial_controller_state(p: NESControllerParams, u0: Array,
                             rng: np.random.Generator | None = None) -> Array:
    """Assemble (u, xi, mu, t): zero filters, random or aligned phases."""
    n = p.n_agents
    u0 = np.asarray(u0, dtype=float).reshape(-1)
    if u0.size != 2 * n:
        raise ParamError("u0 must provide two coordinates per agent")
    mu = np.zeros(4 * n)
    if rng is None:
        mu[0::2] = 1.0
    else:
        phases = rng.uniform(0.0, 2.0 * math.pi, size=2 * n)
        mu[0::2] = np.cos(phases)
        mu[1::2] = np.sin(phases)
    return np.concatenate([u0, np.zeros(2 * n), mu,
                           np.asarray(p.t0, dtype=float)])
