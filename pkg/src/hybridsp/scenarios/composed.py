"""Controller-plant composition: slow equilibrium seeking, fast unicycles.

The collective state stacks the controller block (actions, filters,
oscillators, timers), one 7-state block per unicycle, and a shared rotating
heading reference. Unicycle flows carry the 1/epsilon speedup. Jumps are
block-isolated: a controller timer updates only the controller (reading
measured plant positions), a vehicle timer resamples only that vehicle's
held inputs against the live action block. Tags name the jumping block so
regularity audits can separate slow from fast jumps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import HybridSystem
from ..perturbation import SteadyStateMap, TimescaleDecomposition
from ..sets import SetDescriptor
from .base import ParamError, Scenario
from .game import GameParams, measurement, solve_nash_quadratic
from .nes import NESControllerParams, controller_jump, triggered_agent
from .unicycle import UnicycleParams, unicycle_jump

Array = np.ndarray

DEFAULT_PLANT_TIMER_PHASES = (0.5, 0.25, 0.6, 0.11)


@dataclass(frozen=True)
class ComposedLayout:
    """Index map for the stacked state vector."""

    n_agents: int

    @property
    def n(self) -> int:
        return 16 * self.n_agents + 1

    @property
    def u(self) -> slice:
        return slice(0, 2 * self.n_agents)

    @property
    def xi(self) -> slice:
        n = self.n_agents
        return slice(2 * n, 4 * n)

    @property
    def mu(self) -> slice:
        n = self.n_agents
        return slice(4 * n, 8 * n)

    @property
    def t(self) -> slice:
        n = self.n_agents
        return slice(8 * n, 9 * n)

    @property
    def controller(self) -> slice:
        return slice(0, 9 * self.n_agents)

    def agent(self, i: int) -> slice:
        base = 9 * self.n_agents + 7 * i
        return slice(base, base + 7)

    @property
    def plant(self) -> slice:
        n = self.n_agents
        return slice(9 * n, 16 * n)

    @property
    def theta_r(self) -> int:
        return 16 * self.n_agents

    def positions(self, chi: Array) -> Array:
        n = self.n_agents
        base = 9 * n
        idx = np.arange(n) * 7 + base
        return np.stack([chi[idx], chi[idx + 1]], axis=1)


def build_full_system(g: GameParams, nes: NESControllerParams,
                      unicycles: Sequence[UnicycleParams],
                      epsilon: float) -> Scenario:
    """Compose the game, controller, and vehicle fleet into one system."""
    n = g.n_agents
    if nes.n_agents != n or len(unicycles) != n:
        raise ParamError("game, controller, and fleet sizes disagree")
    if epsilon <= 0:
        raise ParamError("epsilon must be positive")
    omega_r = unicycles[0].omega_r
    if any(abs(u.omega_r - omega_r) > 1e-12 for u in unicycles):
        raise ParamError("all vehicles must share the reference rate omega_r")

    lay = ComposedLayout(n_agents=n)
    dim = lay.n
    inv_eps = 1.0 / epsilon
    measure = measurement(g)
    nash = solve_nash_quadratic(g)
    u_star = nash.u_star

    plant_base = 9 * n
    idx_x = plant_base + 7 * np.arange(n)
    idx_y = idx_x + 1
    idx_te = idx_x + 2
    idx_tm = idx_x + 3
    idx_th = idx_x + 4
    idx_vh = idx_x + 5
    idx_wh = idx_x + 6
    ctrl_rates = nes.timer_rates()
    inv_sigma = np.array([1.0 / u.sigma for u in unicycles])
    t_off = 8 * n

    def flow(chi: Array) -> Array:
        out = np.zeros(dim)
        out[t_off:t_off + n] = ctrl_rates
        th = chi[idx_th]
        vh = chi[idx_vh]
        wh = chi[idx_wh]
        out[idx_x] = inv_eps * vh * np.cos(th)
        out[idx_y] = inv_eps * vh * np.sin(th)
        out[idx_te] = inv_eps * (omega_r - wh)
        out[idx_tm] = inv_eps * inv_sigma
        out[idx_th] = inv_eps * wh
        out[lay.theta_r] = inv_eps * omega_r
        return out

    def triggered(chi: Array, tol: float = 1e-9) -> tuple[str, int]:
        t_ctrl = chi[t_off:t_off + n]
        if (t_ctrl >= 1.0 - tol).any():
            return "controller", triggered_agent(t_ctrl, tol)
        plant_hits = np.flatnonzero(chi[idx_tm] >= 1.0 - tol)
        if plant_hits.size == 0:
            raise ValueError("jump applied with no timer at threshold")
        return "unicycle", int(plant_hits[0])

    def jump(chi: Array) -> Array:
        kind, k = triggered(chi)
        out = np.array(chi, dtype=float, copy=True)
        if kind == "controller":
            out[lay.controller] = controller_jump(
                chi[lay.controller], lay.positions(chi), nes, measure)
            return out
        sl = lay.agent(k)
        ref = chi[2 * k:2 * k + 2]
        out[sl] = unicycle_jump(chi[sl], float(ref[0]), float(ref[1]),
                                unicycles[k])
        return out

    def jump_tag(chi: Array) -> str:
        kind, k = triggered(chi)
        return "controller" if kind == "controller" else f"unicycle-{k}"

    # Flow-set membership polls the active constraints (timer windows); the
    # filter box and oscillator norms are invariant under flow, enforced by
    # the jump map, and watched by the invariants suite.
    def flow_membership(chi: Array) -> bool:
        t_ctrl = chi[t_off:t_off + n]
        t_plant = chi[idx_tm]
        return bool(((t_ctrl >= -1e-9) & (t_ctrl <= 1.0 + 1e-9)).all()
                    and ((t_plant >= -1e-9) & (t_plant <= 1.0 + 1e-9)).all())

    def flow_distance(chi: Array) -> float:
        t_ctrl = chi[t_off:t_off + n]
        t_plant = chi[idx_tm]
        over = np.concatenate([np.maximum(t_ctrl - 1.0, 0.0),
                               np.maximum(-t_ctrl, 0.0),
                               np.maximum(t_plant - 1.0, 0.0),
                               np.maximum(-t_plant, 0.0)])
        return float(np.linalg.norm(over))

    def jump_membership(chi: Array) -> bool:
        t_ctrl = chi[t_off:t_off + n]
        return bool((t_ctrl >= 1.0 - 1e-9).any()
                    or (chi[idx_tm] >= 1.0 - 1e-9).any())

    def jump_distance(chi: Array) -> float:
        top = max(float(chi[t_off:t_off + n].max()), float(chi[idx_tm].max()))
        return max(1.0 - top, 0.0)

    guards = tuple((lambda i: (lambda chi: float(chi[t_off + i]) - 1.0))(i)
                   for i in range(n))
    guards += tuple((lambda i: (lambda chi: float(chi[idx_tm[i]]) - 1.0))(i)
                    for i in range(n))
    guard_tags = tuple("controller" for _ in range(n)) \
        + tuple(f"unicycle-{i}" for i in range(n))

    labels = ([f"u{i}_{c}" for i in range(n) for c in ("x", "y")]
              + [f"xi{i}_{c}" for i in range(n) for c in ("x", "y")]
              + [f"mu{i}_{k}" for i in range(n) for k in range(4)]
              + [f"t{i}" for i in range(n)]
              + [f"{name}{i}" for i in range(n)
                 for name in ("x", "y", "theta_e", "timer", "theta",
                              "v_hat", "omega_hat")]
              + ["theta_r"])

    system = HybridSystem(
        n=dim, flow_map=flow, jump_map=jump,
        flow_set=SetDescriptor(flow_membership, flow_distance, tolerance=1e-9),
        jump_set=SetDescriptor(jump_membership, jump_distance, tolerance=1e-9),
        guards=guards, guard_tags=guard_tags, jump_tag=jump_tag,
        slow_jump_tags=frozenset({"controller"}),
        labels=tuple(labels))

    # Two-timescale companions: slow = controller block, fast = plant + ref.
    n1 = 9 * n
    n2 = 7 * n + 1
    bounded = tuple(off for i in range(n) for off in
                    (7 * i, 7 * i + 1, 7 * i + 2, 7 * i + 5, 7 * i + 6))
    unbounded = tuple(off for i in range(n) for off in (7 * i + 3, 7 * i + 4)) \
        + (7 * n,)
    dec = TimescaleDecomposition(n1=n1, n2=n2, epsilon=epsilon,
                                 fast_bounded=bounded,
                                 fast_unbounded=unbounded)

    def h1(x1: Array) -> Array:
        vals = np.empty(5 * n)
        for i in range(n):
            vals[5 * i] = x1[2 * i]
            vals[5 * i + 1] = x1[2 * i + 1]
            vals[5 * i + 2] = 0.0
            vals[5 * i + 3] = 0.0
            vals[5 * i + 4] = omega_r
        return vals

    m_mat = np.zeros((5 * n, n1))
    b_vec = np.zeros(5 * n)
    for i in range(n):
        m_mat[5 * i, 2 * i] = 1.0
        m_mat[5 * i + 1, 2 * i + 1] = 1.0
        b_vec[5 * i + 4] = omega_r
    bounded_list = list(bounded)

    def ss_membership(x1: Array, x2: Array) -> bool:
        return bool(np.max(np.abs(x2[bounded_list] - h1(x1))) <= 1e-9)

    def unbounded_fill(x1: Array) -> Array:
        fill = np.zeros(2 * n + 1)
        fill[0:2 * n:2] = 0.5  # vehicle timers parked mid-range
        return fill

    ssm = SteadyStateMap(h1=h1, membership=ss_membership,
                         unbounded_fill=unbounded_fill,
                         h1_affine=(m_mat, b_vec))

    box = nes.filter_box

    def mu_norm_defect(chi_mu: Array) -> Array:
        return np.hypot(chi_mu[0::2], chi_mu[1::2]) - 1.0

    def attractor_distance(chi: Array) -> float:
        du = chi[lay.u] - u_star
        xi_over = np.maximum(np.abs(chi[lay.xi]) - box, 0.0)
        mu_def = mu_norm_defect(chi[lay.mu])
        t_ctrl = chi[t_off:t_off + n]
        t_out = np.maximum(t_ctrl - 1.0, 0.0) + np.maximum(-t_ctrl, 0.0)
        t_plant = chi[idx_tm]
        tp_out = np.maximum(t_plant - 1.0, 0.0) + np.maximum(-t_plant, 0.0)
        dpx = chi[idx_x] - u_star[0::2]
        dpy = chi[idx_y] - u_star[1::2]
        dte = chi[idx_te]
        return float(np.sqrt((du ** 2).sum() + (xi_over ** 2).sum()
                             + (mu_def ** 2).sum() + (t_out ** 2).sum()
                             + (tp_out ** 2).sum() + (dpx ** 2).sum()
                             + (dpy ** 2).sum() + (dte ** 2).sum()))

    attractor = SetDescriptor(
        membership=lambda chi: attractor_distance(chi) <= 1e-6,
        distance=attractor_distance, tolerance=1e-6)

    def slow_attractor_distance(x1: Array) -> float:
        du = x1[lay.u] - u_star
        xi_over = np.maximum(np.abs(x1[lay.xi]) - box, 0.0)
        mu_def = mu_norm_defect(x1[lay.mu])
        t_ctrl = x1[t_off:t_off + n]
        t_out = np.maximum(t_ctrl - 1.0, 0.0) + np.maximum(-t_ctrl, 0.0)
        return float(np.sqrt((du ** 2).sum() + (xi_over ** 2).sum()
                             + (mu_def ** 2).sum() + (t_out ** 2).sum()))

    slow_attractor = SetDescriptor(
        membership=lambda x1: slow_attractor_distance(x1) <= 1e-6,
        distance=slow_attractor_distance, tolerance=1e-6)

    def slow_project(x1: Array) -> Array:
        out = np.array(x1, dtype=float, copy=True)
        out[lay.u] = u_star
        out[lay.xi] = np.clip(x1[lay.xi], -box, box)
        mu = x1[lay.mu]
        raw = np.hypot(mu[0::2], mu[1::2])
        safe = np.where(raw > 0, raw, 1.0)
        fixed = np.array(mu, copy=True)
        fixed[0::2] = np.where(raw > 0, mu[0::2] / safe, 1.0)
        fixed[1::2] = np.where(raw > 0, mu[1::2] / safe, 0.0)
        out[lay.mu] = fixed
        out[t_off:t_off + n] = np.clip(x1[t_off:t_off + n], 0.0, 1.0)
        return out

    h1_on_attractor = h1(np.concatenate([u_star, np.zeros(7 * n)]))

    # Monitor candidates: squared action error for the slow block, summed
    # vehicle tracking certificates (against the live references) for the
    # fast block.
    def v1(x1: Array) -> float:
        du = x1[lay.u] - u_star
        return float(du @ du)

    def v2(chi: Array) -> float:
        total = 0.0
        for i in range(n):
            sl = lay.agent(i)
            q = chi[sl]
            u1 = float(chi[2 * i])
            u2 = float(chi[2 * i + 1])
            th = float(q[4])
            dx = u1 - float(q[0])
            dy = u2 - float(q[1])
            xe = math.cos(th) * dx + math.sin(th) * dy
            ye = -math.sin(th) * dx + math.cos(th) * dy
            te = float(q[2])
            om = omega_r + unicycles[i].c2 * te
            c3 = unicycles[i].c3
            total += (0.5 * (xe - c3 * om * ye) ** 2 + 0.5 * ye ** 2
                      + 0.5 * te ** 2)
        return total

    return Scenario(
        system=system, decomposition=dec, steady_state=ssm,
        attractor=attractor, slow_attractor=slow_attractor,
        slow_project=slow_project, v1=v1, v2=v2,
        extras={"layout": lay, "nash": nash, "game": g, "nes": nes,
                "unicycles": tuple(unicycles), "epsilon": epsilon,
                "omega_r": omega_r, "h1_on_attractor": h1_on_attractor})


def composed_initial_state(nes: NESControllerParams,
                           unicycles: Sequence[UnicycleParams],
                           u0: Array,
                           mu_rng: np.random.Generator | None = None,
                           plant_timer_phases: Sequence[float] | None = None,
                           ) -> Array:
    """Plant parked at the initial actions with zero tracking error.

    Vehicle timers start at staggered phases chosen so that, with the default
    sampling periods, no two timers (controller or plant) ever reach their
    thresholds simultaneously.
    """
    n = nes.n_agents
    lay = ComposedLayout(n_agents=n)
    u0 = np.asarray(u0, dtype=float).reshape(-1)
    if u0.size != 2 * n:
        raise ParamError("u0 must provide two coordinates per agent")
    chi = np.zeros(lay.n)
    chi[lay.u] = u0
    mu = np.zeros(4 * n)
    if mu_rng is None:
        mu[0::2] = 1.0
    else:
        phases = mu_rng.uniform(0.0, 2.0 * math.pi, size=2 * n)
        mu[0::2] = np.cos(phases)
        mu[1::2] = np.sin(phases)
    chi[lay.mu] = mu
    chi[lay.t] = np.asarray(nes.t0, dtype=float)
    if plant_timer_phases is None:
        plant_timer_phases = [DEFAULT_PLANT_TIMER_PHASES[i % 4]
                              for i in range(n)]
    for i in range(n):
        sl = lay.agent(i)
        chi[sl.start] = u0[2 * i]
        chi[sl.start + 1] = u0[2 * i + 1]
        chi[sl.start + 2] = 0.0
        chi[sl.start + 3] = float(plant_timer_phases[i])
        chi[sl.start + 4] = 0.0
        chi[sl.start + 5] = 0.0
        chi[sl.start + 6] = unicycles[i].omega_r
    chi[lay.theta_r] = 0.0
    return chi
