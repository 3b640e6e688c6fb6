"""Quadratic connectivity game: source-seeking costs with pairwise coupling.

Agent i pays the squared distance to its assigned source plus ``c`` times
the squared distances to every other agent. The pseudogradient is linear, so
the (unique) Nash equilibrium solves a symmetric positive-definite linear
system per planar coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import ParamError

Array = np.ndarray


class SingularSystem(RuntimeError):
    """Equilibrium system could not be solved to the required residual."""


@dataclass(frozen=True)
class GameParams:
    sources: tuple[tuple[float, float], ...]
    coupling: float = 0.25

    def __post_init__(self):
        if len(self.sources) < 1:
            raise ParamError("need at least one agent")
        if self.coupling < 0:
            raise ParamError("coupling must be nonnegative")

    @property
    def n_agents(self) -> int:
        return len(self.sources)

    def source_array(self) -> Array:
        return np.asarray(self.sources, dtype=float)


@dataclass(frozen=True)
class NashSolution:
    u_star: Array  # stacked (2N,), agent-major [u1x, u1y, u2x, ...]
    residual: float

    def positions(self) -> Array:
        return self.u_star.reshape(-1, 2)


def eval_cost(g: GameParams, i: int, u: Array) -> float:
    """Cost of agent i at the stacked joint action ``u`` (2N,)."""
    n = g.n_agents
    if not 0 <= i < n:
        raise IndexError(f"agent index {i} out of range for {n} agents")
    pos = np.asarray(u, dtype=float).reshape(n, 2)
    own = pos[i] - g.source_array()[i]
    cost = float(own @ own)
    if g.coupling > 0:
        diffs = pos[i] - pos
        sq = np.einsum("ij,ij->i", diffs, diffs)
        cost += g.coupling * float(sq.sum())  # own term is zero
    return cost


def all_costs(g: GameParams, positions: Array) -> Array:
    """Every agent's cost at the joint configuration (N, 2) -> (N,)."""
    pos = np.asarray(positions, dtype=float).reshape(g.n_agents, 2)
    src = g.source_array()
    own = pos - src
    costs = np.einsum("ij,ij->i", own, own)
    if g.coupling > 0:
        sq = ((pos[:, None, :] - pos[None, :, :]) ** 2).sum(axis=2)
        costs = costs + g.coupling * sq.sum(axis=1)
    return costs


def pseudogradient(g: GameParams, u: Array) -> Array:
    """Stack of own-cost gradients: row i is grad_{u_i} h_i(u), shape (N, 2)."""
    n = g.n_agents
    pos = np.asarray(u, dtype=float).reshape(n, 2)
    grad = 2.0 * (pos - g.source_array())
    if g.coupling > 0:
        grad = grad + 2.0 * g.coupling * (n * pos - pos.sum(axis=0))
    return grad


def solve_nash_quadratic(g: GameParams) -> NashSolution:
    """Solve the coupled stationarity system; residual checked below 1e-10."""
    n = g.n_agents
    c = g.coupling
    src = g.source_array()
    m_mat = (1.0 + c * (n - 1)) * np.eye(n) - c * (np.ones((n, n)) - np.eye(n))
    try:
        pos = np.linalg.solve(m_mat, src)
    except np.linalg.LinAlgError as exc:  # unreachable for c >= 0
        raise SingularSystem(str(exc)) from exc
    residual = float(np.max(np.linalg.norm(pseudogradient(g, pos), axis=1)))
    if residual > 1e-10:
        raise SingularSystem(f"equilibrium residual {residual:.3e} too large")
    return NashSolution(u_star=pos.reshape(-1), residual=residual)


def measurement(g: GameParams):
    """Cost oracle for zeroth-order controllers: positions (N,2) -> costs (N,)."""
    def measure(positions: Array) -> Array:
        return all_costs(g, positions)
    return measure
