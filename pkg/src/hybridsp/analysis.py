"""Lyapunov certificate monitors and empirical attractivity probes.

Monitors evaluate a candidate function along a computed arc and flag samples
or jumps whose decrease falls short of a user-supplied threshold (thresholds
stay caller-owned scalar callables; nothing is synthesized). Attractivity is
probed by sweeping tuning parameters over a grid, solving from sampled
initial conditions, and aggregating boundedness, entry-time, and tail-radius
estimates. Finite horizons make every quantity an estimate, and the report
says so in its field names.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .core import (HybridArc, HybridSystem, HybridTime, NumericFailure,
                   SolverConfig, solve)
from .sets import SetDescriptor

Array = np.ndarray


@dataclass(frozen=True)
class LyapunovSpec:
    """Candidate certificate for an attractor set.

    ``flow_threshold``/``jump_threshold`` map attractor distance to the
    expected decrease (the monitors check dV <= -threshold, plus slack for
    flows). ``active_region`` restricts where the certificate must hold;
    by default it holds everywhere. Optional envelope bounds
    ``lower``/``upper`` (distance -> value) support sampled bound checks.
    """

    V: Callable[[Array], float]
    attractor: SetDescriptor
    flow_threshold: Callable[[float], float] | None = None
    jump_threshold: Callable[[float], float] | None = None
    active_region: Callable[[Array], bool] | None = None
    lower: Callable[[float], float] | None = None
    upper: Callable[[float], float] | None = None

    def active(self, x: Array) -> bool:
        if self.active_region is None:
            return True
        return bool(self.active_region(x))


class LyapunovSample(NamedTuple):
    time: HybridTime
    value: float
    dV_flow: float  # forward difference quotient; NaN at segment ends
    dV_jump: float  # V(post) - V(pre); NaN except at pre-jump samples


@dataclass
class LyapunovSeries:
    samples: list[LyapunovSample]

    def values(self) -> Array:
        return np.array([s.value for s in self.samples])

    def flow_rates(self) -> Array:
        return np.array([s.dV_flow for s in self.samples])

    def jump_drops(self) -> list[tuple[HybridTime, float]]:
        return [(s.time, s.dV_jump) for s in self.samples
                if not math.isnan(s.dV_jump)]


def lyapunov_along_arc(arc: HybridArc, spec: LyapunovSpec) -> LyapunovSeries:
    """Evaluate V along the arc with flow-difference and jump-difference rates.

    dV_flow at a sample is the forward difference to the next sample in the
    same segment divided by the time gap; the last sample of each segment
    gets NaN. dV_jump is attached to the final (pre-jump) sample of each
    segment that ends in a jump.
    """
    if not arc.segments or arc.n_samples() == 0:
        raise ValueError("arc has no samples")
    samples: list[LyapunovSample] = []
    jump_by_index = {k: rec for k, rec in enumerate(arc.jumps)}
    for seg_idx, seg in enumerate(arc.segments):
        vals = np.array([float(spec.V(seg.x[i])) for i in range(len(seg.t))])
        for i in range(len(seg.t)):
            if i + 1 < len(seg.t):
                dt = float(seg.t[i + 1] - seg.t[i])
                dflow = (vals[i + 1] - vals[i]) / dt if dt > 0 else math.nan
            else:
                dflow = math.nan
            djump = math.nan
            if i == len(seg.t) - 1 and seg_idx in jump_by_index:
                rec = jump_by_index[seg_idx]
                djump = float(spec.V(rec.post)) - float(spec.V(rec.pre))
            samples.append(LyapunovSample(HybridTime(float(seg.t[i]), seg.j),
                                          float(vals[i]), dflow, djump))
    return LyapunovSeries(samples=samples)


@dataclass(frozen=True)
class JumpViolation:
    t: float
    j: int
    dV: float
    allowed: float
    distance: float


@dataclass(frozen=True)
class FlowViolation:
    t: float
    j: int
    dV_flow: float
    allowed: float
    distance: float


def check_jump_decrease(arc: HybridArc, spec: LyapunovSpec,
                        tol: float = 1e-9) -> list[JumpViolation]:
    """Jumps in the active region where dV exceeds -jump_threshold(distance)."""
    threshold = spec.jump_threshold or (lambda d: 0.0)
    out: list[JumpViolation] = []
    for rec in arc.jumps:
        if not spec.active(rec.pre):
            continue
        d = float(spec.attractor.distance(rec.pre))
        dv = float(spec.V(rec.post)) - float(spec.V(rec.pre))
        allowed = -float(threshold(d))
        if dv > allowed + tol:
            out.append(JumpViolation(t=rec.t, j=rec.j, dV=dv,
                                     allowed=allowed, distance=d))
    return out


def check_flow_decrease(arc: HybridArc, spec: LyapunovSpec,
                        slack: float | None = None) -> list[FlowViolation]:
    """Samples in the active region whose V-rate exceeds the threshold.

    The rate is a finite difference, so ``slack`` absorbs discretization;
    the default is ten times the arc's median sample spacing.
    """
    threshold = spec.flow_threshold or (lambda d: 0.0)
    if slack is None:
        gaps = [float(g) for seg in arc.segments
                for g in np.diff(seg.t) if g > 0]
        slack = 10.0 * (float(np.median(gaps)) if gaps else 0.0)
    out: list[FlowViolation] = []
    for seg in arc.segments:
        vals = np.array([float(spec.V(seg.x[i])) for i in range(len(seg.t))])
        for i in range(len(seg.t) - 1):
            dt = float(seg.t[i + 1] - seg.t[i])
            if dt <= 0:
                continue
            x = seg.x[i]
            if not spec.active(x):
                continue
            rate = (vals[i + 1] - vals[i]) / dt
            d = float(spec.attractor.distance(x))
            allowed = -float(threshold(d))
            if rate > allowed + slack:
                out.append(FlowViolation(t=float(seg.t[i]), j=seg.j,
                                         dV_flow=rate, allowed=allowed,
                                         distance=d))
    return out


def sample_bound_envelope(spec: LyapunovSpec, states: Sequence[Array]) -> int:
    """Count states violating lower(d) <= V(x) <= upper(d); 0 means all pass."""
    bad = 0
    for x in states:
        d = float(spec.attractor.distance(np.asarray(x, dtype=float)))
        v = float(spec.V(np.asarray(x, dtype=float)))
        if spec.lower is not None and v < float(spec.lower(d)) - 1e-12:
            bad += 1
            continue
        if spec.upper is not None and v > float(spec.upper(d)) + 1e-12:
            bad += 1
    return bad


def combined_lyapunov(v_slow: Callable[[Array], float],
                      v_fast: Callable[[Array], float],
                      epsilon: float, n1: int) -> Callable[[Array], float]:
    """Composite monitor V(x) = V1(x_slow) + sqrt(epsilon) * V2(x)."""
    root = math.sqrt(epsilon)
    return lambda x: float(v_slow(x[:n1])) + root * float(v_fast(x))


# ---------------------------------------------------------------------------
# SGPAS probing


class ParamPoint(NamedTuple):
    gamma: float
    tau: float
    epsilon: float
    beta: float = 0.0


@dataclass(frozen=True)
class SGPASProbe:
    """Sweep description: radii, parameter grid, sampling and horizon.

    ``Delta`` bounds the initial distance to the attractor, ``delta`` is the
    target radius used for entry-time estimates; the tail radius is taken
    over the final ``tail_fraction`` of the horizon.
    """

    Delta: float
    delta: float
    param_grid: tuple[ParamPoint, ...]
    n_initial: int = 10
    horizon_t: float = 10.0
    tail_fraction: float = 0.2

    def __post_init__(self):
        if not (self.Delta > self.delta > 0):
            raise ValueError("need Delta > delta > 0")
        if not (0.01 <= self.tail_fraction <= 0.99):
            raise ValueError("tail_fraction must stay away from 0 and 1")
        if self.n_initial < 1:
            raise ValueError("n_initial must be >= 1")
        if not self.param_grid:
            raise ValueError("parameter grid must be nonempty")

    @staticmethod
    def normalize_grid(grid: Sequence[Sequence[float]]) -> tuple[ParamPoint, ...]:
        pts = []
        for entry in grid:
            vals = tuple(float(v) for v in entry)
            if len(vals) == 3:
                pts.append(ParamPoint(*vals, 0.0))
            elif len(vals) == 4:
                pts.append(ParamPoint(*vals))
            else:
                raise ValueError("grid entries need 3 or 4 components "
                                 "(gamma, tau, epsilon[, beta])")
        return tuple(pts)


@dataclass
class GridPointEstimate:
    params: ParamPoint
    sup_distance: float
    T_hat: float | None       # earliest t+j with distance <= delta thereafter
    tail_radius: float
    n_trajectories: int
    n_failures: int

    def to_dict(self) -> dict:
        return {
            "gamma": self.params.gamma,
            "tau": self.params.tau,
            "epsilon": self.params.epsilon,
            "beta": self.params.beta,
            "sup_distance": self.sup_distance,
            "T_hat": self.T_hat,
            "tail_radius": self.tail_radius,
            "n_trajectories": self.n_trajectories,
            "n_failures": self.n_failures,
        }


@dataclass
class AttractivityReport:
    """Per-grid-point estimates plus refinement-monotonicity flags."""

    entries: list[GridPointEstimate]
    flags: list[str] = field(default_factory=list)

    def to_json(self, **kwargs) -> str:
        return json.dumps({"entries": [e.to_dict() for e in self.entries],
                           "flags": self.flags}, **kwargs)

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json(indent=2))
            fh.write("\n")

    def write_csv(self, path) -> None:
        cols = ["gamma", "tau", "epsilon", "beta", "sup_distance", "T_hat",
                "tail_radius", "n_trajectories", "n_failures"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols)
            for e in self.entries:
                d = e.to_dict()
                writer.writerow(["" if d[c] is None else repr(d[c])
                                 if isinstance(d[c], float) else d[c]
                                 for c in cols])


SystemFactory = Callable[[ParamPoint],
                         tuple[HybridSystem,
                               Callable[[np.random.Generator, float], Array],
                               SetDescriptor]]


def _trajectory_stats(arc: HybridArc, attractor: SetDescriptor,
                      horizon: float, tail_fraction: float,
                      delta: float) -> tuple[float, float | None, float | None]:
    """(sup distance, settle time t+j or None, tail radius or None).

    The settle time is the earliest recorded t+j after which the distance
    stays at or below delta for the rest of the horizon; None when the arc
    ends above delta. The tail radius is only reported when the arc actually
    reached the tail window.
    """
    tail_start = (1.0 - tail_fraction) * horizon
    sup_d = 0.0
    tail = None
    settle: float | None = None
    pending = True
    for t, j, x in arc.samples():
        d = float(attractor.distance(x))
        sup_d = max(sup_d, d)
        if t >= tail_start:
            tail = d if tail is None else max(tail, d)
        if d > delta:
            settle = None
            pending = True
        elif pending:
            settle = t + j
            pending = False
    reached_horizon = arc.final_time.t >= tail_start
    return sup_d, settle, (tail if reached_horizon else None)


def estimate_attractivity(factory: SystemFactory, probe: SGPASProbe,
                          cfg: SolverConfig, seed: int = 0,
                          on_arc: Callable[[ParamPoint, int, HybridArc], None]
                          | None = None) -> AttractivityReport:
    """Sweep the grid, solve sampled initial conditions, aggregate estimates.

    Each trajectory is seeded from (seed, grid index, trajectory index), so
    results do not depend on execution order. Numeric failures are counted
    per grid point without aborting the sweep; failed trajectories still
    contribute to the boundedness supremum through their partial arcs.
    Tail radii are also checked for monotone improvement along every
    coordinatewise parameter refinement (gamma down, tau up, epsilon down,
    beta down) with 10 percent slack; violations become flags, not errors.
    ``on_arc`` receives every completed arc (audits, exports).
    """
    entries: list[GridPointEstimate] = []
    run_cfg = replace(cfg, max_t=probe.horizon_t)
    for gi, params in enumerate(probe.param_grid):
        system, sampler, attractor = factory(params)
        sup_d = 0.0
        tails: list[float] = []
        settles: list[float | None] = []
        failures = 0
        for ti in range(probe.n_initial):
            rng = np.random.default_rng([seed, gi, ti])
            x0 = np.asarray(sampler(rng, probe.Delta), dtype=float)
            try:
                arc = solve(system, x0, run_cfg)
            except NumericFailure as exc:
                failures += 1
                if exc.arc is not None and exc.arc.n_samples() > 0:
                    s, _, _ = _trajectory_stats(exc.arc, attractor,
                                                probe.horizon_t,
                                                probe.tail_fraction,
                                                probe.delta)
                    sup_d = max(sup_d, s)
                continue
            if on_arc is not None:
                on_arc(params, ti, arc)
            s, settle, tail = _trajectory_stats(arc, attractor,
                                                probe.horizon_t,
                                                probe.tail_fraction,
                                                probe.delta)
            sup_d = max(sup_d, s)
            settles.append(settle)
            if tail is not None:
                tails.append(tail)
        t_hat = None
        if settles and all(s is not None for s in settles):
            t_hat = max(settles)  # type: ignore[type-var]
        entries.append(GridPointEstimate(
            params=params, sup_distance=sup_d, T_hat=t_hat,
            tail_radius=(max(tails) if tails else math.inf),
            n_trajectories=probe.n_initial, n_failures=failures))

    flags = _monotonicity_flags(entries)
    return AttractivityReport(entries=entries, flags=flags)


def _refines(a: ParamPoint, b: ParamPoint) -> bool:
    """True when b is a coordinatewise refinement of a (strict somewhere)."""
    le = (b.gamma <= a.gamma and b.tau >= a.tau and b.epsilon <= a.epsilon
          and b.beta <= a.beta)
    strict = (b.gamma < a.gamma or b.tau > a.tau or b.epsilon < a.epsilon
              or b.beta < a.beta)
    return le and strict


def _monotonicity_flags(entries: list[GridPointEstimate],
                        slack: float = 0.10) -> list[str]:
    flags = []
    for a in entries:
        for b in entries:
            if not _refines(a.params, b.params):
                continue
            if math.isinf(a.tail_radius) or math.isinf(b.tail_radius):
                continue
            if b.tail_radius > a.tail_radius * (1.0 + slack) + 1e-12:
                flags.append(
                    f"tail radius grew from {a.tail_radius:.6g} at "
                    f"{tuple(a.params)} to {b.tail_radius:.6g} at "
                    f"{tuple(b.params)} despite refinement")
    return flags
