"""Hybrid systems and their solutions (hybrid arcs).

A hybrid system flows on its flow set via a flow map and jumps from its jump
set via a jump map. Arcs are computed with fixed-step RK4; entry into the
jump set is detected through scalar guard functions whose zero upcrossing
marks the boundary, localized by bisection. Jump-count/time budgets bound
every run; Zeno behaviour beyond the jump budget is out of scope.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import Callable, Iterator, NamedTuple

import numpy as np

from .sets import SetDescriptor

Array = np.ndarray

# Events closer together than this fraction of a step are treated as ties.
_TIME_EPS = 1e-15


class DomainError(ValueError):
    """State is outside the set required by the requested operation."""


class NumericFailure(RuntimeError):
    """NaN/Inf encountered while flowing; carries the partial arc if known."""

    def __init__(self, message: str, arc: "HybridArc | None" = None):
        super().__init__(message)
        self.arc = arc


class Termination(enum.Enum):
    MAX_T = "MaxT"
    MAX_J = "MaxJ"
    LEFT_DOMAIN = "LeftDomain"
    NUMERIC_FAILURE = "NumericFailure"


class Priority(enum.Enum):
    """Resolution rule when the state lies in both the flow and jump sets."""

    JUMP_FIRST = "JumpFirst"
    FLOW_FIRST = "FlowFirst"


@dataclass(frozen=True)
class HybridTime:
    """A point (t, j) of a hybrid time domain: elapsed time and jump count."""

    t: float
    j: int

    def __post_init__(self):
        if self.t < 0 or self.j < 0:
            raise ValueError("hybrid time requires t >= 0 and j >= 0")

    def precedes(self, other: "HybridTime") -> bool:
        """Componentwise partial order: (t, j) <= (t', j')."""
        return self.t <= other.t and self.j <= other.j

    @property
    def total(self) -> float:
        """t + j, the total ordering used along a single arc."""
        return self.t + self.j


@dataclass(frozen=True)
class SolverConfig:
    """Fixed-step solver settings.

    ``step`` is the RK4 step; guard zeros are bisected down to ``guard_tol``.
    ``record_stride`` keeps every k-th grid point (segment endpoints and jump
    points are always kept).
    """

    step: float = 1e-3
    max_t: float = 10.0
    max_j: int = 1000
    priority: Priority = Priority.JUMP_FIRST
    guard_tol: float = 1e-9
    bisection_iters: int = 60
    record_stride: int = 1

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.max_t <= 0 or self.step > self.max_t:
            raise ValueError("need 0 < step <= max_t")
        if self.max_j < 1:
            raise ValueError("max_j must be a positive integer")
        if self.guard_tol <= 0:
            raise ValueError("guard_tol must be positive")
        if self.bisection_iters < 1:
            raise ValueError("bisection_iters must be >= 1")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")


@dataclass(frozen=True)
class HybridSystem:
    """Flow map, jump map, flow set, jump set, plus guards for localization.

    Maps are single-valued selections, total on the union of the flow and
    jump sets. Each guard is a scalar function whose upcrossing through zero
    coincides with entry into the jump set. ``guard_tags`` (aligned with
    ``guards``) and ``jump_tag`` name the state block a jump affects, used
    by two-timescale audits; ``slow_jump_tags`` lists the tags whose jumps
    modify the slow block.
    """

    n: int
    flow_map: Callable[[Array], Array]
    jump_map: Callable[[Array], Array]
    flow_set: SetDescriptor
    jump_set: SetDescriptor
    guards: tuple[Callable[[Array], float], ...] = ()
    labels: tuple[str, ...] | None = None
    guard_tags: tuple[str, ...] | None = None
    jump_tag: Callable[[Array], str | None] | None = None
    slow_jump_tags: frozenset[str] | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("system dimension must be >= 1")
        if self.labels is not None and len(self.labels) != self.n:
            raise ValueError("labels must match the state dimension")
        if self.guard_tags is not None and len(self.guard_tags) != len(self.guards):
            raise ValueError("guard_tags must align with guards")

    def state_labels(self) -> tuple[str, ...]:
        if self.labels is not None:
            return tuple(self.labels)
        return tuple(f"x{i}" for i in range(self.n))


@dataclass
class Segment:
    """Samples of one flow interval at constant jump count ``j``."""

    j: int
    t: Array
    x: Array  # shape (len(t), n)


@dataclass
class JumpRecord:
    t: float
    j: int  # jump count before the jump
    pre: Array
    post: Array
    tag: str | None = None


@dataclass
class HybridArc:
    """A computed solution: ordered flow segments plus jump records."""

    segments: list[Segment]
    jumps: list[JumpRecord]
    termination: Termination
    labels: tuple[str, ...] | None = None

    @property
    def n_jumps(self) -> int:
        return len(self.jumps)

    @property
    def final_time(self) -> HybridTime:
        seg = self.segments[-1]
        return HybridTime(float(seg.t[-1]), seg.j)

    @property
    def final_state(self) -> Array:
        return self.segments[-1].x[-1]

    def samples(self) -> Iterator[tuple[float, int, Array]]:
        for seg in self.segments:
            for i in range(len(seg.t)):
                yield float(seg.t[i]), seg.j, seg.x[i]

    def n_samples(self) -> int:
        return sum(len(seg.t) for seg in self.segments)

    def state_labels(self) -> tuple[str, ...]:
        if self.labels is not None:
            return tuple(self.labels)
        n = self.segments[0].x.shape[1]
        return tuple(f"x{i}" for i in range(n))


class FlowResult(NamedTuple):
    state: Array
    elapsed: float
    hit_guard: bool


def _rk4_step(f: Callable[[Array], Array], x: Array, h: float) -> Array:
    k1 = f(x)
    k2 = f(x + (0.5 * h) * k1)
    k3 = f(x + (0.5 * h) * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)


class _SegmentOutcome(NamedTuple):
    state: Array
    elapsed: float
    hit_guard: bool
    exited: bool
    failed: bool


def _flow_until_event(sys: HybridSystem, x0: Array, budget: float,
                      cfg: SolverConfig, rec_t: list[float],
                      rec_x: list[Array], t0: float) -> _SegmentOutcome:
    """Advance by RK4 until guard upcrossing, flow-set exit, or budget end.

    Appends strided grid samples and the final point to ``rec_t``/``rec_x``
    (the caller records the segment start). Guard crossings are bisected to
    within ``guard_tol`` of the guard zero; flow-set exits are bisected on
    membership and resolved to the last inside state.
    """
    f = sys.flow_map
    guards = sys.guards
    x = x0
    g_prev = [float(g(x)) for g in guards]
    elapsed = 0.0
    steps = 0

    def record(t_loc: float, x_loc: Array) -> None:
        if not rec_t or t_loc > rec_t[-1]:
            rec_t.append(t_loc)
            rec_x.append(np.array(x_loc, dtype=float))

    def bisect_guard(k: int, h: float, g_lo: float,
                     g_hi: float) -> tuple[float, Array]:
        # Bracketed root search on the step fraction. Probes alternate
        # between the secant point (exact for guards linear in time, e.g.
        # timers) and the midpoint, so the bracket never stagnates.
        g = guards[k]
        lo, hi = 0.0, h
        x_hi = None
        for it in range(cfg.bisection_iters):
            if it % 2 == 0 and g_hi > g_lo:
                s = lo + (hi - lo) * (-g_lo) / (g_hi - g_lo)
                span = hi - lo
                s = min(max(s, lo + 1e-6 * span), hi - 1e-6 * span)
            else:
                s = 0.5 * (lo + hi)
            x_s = _rk4_step(f, x, s)
            g_s = float(g(x_s))
            if abs(g_s) <= cfg.guard_tol:
                return s, x_s
            if g_s > 0.0:
                hi, g_hi, x_hi = s, g_s, x_s
            else:
                lo, g_lo = s, g_s
        if x_hi is None:
            x_hi = _rk4_step(f, x, hi)
        return hi, x_hi

    def bisect_exit(h: float) -> tuple[float, Array]:
        lo, hi = 0.0, h
        x_lo = x
        for _ in range(cfg.bisection_iters):
            if hi - lo <= 1e-3 * cfg.guard_tol:
                break
            mid = 0.5 * (lo + hi)
            x_mid = _rk4_step(f, x, mid)
            if sys.flow_set.membership(x_mid):
                lo, x_lo = mid, x_mid
            else:
                hi = mid
        return lo, x_lo

    while budget - elapsed > _TIME_EPS * max(1.0, budget):
        h = min(cfg.step, budget - elapsed)
        x_new = _rk4_step(f, x, h)
        if not np.isfinite(x_new).all():
            record(t0 + elapsed, x)
            return _SegmentOutcome(x, elapsed, False, False, True)

        g_new = [float(g(x_new)) for g in guards]
        event_s = None
        event_x = None
        event_is_guard = False
        for k in range(len(guards)):
            if g_prev[k] < 0.0 <= g_new[k]:
                s, xs = bisect_guard(k, h, g_prev[k], g_new[k])
                if event_s is None or s < event_s - _TIME_EPS:
                    event_s, event_x, event_is_guard = s, xs, True
        # A guard event takes precedence: the jump-set boundary coincides with
        # the guard zero, so a within-step flow-set exit past it belongs to
        # the post-jump future. Exits are localized only when no guard fired.
        if event_s is None and not sys.flow_set.membership(x_new):
            s, xs = bisect_exit(h)
            event_s, event_x, event_is_guard = s, xs, False

        if event_s is not None:
            elapsed += event_s
            record(t0 + elapsed, event_x)
            return _SegmentOutcome(event_x, elapsed, event_is_guard,
                                   not event_is_guard, False)

        x = x_new
        g_prev = g_new
        elapsed += h
        steps += 1
        if steps % cfg.record_stride == 0:
            record(t0 + elapsed, x)

    record(t0 + elapsed, x)
    return _SegmentOutcome(x, elapsed, False, False, False)


def integrate_flow(sys: HybridSystem, x0: Array, budget_t: float,
                   cfg: SolverConfig) -> FlowResult:
    """Flow from ``x0`` for at most ``budget_t`` seconds.

    Stops early at a guard upcrossing (state returned within ``guard_tol``
    of the guard zero) or at a flow-set exit (last inside state returned).
    Raises ``DomainError`` if ``x0`` is not in the flow set and
    ``NumericFailure`` on NaN/Inf.
    """
    x = np.asarray(x0, dtype=float)
    if x.shape != (sys.n,):
        raise DomainError(f"expected state of dimension {sys.n}, got {x.shape}")
    if budget_t <= 0:
        raise ValueError("budget_t must be positive")
    if not sys.flow_set.membership(x):
        raise DomainError("initial state is outside the flow set")
    out = _flow_until_event(sys, x.copy(), budget_t, cfg, [], [], 0.0)
    if out.failed:
        raise NumericFailure("flow produced a non-finite state")
    return FlowResult(out.state, out.elapsed, out.hit_guard)


def apply_jump(sys: HybridSystem, x: Array) -> Array:
    """Apply the jump map at ``x``; requires jump-set membership within tolerance."""
    xv = np.asarray(x, dtype=float)
    if xv.shape != (sys.n,):
        raise DomainError(f"expected state of dimension {sys.n}, got {xv.shape}")
    if not sys.jump_set.membership(xv):
        raise DomainError("state is outside the jump set beyond tolerance")
    post = np.asarray(sys.jump_map(xv), dtype=float)
    if post.shape != (sys.n,):
        raise DomainError("jump map changed the state dimension")
    return post


def solve(sys: HybridSystem, x0: Array, cfg: SolverConfig) -> HybridArc:
    """Compute a hybrid arc from ``x0`` under the configured budgets.

    Alternates flow and jumps; when the state is in both sets,
    ``cfg.priority`` decides. Leaving the domain is recorded as a
    termination, not raised; NaN/Inf raises ``NumericFailure`` carrying the
    partial arc.
    """
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (sys.n,):
        raise DomainError(f"expected state of dimension {sys.n}, got {x.shape}")
    if not (sys.flow_set.membership(x) or sys.jump_set.membership(x)):
        raise DomainError("initial state is outside the flow and jump sets")

    t = 0.0
    j = 0
    segments: list[Segment] = []
    jumps: list[JumpRecord] = []
    rec_t: list[float] = [t]
    rec_x: list[Array] = [x.copy()]
    labels = sys.state_labels()

    def close_segment() -> None:
        segments.append(Segment(j=j, t=np.array(rec_t, dtype=float),
                                x=np.array(rec_x, dtype=float)))

    def finish(term: Termination) -> HybridArc:
        close_segment()
        return HybridArc(segments=segments, jumps=jumps, termination=term,
                         labels=labels)

    while True:
        in_d = sys.jump_set.membership(x)
        in_c = sys.flow_set.membership(x)

        if in_d and (cfg.priority is Priority.JUMP_FIRST or not in_c):
            if j >= cfg.max_j:
                return finish(Termination.MAX_J)
            pre = x.copy()
            post = np.asarray(sys.jump_map(pre), dtype=float)
            if post.shape != (sys.n,):
                raise DomainError("jump map changed the state dimension")
            tag = sys.jump_tag(pre) if sys.jump_tag is not None else None
            jumps.append(JumpRecord(t=t, j=j, pre=pre, post=post.copy(), tag=tag))
            close_segment()
            j += 1
            x = post
            rec_t = [t]
            rec_x = [x.copy()]
            continue

        if not in_c:
            return finish(Termination.LEFT_DOMAIN)

        remaining = cfg.max_t - t
        if remaining <= _TIME_EPS * max(1.0, cfg.max_t):
            return finish(Termination.MAX_T)

        out = _flow_until_event(sys, x, remaining, cfg, rec_t, rec_x, t)
        t += out.elapsed
        x = out.state
        if out.failed:
            raise NumericFailure("flow produced a non-finite state",
                                 arc=finish(Termination.NUMERIC_FAILURE))
        if out.hit_guard:
            if not sys.jump_set.membership(x):
                raise DomainError(
                    "guard upcrossing localized outside the jump set; "
                    "guards and jump set are inconsistent")
            continue
        if out.exited:
            return finish(Termination.LEFT_DOMAIN)
        return finish(Termination.MAX_T)


def distance_series(arc: HybridArc,
                    target: SetDescriptor) -> list[tuple[HybridTime, float]]:
    """Distance to ``target`` at every recorded sample, in arc order."""
    if not arc.segments or arc.n_samples() == 0:
        raise ValueError("arc has no samples")
    out: list[tuple[HybridTime, float]] = []
    for t, j, x in arc.samples():
        out.append((HybridTime(t, j), float(target.distance(x))))
    return out


def audit_arc(arc: HybridArc, sys: HybridSystem,
              cfg: SolverConfig) -> list[str]:
    """Check structural arc invariants; returns human-readable violations.

    Verifies segment time monotonicity and continuity across jumps,
    deterministic jump replay to 1e-12, guard values at pre-jump states
    within ``guard_tol``, and jump-set membership of pre-jump states.
    """
    problems: list[str] = []
    for seg in arc.segments:
        if np.any(np.diff(seg.t) <= 0):
            problems.append(f"segment j={seg.j}: time not strictly increasing")
    for a, b in zip(arc.segments[:-1], arc.segments[1:]):
        if b.j != a.j + 1:
            problems.append(f"jump counter skips from {a.j} to {b.j}")
        if abs(float(b.t[0]) - float(a.t[-1])) > 1e-12 * max(1.0, abs(float(a.t[-1]))):
            problems.append(f"segment j={b.j} does not start at previous end time")
    for k, rec in enumerate(arc.jumps):
        replay = np.asarray(sys.jump_map(rec.pre), dtype=float)
        err = float(np.max(np.abs(replay - rec.post)))
        if err > 1e-12 * max(1.0, float(np.max(np.abs(rec.post)))):
            problems.append(f"jump {k}: replay mismatch {err:.3e}")
        if not sys.jump_set.membership(rec.pre):
            problems.append(f"jump {k}: pre-state outside jump set")
        if sys.guards:
            gmin = min(abs(float(g(rec.pre))) for g in sys.guards)
            if gmin > cfg.guard_tol:
                problems.append(f"jump {k}: no guard within tolerance ({gmin:.3e})")
    return problems


# ---------------------------------------------------------------------------
# CSV export: trajectory samples and jump records, floats at 17 significant
# digits so a round-trip reproduces the binary values.

_FMT = "%.17g"


def write_arc_csv(arc: HybridArc, trajectory_path, jumps_path) -> None:
    labels = arc.state_labels()
    with open(trajectory_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "j", *labels])
        for t, j, x in arc.samples():
            writer.writerow([_FMT % t, str(j), *(_FMT % v for v in x)])
    with open(jumps_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "j",
                         *(f"pre_{s}" for s in labels),
                         *(f"post_{s}" for s in labels),
                         "tag"])
        for rec in arc.jumps:
            writer.writerow([_FMT % rec.t, str(rec.j),
                             *(_FMT % v for v in rec.pre),
                             *(_FMT % v for v in rec.post),
                             rec.tag or ""])


def read_trajectory_csv(path) -> tuple[list[str], Array, Array, Array]:
    """Read a trajectory CSV back as (labels, t, j, x)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    labels = header[2:]
    t = np.array([float(r[0]) for r in rows])
    j = np.array([int(r[1]) for r in rows])
    x = np.array([[float(v) for v in r[2:]] for r in rows])
    return labels, t, j, x
