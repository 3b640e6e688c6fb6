"""Two-timescale derivations: boundary layer, reduced system, manifolds.

The state is split into a slow block (first ``n1`` coordinates) and a fast
block scaled by ``1/epsilon`` in the full flow map. From a steady-state map
assigning fast equilibria to slow states, this module derives the
boundary-layer system (slow states frozen, scaling removed), the reduced
system (slow dynamics evaluated on the manifold, including jumps taken from
manifold points), distances to the associated manifolds, and an audit of
jump regularity (minimum flow time before jumps).
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import HybridArc, HybridSystem, JumpRecord, Segment, Termination
from .sets import SetDescriptor, inflate, intersect

Array = np.ndarray

DEFAULT_SLOW_TAGS = frozenset({"slow", "controller"})


class DimensionError(ValueError):
    """Decomposition is inconsistent with the system dimension."""


class MissingTags(ValueError):
    """Operation requires jump tags that the arc does not carry."""


@dataclass(frozen=True)
class TimescaleDecomposition:
    """Slow/fast partition: slow block first, then the fast block.

    ``fast_bounded`` / ``fast_unbounded`` are index sets *within the fast
    block* separating coordinates pinned by the steady-state map from free
    coordinates (timers, angles, references) that the manifold leaves
    unconstrained. By default every fast coordinate is bounded.
    """

    n1: int
    n2: int
    epsilon: float
    fast_bounded: tuple[int, ...] | None = None
    fast_unbounded: tuple[int, ...] = ()

    def __post_init__(self):
        if self.n1 < 0 or self.n2 < 1:
            raise DimensionError("need n1 >= 0 and n2 >= 1")
        if self.epsilon <= 0:
            raise DimensionError("epsilon must be positive")
        bounded = self.bounded_dims()
        both = set(bounded) | set(self.fast_unbounded)
        if both != set(range(self.n2)) or len(bounded) + len(self.fast_unbounded) != self.n2:
            raise DimensionError("bounded and unbounded index sets must "
                                 "partition the fast block")

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    def bounded_dims(self) -> tuple[int, ...]:
        if self.fast_bounded is not None:
            return self.fast_bounded
        return tuple(i for i in range(self.n2) if i not in set(self.fast_unbounded))

    def slow(self, x: Array) -> Array:
        return x[: self.n1]

    def fast(self, x: Array) -> Array:
        return x[self.n1:]

    def check_system(self, sys: HybridSystem) -> None:
        if sys.n != self.n:
            raise DimensionError(
                f"decomposition covers {self.n} states, system has {sys.n}")


@dataclass(frozen=True)
class SteadyStateMap:
    """Fast equilibria as a function of the slow state.

    ``h1`` returns values for the bounded fast coordinates only; the
    unbounded coordinates are free on the manifold and get representative
    values from ``unbounded_fill`` (zeros by default) wherever a concrete
    fast vector is needed. ``h1_affine = (M, b)`` declares ``h1(x1) = M x1 + b``
    and unlocks the exact projection path for manifold distances.
    """

    h1: Callable[[Array], Array]
    membership: Callable[[Array, Array], bool]
    unbounded_fill: Callable[[Array], Array] | None = None
    h1_affine: tuple[Array, Array] | None = None

    def fast_representative(self, x1: Array, dec: TimescaleDecomposition) -> Array:
        out = np.zeros(dec.n2)
        bounded = dec.bounded_dims()
        vals = np.asarray(self.h1(x1), dtype=float)
        if vals.shape != (len(bounded),):
            raise DimensionError("h1 must return one value per bounded fast dim")
        out[list(bounded)] = vals
        if dec.fast_unbounded:
            fill = (np.zeros(len(dec.fast_unbounded))
                    if self.unbounded_fill is None
                    else np.asarray(self.unbounded_fill(x1), dtype=float))
            out[list(dec.fast_unbounded)] = fill
        return out

    def embed(self, x1: Array, dec: TimescaleDecomposition) -> Array:
        x = np.empty(dec.n)
        x[: dec.n1] = x1
        x[dec.n1:] = self.fast_representative(x1, dec)
        return x


def steady_state_residual(sys: HybridSystem, dec: TimescaleDecomposition,
                          ssm: SteadyStateMap, x1: Array) -> float:
    """Norm of the unscaled fast flow over bounded dims at (x1, h1(x1)).

    The system flow carries the 1/epsilon scaling, so the raw fast block is
    multiplied by epsilon before taking the norm. Zero (up to tolerance)
    certifies that h1 lands on fast equilibria.
    """
    dec.check_system(sys)
    x = ssm.embed(np.asarray(x1, dtype=float), dec)
    f = np.asarray(sys.flow_map(x), dtype=float)
    fast = dec.epsilon * f[dec.n1:]
    return float(np.linalg.norm(fast[list(dec.bounded_dims())]))


class BoundaryLayerVariant(enum.Enum):
    CONTINUOUS = "continuous"   # flows only; jump set emptied
    HYBRID = "hybrid"           # keeps fast-block jumps


class ManifoldKind(enum.Enum):
    NEAR_ATTRACTOR = "M_rho"    # slow factor within rho of the attractor
    RESTRICTED = "M_A"          # slow factor on the attractor itself


def make_boundary_layer(sys: HybridSystem, dec: TimescaleDecomposition,
                        attractor_slow: SetDescriptor | None, rho: float | None,
                        variant: BoundaryLayerVariant = BoundaryLayerVariant.CONTINUOUS,
                        ) -> HybridSystem:
    """Freeze the slow block and drop the fast-time scaling.

    The derived flow is ``(0, epsilon * f_fast)``; the flow set restricts the
    slow factor to within ``rho`` of ``attractor_slow`` (no restriction when
    either is None). The continuous variant removes all jumps; the hybrid
    variant keeps jumps that modify only the fast block (guards whose tag is
    not in ``sys.slow_jump_tags``).
    """
    dec.check_system(sys)
    eps = dec.epsilon
    n1 = dec.n1
    base_flow = sys.flow_map

    def bl_flow(x: Array) -> Array:
        f = np.asarray(base_flow(x), dtype=float)
        out = np.zeros_like(f)
        out[n1:] = eps * f[n1:]
        return out

    flow_set = sys.flow_set
    if attractor_slow is not None and rho is not None:
        near = inflate(attractor_slow, rho)
        base_set = sys.flow_set

        def membership(x: Array) -> bool:
            return near.membership(x[:n1]) and base_set.membership(x)

        def distance(x: Array) -> float:
            return max(near.distance(x[:n1]), base_set.distance(x))

        flow_set = SetDescriptor(membership=membership, distance=distance,
                                 tolerance=base_set.tolerance)

    if variant is BoundaryLayerVariant.CONTINUOUS:
        empty = SetDescriptor(membership=lambda x: False,
                              distance=lambda x: math.inf,
                              tolerance=sys.jump_set.tolerance)
        return HybridSystem(
            n=sys.n, flow_map=bl_flow,
            jump_map=lambda x: np.array(x, dtype=float, copy=True),
            flow_set=flow_set, jump_set=empty, guards=(),
            labels=sys.labels)

    if sys.slow_jump_tags is None or sys.guard_tags is None or sys.jump_tag is None:
        raise MissingTags("hybrid boundary layer needs guard_tags, jump_tag "
                          "and slow_jump_tags on the source system")
    slow_tags = sys.slow_jump_tags
    fast_guards = tuple(g for g, tag in zip(sys.guards, sys.guard_tags)
                        if tag not in slow_tags)
    fast_tags = tuple(tag for tag in sys.guard_tags if tag not in slow_tags)
    base_jump = sys.jump_map
    base_tag = sys.jump_tag
    base_jump_set = sys.jump_set

    def bl_jump(x: Array) -> Array:
        y = np.asarray(base_jump(x), dtype=float)
        out = np.array(x, dtype=float, copy=True)
        out[n1:] = y[n1:]
        return out

    def bl_jump_membership(x: Array) -> bool:
        return base_jump_set.membership(x) and (base_tag(x) not in slow_tags)

    jump_set = SetDescriptor(membership=bl_jump_membership,
                             distance=base_jump_set.distance,
                             tolerance=base_jump_set.tolerance)
    return HybridSystem(
        n=sys.n, flow_map=bl_flow, jump_map=bl_jump,
        flow_set=flow_set, jump_set=jump_set,
        guards=fast_guards, guard_tags=fast_tags,
        jump_tag=base_tag, labels=sys.labels)


def make_reduced(sys: HybridSystem, dec: TimescaleDecomposition,
                 ssm: SteadyStateMap) -> HybridSystem:
    """Slow dynamics evaluated on the manifold, jumps taken from it.

    The reduced flow/jump at ``x1`` is the slow component of the full map at
    the embedded point ``(x1, h1(x1), fill)`` - the same arithmetic path as
    the full system. Flow/jump sets and guards are pulled back through the
    embedding, which equals the slow factor for product sets. For systems
    with tagged slow/fast jumps, only slow-tagged guards survive.
    """
    dec.check_system(sys)
    n1 = dec.n1
    if n1 < 1:
        raise DimensionError("reduced system needs at least one slow state")

    def embed(x1: Array) -> Array:
        return ssm.embed(np.asarray(x1, dtype=float), dec)

    def red_flow(x1: Array) -> Array:
        return np.asarray(sys.flow_map(embed(x1)), dtype=float)[:n1]

    def red_jump(x1: Array) -> Array:
        return np.asarray(sys.jump_map(embed(x1)), dtype=float)[:n1]

    flow_set = SetDescriptor(
        membership=lambda x1: sys.flow_set.membership(embed(x1)),
        distance=lambda x1: sys.flow_set.distance(embed(x1)),
        tolerance=sys.flow_set.tolerance)
    jump_set = SetDescriptor(
        membership=lambda x1: sys.jump_set.membership(embed(x1)),
        distance=lambda x1: sys.jump_set.distance(embed(x1)),
        tolerance=sys.jump_set.tolerance)

    guards = sys.guards
    tags = sys.guard_tags
    if tags is not None and sys.slow_jump_tags is not None:
        slow = sys.slow_jump_tags
        kept = [(g, tag) for g, tag in zip(guards, tags) if tag in slow]
        guards = tuple(g for g, _ in kept)
        tags = tuple(tag for _, tag in kept)
    red_guards = tuple((lambda g: (lambda x1: g(embed(x1))))(g) for g in guards)

    labels = None
    if sys.labels is not None:
        labels = tuple(sys.labels[:n1])
    jump_tag = None
    if sys.jump_tag is not None:
        base_tag = sys.jump_tag
        jump_tag = lambda x1: base_tag(embed(x1))

    return HybridSystem(n=n1, flow_map=red_flow, jump_map=red_jump,
                        flow_set=flow_set, jump_set=jump_set,
                        guards=red_guards, guard_tags=tags,
                        jump_tag=jump_tag, labels=labels)


@dataclass(frozen=True)
class ManifoldSet:
    """Slow-set x steady-state-graph manifold with a computable distance.

    Distance ignores the unbounded fast coordinates (they are free on the
    manifold, contributing zero by the product structure). The projection is
    exact when ``h1`` is affine and the slow constraint is inactive, exact by
    decoupling when ``h1_on_slow_set`` declares h1 constant on the slow set,
    and otherwise refined by a shrinking coordinate search to ``refine_tol``.
    """

    kind: ManifoldKind
    dec: TimescaleDecomposition
    ssm: SteadyStateMap
    slow_set: SetDescriptor | None = None
    rho: float | None = None
    h1_on_slow_set: Array | None = None
    slow_project: Callable[[Array], Array] | None = None
    refine_tol: float = 1e-8
    subset: "ManifoldSet | None" = None  # known subset: bounds distance above

    def _objective(self, x1: Array, x2b: Array, y1: Array) -> float:
        d1 = x1 - y1
        d2 = x2b - np.asarray(self.ssm.h1(y1), dtype=float)
        return float(d1 @ d1 + d2 @ d2)

    def distance(self, x: Array) -> float:
        x = np.asarray(x, dtype=float)
        dec = self.dec
        x1 = x[: dec.n1]
        x2b = x[dec.n1:][list(dec.bounded_dims())]
        cap = self.subset.distance(x) if self.subset is not None else math.inf

        # Decoupled exact path: h1 constant on the slow set.
        if self.h1_on_slow_set is not None and self.slow_set is not None:
            d1 = self.slow_set.distance(x1)
            d2 = float(np.linalg.norm(x2b - self.h1_on_slow_set))
            return min(math.hypot(d1, d2), cap)

        # Exact path: affine h1, constraint absent or inactive.
        y_aff = None
        if self.ssm.h1_affine is not None:
            m_mat, b = self.ssm.h1_affine
            rhs = x1 + m_mat.T @ (x2b - b)
            y_aff = np.linalg.solve(np.eye(dec.n1) + m_mat.T @ m_mat, rhs)
            if self.slow_set is None or self.slow_set.membership(y_aff):
                return min(math.sqrt(self._objective(x1, x2b, y_aff)), cap)

        # Constrained: refine from feasible seeds.
        best = math.inf
        seeds = []
        if self.slow_set is None or self.slow_set.membership(x1):
            seeds.append(x1.copy())
        if self.slow_project is not None:
            seeds.append(np.asarray(self.slow_project(x1), dtype=float))
            if y_aff is not None:
                seeds.append(np.asarray(self.slow_project(y_aff), dtype=float))
        if not seeds:
            raise ValueError("constrained projection needs a feasible seed; "
                             "provide slow_project")
        member = self.slow_set.membership if self.slow_set is not None else None
        for y0 in seeds:
            _, val = _refine_projection(
                lambda y: self._objective(x1, x2b, y), y0, member,
                radius=max(1.0, math.sqrt(self._objective(x1, x2b, y0))),
                tol=self.refine_tol)
            best = min(best, val)
        return min(math.sqrt(best), cap)

    def membership(self, x: Array) -> bool:
        x = np.asarray(x, dtype=float)
        x1 = self.dec.slow(x)
        if self.slow_set is not None and not self.slow_set.membership(x1):
            return False
        return bool(self.ssm.membership(x1, self.dec.fast(x)))

    @property
    def descriptor(self) -> SetDescriptor:
        return SetDescriptor(membership=self.membership,
                             distance=self.distance,
                             tolerance=self.refine_tol)


def _refine_projection(objective: Callable[[Array], float], y0: Array,
                       member: Callable[[Array], bool] | None,
                       radius: float, tol: float) -> tuple[Array, float]:
    """Shrinking coordinate search, restricted to members when given."""
    y = np.array(y0, dtype=float)
    best = objective(y)
    r = max(radius, tol)
    dims = y.size
    while r > tol:
        improved = False
        for i in range(dims):
            for s in (r, -r):
                cand = y.copy()
                cand[i] += s
                if member is not None and not member(cand):
                    continue
                v = objective(cand)
                if v < best * (1.0 - 1e-15) - 1e-300:
                    y, best = cand, v
                    improved = True
        if not improved:
            r *= 0.5
    return y, best


def boundary_layer_manifold(dec: TimescaleDecomposition, ssm: SteadyStateMap,
                            attractor_slow: SetDescriptor | None = None,
                            rho: float | None = None,
                            slow_space: SetDescriptor | None = None,
                            slow_project: Callable[[Array], Array] | None = None,
                            subset: ManifoldSet | None = None) -> ManifoldSet:
    """The manifold of fast equilibria over slow states near the attractor.

    With ``rho`` (and an attractor) the slow factor is restricted to the
    rho-inflation of the attractor, intersected with ``slow_space`` when
    given; without ``rho`` the slow factor is only constrained by
    ``slow_space``. ``slow_project`` should project onto the attractor's
    slow set; the inflated projector is derived from it. Passing the
    restricted manifold as ``subset`` tightens the distance estimate and
    makes the nesting inequality hold by construction.
    """
    slow_set = slow_space
    project = None
    if attractor_slow is not None and rho is not None:
        near = inflate(attractor_slow, rho)
        slow_set = near if slow_space is None else intersect(near, slow_space)
        if slow_project is not None:
            base_proj = slow_project

            def project(y: Array) -> Array:
                p = np.asarray(base_proj(y), dtype=float)
                gap = y - p
                norm = float(np.linalg.norm(gap))
                if norm <= rho:
                    return np.array(y, dtype=float, copy=True)
                return p + (rho / norm) * gap

    return ManifoldSet(kind=ManifoldKind.NEAR_ATTRACTOR, dec=dec, ssm=ssm,
                       slow_set=slow_set, rho=rho, slow_project=project,
                       subset=subset)


def restricted_manifold(dec: TimescaleDecomposition, ssm: SteadyStateMap,
                        attractor_slow: SetDescriptor,
                        h1_on_attractor: Array | None = None,
                        slow_project: Callable[[Array], Array] | None = None,
                        ) -> ManifoldSet:
    """Attractor slow states paired with their steady-state fast values."""
    return ManifoldSet(kind=ManifoldKind.RESTRICTED, dec=dec, ssm=ssm,
                       slow_set=attractor_slow,
                       h1_on_slow_set=(None if h1_on_attractor is None
                                       else np.asarray(h1_on_attractor, float)),
                       slow_project=slow_project)


def manifold_distance(x: Array, m: ManifoldSet) -> float:
    """Euclidean distance from ``x`` to the manifold (see ManifoldSet)."""
    return m.distance(x)


def default_rho(arc: HybridArc, attractor_slow: SetDescriptor,
                dec: TimescaleDecomposition) -> float:
    """Sampled maximum slow distance along the arc, plus 10 percent."""
    worst = 0.0
    for _, _, x in arc.samples():
        worst = max(worst, attractor_slow.distance(x[: dec.n1]))
    return 1.1 * worst


# ---------------------------------------------------------------------------
# Jump regularity audit


class RegularityVariant(enum.Enum):
    ALL_JUMPS = "all"
    SLOW_JUMPS_ONLY = "slow"


@dataclass(frozen=True)
class JumpLabel:
    t: float
    j: int
    tag: str | None
    interval: float
    regular: bool


@dataclass
class JumpRegularityReport:
    """Per-jump regular/irregular labels against a minimum flow time tau."""

    tau: float
    variant: RegularityVariant
    labels: list[JumpLabel]

    @property
    def n_jumps(self) -> int:
        return len(self.labels)

    @property
    def n_irregular(self) -> int:
        return sum(1 for lab in self.labels if not lab.regular)

    @property
    def last_irregular_t(self) -> float | None:
        times = [lab.t for lab in self.labels if not lab.regular]
        return max(times) if times else None

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "variant": self.variant.value,
            "n_jumps": self.n_jumps,
            "n_irregular": self.n_irregular,
            "last_irregular_t": self.last_irregular_t,
            "labels": ["regular" if lab.regular else "irregular"
                       for lab in self.labels],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def classify_jumps(arc: HybridArc, tau: float,
                   variant: RegularityVariant = RegularityVariant.ALL_JUMPS,
                   slow_tags: frozenset[str] = DEFAULT_SLOW_TAGS,
                   time_tol: float = 1e-7) -> JumpRegularityReport:
    """Label jumps by the flow interval that precedes them.

    A jump is regular when at least ``tau`` of flow preceded it (within
    ``time_tol``; the default absorbs guard-localization jitter so exactly
    periodic timers classify as regular). In the slow-only variant, only
    slow-tagged jumps are labelled and the interval runs between consecutive
    slow jumps, so fast jumps in between do not reset the clock. Labels
    depend only on jump times and tags, never on how densely the arc was
    sampled.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    start_t = float(arc.segments[0].t[0]) if arc.segments else 0.0

    labels: list[JumpLabel] = []
    if variant is RegularityVariant.ALL_JUMPS:
        prev_t = start_t
        for rec in arc.jumps:
            interval = rec.t - prev_t
            labels.append(JumpLabel(t=rec.t, j=rec.j, tag=rec.tag,
                                    interval=interval,
                                    regular=interval >= tau - time_tol))
            prev_t = rec.t
    else:
        if any(rec.tag is None for rec in arc.jumps):
            raise MissingTags("slow-only classification requires a tag on "
                              "every jump record")
        prev_t = start_t
        for rec in arc.jumps:
            if rec.tag not in slow_tags:
                continue
            interval = rec.t - prev_t
            labels.append(JumpLabel(t=rec.t, j=rec.j, tag=rec.tag,
                                    interval=interval,
                                    regular=interval >= tau - time_tol))
            prev_t = rec.t
    return JumpRegularityReport(tau=tau, variant=variant, labels=labels)


def synthetic_arc(jump_times: Sequence[float],
                  tags: Sequence[str | None] | None = None,
                  horizon: float | None = None, dim: int = 1) -> HybridArc:
    """Build a minimal arc with the given jump times (for audits and tests)."""
    times = [float(t) for t in jump_times]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("jump times must be strictly increasing")
    if tags is None:
        tags = [None] * len(times)
    if len(tags) != len(times):
        raise ValueError("tags must align with jump_times")
    end = horizon if horizon is not None else (times[-1] + 1.0 if times else 1.0)
    zero = np.zeros(dim)
    segments: list[Segment] = []
    jumps: list[JumpRecord] = []
    t_prev = 0.0
    for k, tk in enumerate(times):
        seg_t = [t_prev, tk] if tk > t_prev else [t_prev]
        segments.append(Segment(j=k, t=np.array(seg_t),
                                x=np.zeros((len(seg_t), dim))))
        jumps.append(JumpRecord(t=tk, j=k, pre=zero.copy(), post=zero.copy(),
                                tag=tags[k]))
        t_prev = tk
    tail_t = [t_prev, end] if end > t_prev else [t_prev]
    segments.append(Segment(j=len(times), t=np.array(tail_t),
                            x=np.zeros((len(tail_t), dim))))
    return HybridArc(segments=segments, jumps=jumps,
                     termination=Termination.MAX_T)
