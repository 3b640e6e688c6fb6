"""Closed sets represented by a membership test plus a Euclidean distance map."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

Array = np.ndarray


@dataclass(frozen=True)
class SetDescriptor:
    """A closed subset of the state space.

    ``membership`` gates flow/jump scheduling, ``distance`` feeds monitors and
    attractivity estimates. The two must be consistent: ``membership(x)``
    implies ``distance(x) <= tolerance``, and ``distance`` vanishes on the set.
    """

    membership: Callable[[Array], bool]
    distance: Callable[[Array], float]
    tolerance: float = 1e-9

    def contains(self, x: Array) -> bool:
        return bool(self.membership(np.asarray(x, dtype=float)))

    def dist(self, x: Array) -> float:
        return float(self.distance(np.asarray(x, dtype=float)))


def full_space(tolerance: float = 1e-9) -> SetDescriptor:
    """The whole space: everything is a member at distance zero."""
    return SetDescriptor(membership=lambda x: True,
                         distance=lambda x: 0.0,
                         tolerance=tolerance)


def box_set(lo: Sequence[float], hi: Sequence[float],
            tolerance: float = 1e-9) -> SetDescriptor:
    """Axis-aligned box ``[lo, hi]``; entries may be +-inf for free coordinates.

    Distance is the exact Euclidean distance to the box.
    """
    lo_a = np.asarray(lo, dtype=float)
    hi_a = np.asarray(hi, dtype=float)
    if lo_a.shape != hi_a.shape:
        raise ValueError("box bounds must have equal shape")
    if np.any(lo_a > hi_a):
        raise ValueError("box requires lo <= hi componentwise")

    lo_tol = lo_a - tolerance
    hi_tol = hi_a + tolerance

    def membership(x: Array) -> bool:
        return bool(((x >= lo_tol) & (x <= hi_tol)).all())

    def distance(x: Array) -> float:
        below = np.maximum(lo_a - x, 0.0)
        above = np.maximum(x - hi_a, 0.0)
        return float(np.sqrt(np.sum(below * below + above * above)))

    return SetDescriptor(membership=membership, distance=distance,
                         tolerance=tolerance)


def singleton(point: Sequence[float], tolerance: float = 1e-9) -> SetDescriptor:
    """The one-point set ``{point}``."""
    p = np.asarray(point, dtype=float)
    return box_set(p, p, tolerance=tolerance)


def interval_set(lo: float, hi: float, tolerance: float = 1e-9) -> SetDescriptor:
    """Scalar interval as a 1-D box (convenience for per-block products)."""
    return box_set([lo], [hi], tolerance=tolerance)


def product_set(blocks: Sequence[tuple[Sequence[int], SetDescriptor]],
                tolerance: float = 1e-9) -> SetDescriptor:
    """Product of sets over disjoint coordinate blocks.

    Each block is ``(indices, descriptor)``; the descriptor sees only the
    listed coordinates. Coordinates not covered by any block are
    unconstrained. Distance combines blockwise distances in quadrature,
    which is exact for products.
    """
    compiled = [(np.asarray(idx, dtype=int), d) for idx, d in blocks]

    def membership(x: Array) -> bool:
        return all(d.membership(x[idx]) for idx, d in compiled)

    def distance(x: Array) -> float:
        acc = 0.0
        for idx, d in compiled:
            di = d.distance(x[idx])
            acc += di * di
        return math.sqrt(acc)

    return SetDescriptor(membership=membership, distance=distance,
                         tolerance=tolerance)


def intersect(a: SetDescriptor, b: SetDescriptor,
              tolerance: float | None = None) -> SetDescriptor:
    """Intersection with the max-of-distances lower bound as its distance.

    The exact distance to an intersection is not computable from the two
    factors alone; ``max`` is a valid lower bound and is exact whenever one
    factor contains the other's projection (the common case here: boxes
    intersected with half-space-like restrictions).
    """
    tol = tolerance if tolerance is not None else max(a.tolerance, b.tolerance)
    return SetDescriptor(
        membership=lambda x: a.membership(x) and b.membership(x),
        distance=lambda x: max(a.distance(x), b.distance(x)),
        tolerance=tol)


def inflate(base: SetDescriptor, radius: float,
            tolerance: float = 1e-9) -> SetDescriptor:
    """The set of points within ``radius`` of ``base`` (Euclidean inflation)."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    return SetDescriptor(
        membership=lambda x: base.distance(x) <= radius + tolerance,
        distance=lambda x: max(base.distance(x) - radius, 0.0),
        tolerance=tolerance)


def unit_circle_pairs(indices: Sequence[Sequence[int]],
                      tolerance: float = 1e-9) -> SetDescriptor:
    """Product of unit circles, one per index pair.

    Distance from a pair ``z`` to its circle is ``| ||z|| - 1 |``.
    """
    pairs = [np.asarray(p, dtype=int) for p in indices]
    if any(p.size != 2 for p in pairs):
        raise ValueError("each oscillator block needs exactly two indices")

    def membership(x: Array) -> bool:
        return all(abs(float(np.hypot(x[p[0]], x[p[1]])) - 1.0) <= tolerance
                   for p in pairs)

    def distance(x: Array) -> float:
        acc = 0.0
        for p in pairs:
            d = abs(float(np.hypot(x[p[0]], x[p[1]])) - 1.0)
            acc += d * d
        return math.sqrt(acc)

    return SetDescriptor(membership=membership, distance=distance,
                         tolerance=tolerance)
