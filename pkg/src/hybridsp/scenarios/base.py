"""Shared scenario plumbing: parameter errors and the builder result bundle."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Iterator

import numpy as np

from ..core import HybridSystem
from ..perturbation import SteadyStateMap, TimescaleDecomposition
from ..sets import SetDescriptor

Array = np.ndarray


class ParamError(ValueError):
    """Scenario parameters violate their declared invariants."""


@dataclass(frozen=True)
class Scenario:
    """Builder output: the system plus its two-timescale companions.

    Iterates as (system, decomposition, steady_state, attractor) so callers
    can tuple-unpack; the remaining fields carry scenario-specific extras
    (slow attractor and projector, candidate certificates, default initial
    state).
    """

    system: HybridSystem
    decomposition: TimescaleDecomposition
    steady_state: SteadyStateMap
    attractor: SetDescriptor
    slow_attractor: SetDescriptor | None = None
    slow_project: Callable[[Array], Array] | None = None
    v1: Callable[[Array], float] | None = None
    v2: Callable[[Array], float] | None = None
    x0: Array | None = None
    extras: dict[str, Any] = field(default_factory=dict)

    def __iter__(self) -> Iterator:
        return iter((self.system, self.decomposition, self.steady_state,
                     self.attractor))
