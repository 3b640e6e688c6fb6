"""hybridsp: simulation and numerical analysis of singularly perturbed
hybrid dynamical systems.

Core pieces: a fixed-step hybrid arc solver with guard-based event
localization (`core`), boundary-layer/reduced-system derivations and jump
regularity audits (`perturbation`), Lyapunov monitors and attractivity
sweeps (`analysis`), and the concrete systems under `scenarios`.
"""

from .core import (DomainError, FlowResult, HybridArc, HybridSystem,
                   HybridTime, JumpRecord, NumericFailure, Priority, Segment,
                   SolverConfig, Termination, apply_jump, audit_arc,
                   distance_series, integrate_flow, read_trajectory_csv,
                   solve, write_arc_csv)
from .sets import (SetDescriptor, box_set, full_space, inflate, intersect,
                   interval_set, product_set, singleton, unit_circle_pairs)
from .perturbation import (BoundaryLayerVariant, DimensionError,
                           JumpRegularityReport, ManifoldKind, ManifoldSet,
                           MissingTags, RegularityVariant, SteadyStateMap,
                           TimescaleDecomposition, boundary_layer_manifold,
                           classify_jumps, default_rho, make_boundary_layer,
                           make_reduced, manifold_distance,
                           restricted_manifold, steady_state_residual,
                           synthetic_arc)
from .analysis import (AttractivityReport, FlowViolation, GridPointEstimate,
                       JumpViolation, LyapunovSeries, LyapunovSpec,
                       ParamPoint, SGPASProbe, check_flow_decrease,
                       check_jump_decrease, combined_lyapunov,
                       estimate_attractivity, lyapunov_along_arc,
                       sample_bound_envelope)

__version__ = "0.1.0"
