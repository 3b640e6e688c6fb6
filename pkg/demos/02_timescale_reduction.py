# %% [markdown]
# # Boundary layer and reduced system
#
# With the state split into slow and fast blocks and a steady-state map
# giving the fast equilibria as a function of the slow state, two auxiliary
# systems describe the timescale extremes: the boundary layer (slow states
# frozen, fast-time scaling removed) and the reduced system (slow dynamics
# evaluated on the manifold, including jumps taken from it).

# %%
import numpy as np

from hybridsp import (SolverConfig, boundary_layer_manifold,
                      make_boundary_layer, make_reduced, manifold_distance,
                      restricted_manifold, solve, steady_state_residual)
from hybridsp.scenarios import Example1Params, build_example1

scenario = build_example1(Example1Params(gamma=0.05, tau=1.0, epsilon=1e-3))
system, dec, ssm, attractor = scenario

# %% [markdown]
# The steady-state map here is x = u; its defining property is that the
# (unscaled) fast flow vanishes on the graph. Sampling certifies it.

# %%
rng = np.random.default_rng(0)
worst = max(steady_state_residual(system, dec, ssm,
                                  np.array([rng.uniform(0, 10),
                                            rng.uniform(0, 1)]))
            for _ in range(1000))
print(f"max fast-flow residual on the manifold: {worst:.2e}")

# %% [markdown]
# Boundary layer: u and v freeze, x relaxes at unit rate. The derived flow
# is exactly (0, 0, -(x - u)).

# %%
bl = make_boundary_layer(system, dec, scenario.slow_attractor, rho=20.0)
print("boundary-layer flow at (2, 0.5, 5):",
      bl.flow_map(np.array([2.0, 0.5, 5.0])))

# %% [markdown]
# Reduced system: two states (u, v), the drift of the full slow block on
# the manifold, and the jump u -> u/2 obtained by evaluating the full jump
# map at manifold points (where x = u).

# %%
red = make_reduced(system, dec, ssm)
print("reduced flow at (5, 0.3):", red.flow_map(np.array([5.0, 0.3])))
print("reduced jump from u=5:", red.jump_map(np.array([5.0, 1.0])))

arc = solve(red, np.array([5.0, 0.0]), SolverConfig(step=1e-3, max_t=5.0))
print("reduced arc jumps at:", [round(r.t, 3) for r in arc.jumps])

# %% [markdown]
# Manifold distances: the boundary-layer manifold is the x = u graph over
# slow states near the attractor; the restricted manifold additionally pins
# the slow state to the attractor. The first is computed by exact affine
# projection, the second decouples because x = u is constant on {u = 0}.

# %%
m_rho = boundary_layer_manifold(dec, ssm)
m_a = restricted_manifold(dec, ssm, scenario.slow_attractor,
                          h1_on_attractor=np.array([0.0]),
                          slow_project=scenario.slow_project)
point = np.array([0.0, 0.5, 2.0])
print(f"distance to the graph manifold:      "
      f"{manifold_distance(point, m_rho):.7f}")
print(f"distance to the restricted manifold: "
      f"{manifold_distance(point, m_a):.7f}")
