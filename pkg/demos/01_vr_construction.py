"""
From one VR function to a consistent (r, V, Q)
===============================================

A learner outputs a single number per state, f(s) = r(s) + gamma V(s).
Everything else follows from it, and the Bellman optimality equation holds
for any f whatsoever. This script checks that claim on a random network.
"""

# %%
import numpy as np

from fairl import Max, ObjectworldConfig, generate, init_mlp, value_iteration
from fairl.learner import construct
from fairl.mlp import mlp_forward_batch

env = generate(ObjectworldConfig(grid_n=5, seed=0))
print("states:", env.mdp.n_states, "actions:", env.mdp.n_actions, "features:", env.features.shape[1])

# %%
# A random (untrained) network gives an arbitrary f.
params = init_mlp([4, 4, 4, 4, 1], seed=1)
f = mlp_forward_batch(params, env.features)
r, V, Q = construct(env.mdp, f, Max(), env.mdp.gamma)

# %%
# V is the max over Q by construction ...
print("max |V - max_a Q|:", np.abs(V - Q.max(axis=1)).max())

# ... and solving the MDP with the implied reward gives back the same V.
V_solved, _ = value_iteration(env.mdp, r, tol=1e-10)
print("max |V_solved - V|:", np.abs(V_solved - V).max())

# %%
# The implied reward on the grid (rows are y, columns x).
np.set_printoptions(precision=2, suppress=True)
print(r.reshape(5, 5)[::-1])
