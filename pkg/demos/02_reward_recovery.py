"""
Recovering an objectworld reward from demonstrations
=====================================================

A Boltzmann-rational expert acts on a 5x5 objectworld. We fit the neural
network and the sparse GP learner to its trajectories and compare the
recovered rewards with the ground truth.
"""

# %%
import numpy as np

from fairl import FairlConfig, ObjectworldConfig, generate, pearson_correlation, train_gp, train_nn
from fairl.harness import demonstrations

env = generate(ObjectworldConfig(grid_n=5, n_objects=2, n_colors=2, seed=0))
trajs = demonstrations(env, b=1.0, count=125, horizon=40, seed=0)
print(f"{len(trajs)} trajectories, {sum(map(len, trajs))} steps")

np.set_printoptions(precision=2, suppress=True)
print("true reward:\n", env.true_reward.reshape(5, 5)[::-1])

# %%
# Plain gradient ascent on the mean per-step log-likelihood.
_, r_nn, _, _, report = train_nn(env, trajs, FairlConfig(learning_rate=0.1, max_iter=2000, convergence_tol=1e-9))
print(f"NN: {report.iterations_run} iterations, corr {pearson_correlation(r_nn, env.true_reward):.3f}")
print(r_nn.reshape(5, 5)[::-1])

# %%
# The GP learner ascends the likelihood plus its own Gaussian prior.
gp, r_gp, _, _, report = train_gp(env, trajs, FairlConfig(learning_rate=0.5, max_iter=2000, convergence_tol=1e-9))
print(f"GP: {report.iterations_run} iterations, corr {pearson_correlation(r_gp, env.true_reward):.3f}")
print("inverse squared length scales:", gp.length_scales)

# %%
# Fewer demonstrations make the problem harder.
for count in (8, 32, 125):
    few = demonstrations(env, 1.0, count, 40, seed=1)
    r = train_nn(env, few, FairlConfig(learning_rate=0.1, max_iter=2000))[1]
    print(f"{count:4d} trajectories -> corr {pearson_correlation(r, env.true_reward):.3f}")
