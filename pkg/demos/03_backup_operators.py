"""
Emulating other IRL methods by swapping the backup
===================================================

The reduction from Q to V picks which classic method the learner mimics:
max for the Boltzmann-rational model, log-sum-exp for maximum entropy, and
the p-norm or generalized softmax as smooth stand-ins for max.
"""

# %%
import numpy as np

from fairl import GSoft, LogSumExp, Max, PNorm, apply_backup, backup_gradient

q = np.array([0.0, 1.0, 1.5])
for op in (Max(), LogSumExp(), PNorm(p=10.0), GSoft(k=100.0)):
    print(f"{op!r:22s} V = {apply_backup(op, q):.4f}  dV/dq = {np.round(backup_gradient(op, q), 3)}")

# %%
# Each operator can pair with the Q-based or the reward-based motion model.
# Normalized over actions, exp(Q - V) loses V and matches the Q model at
# b = 1. The literal form is a distribution only under log-sum-exp; for the
# other backups its likelihood rewards flattening Q, which shows in the
# last column.
from fairl import FairlConfig, ObjectworldConfig, generate, pearson_correlation, train_nn
from fairl.harness import demonstrations

env = generate(ObjectworldConfig(grid_n=10, n_objects=6, n_colors=3, seed=0))
trajs = demonstrations(env, 1.0, 100, 40, seed=0)
print(f"{'backup':10s} {'q':>6s} {'reward':>7s} {'literal':>8s}")
for op in (Max(), LogSumExp(), PNorm(p=10.0), GSoft(k=100.0)):
    scores = []
    for model, normalize in (("q", True), ("reward", True), ("reward", False)):
        cfg = FairlConfig(backup=op, motion_model=model, normalize_reward_model=normalize,
                          learning_rate=0.1, max_iter=500)
        scores.append(pearson_correlation(train_nn(env, trajs, cfg)[1], env.true_reward))
    print(f"{op.kind:10s} {scores[0]:6.3f} {scores[1]:7.3f} {scores[2]:8.3f}")
