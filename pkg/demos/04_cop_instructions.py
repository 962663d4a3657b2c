"""
Instruction following on the center-of-pressure grid
=====================================================

States combine a grid position with a velocity direction. Simulated walkers
follow a schedule of instructed directions; the learner sees only their
pooled trajectories and must recover a reward that still tells the
directions apart.
"""

# %%
from fairl.cop import INSTRUCTION_NAMES, CopConfig, cop_generate
from fairl.harness import LearnerSpec, cop_demonstrations, cop_scores, fit

config = CopConfig(grid_g=10, seed=0)
env, schedule = cop_generate(config)
print("states:", env.mdp.n_states, "schedule:", [INSTRUCTION_NAMES[i] for i in schedule[:6]], "...")

trajs, labels = cop_demonstrations(env, schedule, config.grid_g, b=3.0, walkers=20, segment_length=30, seed=0)
print(len(trajs), "segments")

# %%
learner = LearnerSpec("fairl-nn", "nn", {"hidden": [32, 16], "b": 3.0, "learning_rate": 0.1, "max_iter": 2000})
control = LearnerSpec("random-control", "random")
for spec in (learner, control):
    scores = cop_scores(fit(spec, env, trajs, seed=0), trajs, labels, config.grid_g)
    print(spec.label)
    for instr, (corr, _) in sorted(scores.items()):
        print(f"  {INSTRUCTION_NAMES[instr]:13s} {corr:+.3f}")
