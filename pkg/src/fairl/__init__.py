"""Function-approximation inverse reinforcement learning."""

from .backups import GSoft, LogSumExp, Max, PNorm, apply_backup, backup_gradient
from .cop import CopConfig, cop_generate, ideal_reward
from .gp import GpParams, ard_kernel, gp_mean, gp_param_gradient, gp_prior_loglik
from .learner import (
    FairlConfig,
    MotionModel,
    TrainReport,
    action_log_prob,
    log_likelihood,
    loglik_gradient,
    q_from_vr,
    r_from_vr,
    train_gp,
    train_nn,
    v_from_vr,
)
from .mdp import (
    Mdp,
    Trajectory,
    boltzmann_distribution,
    greedy_policy,
    pearson_correlation,
    sample_trajectories,
    value_iteration,
)
from .mlp import MlpParams, init_mlp, mlp_forward, mlp_param_gradient
from .objectworld import EnvBundle, ObjectworldConfig, generate

__version__ = "0.1.0"
