"""Function-approximation IRL.

A model outputs one VR value ``f(s) = r(s) + gamma V(s)`` per state. From it

    Q(s, a) = sum_{s'} P(s'|s,a) f(s')
    V(s)    = backup(Q(s, .))
    r(s)    = f(s) - gamma V(s)

so ``(r, V, Q)`` satisfy the Bellman optimality equation for every parameter
value, and learning reduces to maximizing the likelihood of observed actions
under a motion model built on ``Q``. No MDP is solved inside the loop.
"""

from __future__ import annotations

import enum
import time
from dataclasses import asdict, dataclass, field, replace
from functools import singledispatch
from typing import Callable, Sequence

import numpy as np

from .backups import BackupOperator, Max, backup_from_config, backup_to_config
from .gp import GpParams, gp_mean_all, gp_mean_vjp, gp_prior_gradient, gp_prior_loglik, init_gp
from .mdp import Mdp, Trajectory, visit_counts
from .mlp import MlpParams, init_mlp, mlp_forward_batch, mlp_vjp
from .objectworld import EnvBundle


class MotionModel(str, enum.Enum):
    Q_BASED = "q"
    REWARD_BASED = "reward"
    VALUE_BASED = "value"


class TrainingDivergedError(RuntimeError):
    def __init__(self, iteration: int, value: float):
        super().__init__(f"objective became non-finite ({value}) at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class FairlConfig:
    gamma: float = 0.9
    b: float = 1.0
    backup: BackupOperator = field(default_factory=Max)
    learning_rate: float | None = None  # None: 0.01 for the MLP, 0.001 for the GP
    max_iter: int = 1000
    convergence_tol: float = 1e-6
    early_stop_window: int = 0
    motion_model: MotionModel = MotionModel.Q_BASED
    # "gd" is plain gradient ascent; "momentum" and "adam" are opt-in
    optimizer: str = "gd"
    momentum: float = 0.9
    # ascend the mean log-likelihood per observed step instead of the sum
    per_step: bool = True
    holdout_fraction: float = 0.2
    standardize: bool = True
    hidden: tuple[int, ...] | None = None  # None: three hidden layers of width d
    # False keeps the reward model's literal exp(Q - V), a distribution only under log-sum-exp
    normalize_reward_model: bool = True
    n_support: int = 64
    init_length_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "motion_model", MotionModel(self.motion_model))
        if isinstance(self.backup, (dict, str)):
            object.__setattr__(self, "backup", backup_from_config(self.backup))
        if self.hidden is not None:
            object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not np.isfinite(self.b):
            raise ValueError("b must be finite")
        if (self.learning_rate is not None and not self.learning_rate > 0) or not self.convergence_tol > 0:
            raise ValueError("learning_rate and convergence_tol must be positive")
        if self.max_iter < 0 or self.early_stop_window < 0:
            raise ValueError("max_iter and early_stop_window must be >= 0")
        if self.optimizer not in ("gd", "momentum", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must lie in (0, 1)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["backup"] = backup_to_config(self.backup)
        d["motion_model"] = self.motion_model.value
        d["hidden"] = list(self.hidden) if self.hidden is not None else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FairlConfig":
        return cls(**d)


@dataclass
class TrainReport:
    loglik_history: list[float] = field(default_factory=list)
    grad_norm_history: list[float] = field(default_factory=list)
    seconds_history: list[float] = field(default_factory=list)
    iterations_run: int = 0
    converged: bool = False
    final_grad_norm: float = float("nan")
    best_iteration: int | None = None


# ---------------------------------------------------------------------------
# constructions


def q_from_vr(mdp: Mdp, f) -> np.ndarray:
    return mdp.expect(np.asarray(f, dtype=np.float64))


def v_from_vr(mdp: Mdp, f, op: BackupOperator) -> np.ndarray:
    return op.value(q_from_vr(mdp, f))


def r_from_vr(mdp: Mdp, f, op: BackupOperator, gamma: float) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    return f - gamma * v_from_vr(mdp, f, op)


def construct(mdp: Mdp, f, op: BackupOperator, gamma: float):
    """``(r, V, Q)`` from VR values in one pass."""
    f = np.asarray(f, dtype=np.float64)
    Q = mdp.expect(f)
    V = op.value(Q)
    return f - gamma * V, V, Q


# ---------------------------------------------------------------------------
# motion models


def _log_softmax(z):
    m = z.max(axis=-1, keepdims=True)
    return z - m - np.log(np.exp(z - m).sum(axis=-1, keepdims=True))


def _successor_terms(mdp: Mdp, V):
    """``log sum_k P(k|s,a) exp(-V(k))`` and the matching successor weights."""
    u = np.where(mdp.probs > 0, -V[mdp.next_states], -np.inf)
    m = u.max(axis=-1, keepdims=True)
    w = mdp.probs * np.exp(u - m)
    z = w.sum(axis=-1, keepdims=True)
    return (m + np.log(z))[..., 0], w / z


def action_log_probs(kind, mdp: Mdp, f, op: BackupOperator, b: float, normalize: bool = True) -> np.ndarray:
    """``log p(a|s)`` for every state-action under a motion model.

    * ``q``: Boltzmann in ``b Q``.
    * ``reward``: ``Q(s,a) - V(s)`` renormalized over actions. The correction
      term vanishes for log-sum-exp; for other backups it is what keeps the
      model a distribution (without it the likelihood is maximized by
      flattening ``Q``). Once normalized, ``V`` cancels and the model equals
      ``q`` at ``b = 1``. ``normalize=False`` returns the literal ``Q - V``.
    * ``value``: ``p(a|s)`` proportional to ``sum_k P(k|s,a) exp(-V(k))``,
      i.e. actions compete through the value of where they lead, with ``V``
      read as a cost.
    """
    kind = MotionModel(kind)
    Q = q_from_vr(mdp, f)
    if kind is MotionModel.Q_BASED:
        return _log_softmax(b * Q)
    V = op.value(Q)
    if kind is MotionModel.REWARD_BASED:
        return _log_softmax(Q - V[:, None]) if normalize else Q - V[:, None]
    logz, _ = _successor_terms(mdp, V)
    return _log_softmax(logz)


def action_log_prob(
    kind, mdp: Mdp, f, op: BackupOperator, b: float, s: int, a: int, normalize: bool = True
) -> float:
    return float(action_log_probs(kind, mdp, f, op, b, normalize)[s, a])


def log_likelihood(trajectories: Sequence[Trajectory], Q, b: float) -> float:
    """Boltzmann log-likelihood of all observed steps given ``Q``."""
    Q = np.asarray(Q, dtype=np.float64)
    counts = visit_counts(trajectories, *Q.shape)
    return float(np.sum(counts * _log_softmax(b * Q)))


def vr_objective(counts, mdp: Mdp, f, config: FairlConfig) -> tuple[float, np.ndarray]:
    """Log-likelihood of visit ``counts`` and its gradient w.r.t. ``f``.

    Observations are batched by unique state-action; ``counts[s, a]`` is the
    number of times ``a`` was seen in ``s``.
    """
    f = np.asarray(f, dtype=np.float64)
    op = config.backup
    Q = mdp.expect(f)
    n_s = counts.sum(axis=1, keepdims=True)
    kind = config.motion_model

    if kind is MotionModel.Q_BASED:
        logp = _log_softmax(config.b * Q)
        dQ = config.b * (counts - n_s * np.exp(logp))
    elif kind is MotionModel.REWARD_BASED and config.normalize_reward_model:
        logp = _log_softmax(Q - op.value(Q)[:, None])
        dQ = counts - n_s * np.exp(logp)
    elif kind is MotionModel.REWARD_BASED:
        logp = Q - op.value(Q)[:, None]
        dQ = counts - n_s * op.gradient(Q)
    else:
        V = op.value(Q)
        logz, rho = _successor_terms(mdp, V)
        logp = _log_softmax(logz)
        W = (n_s * np.exp(logp) - counts)[..., None] * rho
        dV = np.bincount(mdp.next_states.ravel(), weights=W.ravel(), minlength=mdp.n_states)
        dQ = dV[:, None] * op.gradient(Q)

    L = float(np.sum(counts * logp))
    return L, mdp.expect_adjoint(dQ)


def motion_log_likelihood(trajectories, mdp: Mdp, f, config: FairlConfig) -> float:
    counts = visit_counts(trajectories, mdp.n_states, mdp.n_actions)
    return vr_objective(counts, mdp, f, config)[0]


@singledispatch
def loglik_gradient(params, trajectories, mdp: Mdp, features, config: FairlConfig):
    """Gradient of the motion-model log-likelihood w.r.t. the model parameters.

    Dispatches on the parameter type; the result has the same layout as the
    parameters (``MlpParams``) or is a ``GpGradient``.
    """
    raise TypeError(f"no VR model registered for {type(params).__name__}")


@loglik_gradient.register
def _(params: MlpParams, trajectories, mdp, features, config):
    f = mlp_forward_batch(params, features)
    counts = visit_counts(trajectories, mdp.n_states, mdp.n_actions)
    _, gf = vr_objective(counts, mdp, f, config)
    return mlp_vjp(params, features, gf)


@loglik_gradient.register
def _(params: GpParams, trajectories, mdp, features, config):
    f = gp_mean_all(params, features)
    counts = visit_counts(trajectories, mdp.n_states, mdp.n_actions)
    _, gf = vr_objective(counts, mdp, f, config)
    return gp_mean_vjp(params, features, gf)


# ---------------------------------------------------------------------------
# training


def _split(trajectories, config: FairlConfig, seed: int):
    if config.early_stop_window == 0:
        return list(trajectories), []
    if len(trajectories) < 2:
        raise ValueError("early stopping needs at least two trajectories")
    order = np.random.default_rng(seed).permutation(len(trajectories))
    n_hold = max(1, int(round(config.holdout_fraction * len(trajectories))))
    n_hold = min(n_hold, len(trajectories) - 1)
    hold = [trajectories[i] for i in sorted(order[:n_hold])]
    train = [trajectories[i] for i in sorted(order[n_hold:])]
    return train, hold


NN_LEARNING_RATE = 0.01
GP_LEARNING_RATE = 0.001


def _ascend(theta, objective, config: FairlConfig, lr: float, holdout: Callable | None = None):
    report = TrainReport()
    velocity = np.zeros_like(theta)
    m1 = np.zeros_like(theta)
    m2 = np.zeros_like(theta)
    best_score, best_theta = -np.inf, theta
    start = time.perf_counter()
    prev = None

    for it in range(config.max_iter):
        L, g = objective(theta)
        if not np.isfinite(L) or not np.all(np.isfinite(g)):
            raise TrainingDivergedError(it, L)
        report.loglik_history.append(L)
        report.final_grad_norm = float(np.linalg.norm(g))
        report.grad_norm_history.append(report.final_grad_norm)
        report.seconds_history.append(time.perf_counter() - start)
        report.iterations_run = it + 1

        if holdout is not None:
            score = holdout(theta)
            if score > best_score:
                best_score, best_theta, report.best_iteration = score, theta.copy(), it
            elif it - report.best_iteration >= config.early_stop_window:
                break
        if prev is not None and abs(L - prev) < config.convergence_tol:
            report.converged = True
            break
        prev = L

        if config.optimizer == "gd":
            theta = theta + lr * g
        elif config.optimizer == "momentum":
            velocity = config.momentum * velocity + g
            theta = theta + lr * velocity
        else:
            m1 = 0.9 * m1 + 0.1 * g
            m2 = 0.999 * m2 + 0.001 * g * g
            t = it + 1
            theta = theta + lr * (m1 / (1 - 0.9**t)) / (np.sqrt(m2 / (1 - 0.999**t)) + 1e-8)

    if holdout is not None and report.best_iteration is not None:
        theta = best_theta
    return theta, report


def _standardizer(features, enabled: bool):
    features = np.asarray(features, dtype=np.float64)
    if not enabled:
        return features, np.zeros(features.shape[1]), np.ones(features.shape[1])
    mean = features.mean(axis=0)
    scale = features.std(axis=0)
    scale[scale == 0] = 1.0
    return (features - mean) / scale, mean, scale


def _objective_fn(counts, mdp, config, total):
    norm = total if config.per_step and total > 0 else 1.0

    def irl(f):
        L, gf = vr_objective(counts, mdp, f, config)
        return L / norm, gf / norm

    return irl


def train_nn(env: EnvBundle, trajectories, config: FairlConfig, seed: int = 0):
    """Fit an MLP VR function by gradient ascent on the motion-model likelihood.

    Returns ``(params, r, V, Q, report)``; ``params`` act on the raw features
    of ``env`` (any standardization is folded into the first layer).
    """
    mdp = env.mdp
    X, mean, scale = _standardizer(env.features, config.standardize)
    d = X.shape[1]
    hidden = config.hidden if config.hidden is not None else (d, d, d)
    params0 = init_mlp([d, *hidden, 1], seed)

    train, hold = _split(trajectories, config, seed)
    counts = visit_counts(train, mdp.n_states, mdp.n_actions)
    irl = _objective_fn(counts, mdp, config, counts.sum())

    def objective(theta):
        p = params0.from_flat(theta)
        L, gf = irl(mlp_forward_batch(p, X))
        return L, mlp_vjp(p, X, gf).flat()

    holdout = None
    if hold:
        hcounts = visit_counts(hold, mdp.n_states, mdp.n_actions)

        def holdout(theta):
            return vr_objective(hcounts, mdp, mlp_forward_batch(params0.from_flat(theta), X), config)[0]

    lr = config.learning_rate or NN_LEARNING_RATE
    theta, report = _ascend(params0.flat(), objective, config, lr, holdout)
    params = params0.from_flat(theta)

    # fold (x - mean) / scale into the first layer
    w0 = params.weights[0] / scale[:, None]
    params.biases[0] = params.biases[0] - mean @ w0
    params.weights[0] = w0
    r, V, Q = construct(mdp, mlp_forward_batch(params, env.features), config.backup, config.gamma)
    return params, r, V, Q, report


def train_gp(env: EnvBundle, trajectories, config: FairlConfig, seed: int = 0, hyperprior=None):
    """Fit a sparse-GP VR function; ascends IRL term + GP prior jointly.

    Kernel parameters are optimized through their logarithms. ``hyperprior``,
    if given, maps ``GpParams`` to ``(log_density, d_lam, d_beta)``; the
    default is a flat prior that contributes nothing.
    """
    mdp = env.mdp
    X, _, scale = _standardizer(env.features, config.standardize)
    d = X.shape[1]
    p0 = init_gp(X, config.n_support, seed, length_scale=config.init_length_scale)
    n_u = p0.supporting_states.size

    train, hold = _split(trajectories, config, seed)
    counts = visit_counts(train, mdp.n_states, mdp.n_actions)
    total = counts.sum()
    irl = _objective_fn(counts, mdp, config, total)
    norm = total if config.per_step and total > 0 else 1.0

    def unpack(theta) -> GpParams:
        return replace(
            p0,
            length_scales=np.exp(theta[:d]),
            signal_variance=float(np.exp(theta[d])),
            supporting_values=theta[d + 1 :],
        )

    def objective(theta):
        p = unpack(theta)
        L, gf = irl(gp_mean_all(p, X))
        g_irl = gp_mean_vjp(p, X, gf)
        g_pri = gp_prior_gradient(p, X)
        L += gp_prior_loglik(p, X) / norm
        d_lam = g_irl.length_scales + g_pri.length_scales / norm
        d_beta = g_irl.signal_variance + g_pri.signal_variance / norm
        if hyperprior is not None:
            h, h_lam, h_beta = hyperprior(p)
            L += h / norm
            d_lam = d_lam + np.asarray(h_lam) / norm
            d_beta = d_beta + h_beta / norm
        grad = np.concatenate(
            [
                d_lam * p.length_scales,
                [d_beta * p.signal_variance],
                g_irl.supporting_values + g_pri.supporting_values / norm,
            ]
        )
        return L, grad

    holdout = None
    if hold:
        hcounts = visit_counts(hold, mdp.n_states, mdp.n_actions)

        def holdout(theta):
            return vr_objective(hcounts, mdp, gp_mean_all(unpack(theta), X), config)[0]

    theta0 = np.concatenate([np.log(p0.length_scales), [np.log(p0.signal_variance)], np.zeros(n_u)])
    lr = config.learning_rate or GP_LEARNING_RATE
    theta, report = _ascend(theta0, objective, config, lr, holdout)
    fitted = unpack(theta)
    # kernel is shift invariant; rescaling the inputs only rescales lam
    params = replace(fitted, length_scales=fitted.length_scales / scale**2)
    r, V, Q = construct(mdp, gp_mean_all(params, env.features), config.backup, config.gamma)
    return params, r, V, Q, report
