"""Discrete MDPs with sparse transitions, exact value iteration and sampling.

Rewards live on successor states throughout the package:

    Q(s, a) = sum_{s'} P(s' | s, a) [r(s') + gamma V(s')]
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

PROB_TOL = 1e-12


class InvalidMdpError(ValueError):
    """Raised when a transition model violates the MDP invariants."""


class ConvergenceWarning(UserWarning):
    """Value iteration stopped at ``max_iter`` before reaching ``tol``."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class Mdp:
    """Finite MDP with a padded sparse transition table.

    ``next_states[s, a, k]`` is the k-th successor of ``(s, a)`` and
    ``probs[s, a, k]`` its probability. Rows shorter than the widest one are
    padded with probability 0 and a copy of the first successor index, so the
    padding is harmless to both expectations and sampling.
    """

    def __init__(self, next_states, probs, gamma: float):
        next_states = np.asarray(next_states, dtype=np.int64)
        probs = np.asarray(probs, dtype=np.float64)
        if next_states.ndim != 3 or next_states.shape != probs.shape:
            raise InvalidMdpError(
                f"next_states {next_states.shape} and probs {probs.shape} must "
                "share one (n_states, n_actions, max_successors) shape"
            )
        n_states, n_actions, width = next_states.shape
        if n_states < 1 or n_actions < 1 or width < 1:
            raise InvalidMdpError("need at least one state, action and successor")
        if not 0.0 <= gamma < 1.0:
            raise InvalidMdpError(f"gamma must lie in [0, 1), got {gamma}")
        if next_states.min() < 0 or next_states.max() >= n_states:
            raise InvalidMdpError("successor index out of range")
        if not np.all(np.isfinite(probs)) or probs.min() < 0.0:
            raise InvalidMdpError("transition probabilities must be finite and >= 0")
        err = np.abs(probs.sum(axis=-1) - 1.0)
        if err.max() > PROB_TOL:
            s, a = np.unravel_index(int(err.argmax()), err.shape)
            raise InvalidMdpError(
                f"probabilities of (s={s}, a={a}) sum to {probs[s, a].sum()!r}"
            )
        self.next_states = next_states
        self.probs = probs
        self.gamma = float(gamma)
        self.next_states.setflags(write=False)
        self.probs.setflags(write=False)

    @classmethod
    def from_transitions(cls, n_states: int, n_actions: int, transitions, gamma: float) -> "Mdp":
        """Build from ``transitions[s][a] = [(next_state, prob), ...]``."""
        if len(transitions) != n_states or any(len(row) != n_actions for row in transitions):
            raise InvalidMdpError("transitions must be indexed [state][action]")
        width = max(len(pairs) for row in transitions for pairs in row)
        if width == 0:
            raise InvalidMdpError("every (state, action) needs a successor")
        nxt = np.zeros((n_states, n_actions, width), dtype=np.int64)
        prb = np.zeros((n_states, n_actions, width))
        for s, row in enumerate(transitions):
            for a, pairs in enumerate(row):
                if not pairs:
                    raise InvalidMdpError(f"(s={s}, a={a}) has no successor")
                for k, (sp, p) in enumerate(pairs):
                    nxt[s, a, k] = sp
                    prb[s, a, k] = p
                nxt[s, a, len(pairs):] = pairs[0][0]
        return cls(nxt, prb, gamma)

    @classmethod
    def from_dense(cls, P, gamma: float) -> "Mdp":
        """Build from a dense ``(n_states, n_actions, n_states)`` array."""
        P = np.asarray(P, dtype=np.float64)
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise InvalidMdpError(f"dense model must be (S, A, S), got {P.shape}")
        n_states, n_actions, _ = P.shape
        transitions = [
            [[(int(sp), P[s, a, sp]) for sp in np.flatnonzero(P[s, a])] for a in range(n_actions)]
            for s in range(n_states)
        ]
        return cls.from_transitions(n_states, n_actions, transitions, gamma)

    @property
    def n_states(self) -> int:
        return self.next_states.shape[0]

    @property
    def n_actions(self) -> int:
        return self.next_states.shape[1]

    def transitions(self, state: int, action: int) -> list[tuple[int, float]]:
        """Nonzero ``(next_state, prob)`` pairs of one state-action."""
        nxt = self.next_states[state, action]
        prb = self.probs[state, action]
        return [(int(s), float(p)) for s, p in zip(nxt, prb) if p > 0.0]

    def dense(self) -> np.ndarray:
        P = np.zeros((self.n_states, self.n_actions, self.n_states))
        s_idx, a_idx = np.indices(self.next_states.shape[:2])
        for k in range(self.next_states.shape[2]):
            np.add.at(P, (s_idx, a_idx, self.next_states[..., k]), self.probs[..., k])
        return P

    def expect(self, values: np.ndarray) -> np.ndarray:
        """``E[values(s') | s, a]`` as an ``(n_states, n_actions)`` table."""
        return np.einsum("sak,sak->sa", self.probs, np.asarray(values)[self.next_states])

    def expect_adjoint(self, weights: np.ndarray) -> np.ndarray:
        """Transpose of :meth:`expect`: ``sum_{s,a} weights[s,a] P(.|s,a)``."""
        contrib = self.probs * np.asarray(weights)[..., None]
        return np.bincount(
            self.next_states.ravel(), weights=contrib.ravel(), minlength=self.n_states
        )


@dataclass(frozen=True)
class Trajectory:
    """An observed sequence of ``(state, action)`` pairs."""

    states: np.ndarray
    actions: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.int64)
        actions = np.asarray(self.actions, dtype=np.int64)
        if states.ndim != 1 or states.shape != actions.shape:
            raise ValueError("states and actions must be equal-length 1-D sequences")
        if len(states) < 1:
            raise ValueError("a trajectory needs at least one step")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "actions", actions)

    @classmethod
    def from_pairs(cls, steps: Sequence[tuple[int, int]]) -> "Trajectory":
        arr = np.asarray(steps, dtype=np.int64).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return zip(self.states.tolist(), self.actions.tolist())

    @property
    def steps(self) -> list[tuple[int, int]]:
        return list(self)

    def check(self, n_states: int, n_actions: int) -> None:
        if self.states.min() < 0 or self.states.max() >= n_states:
            raise ValueError("trajectory visits a state outside the MDP")
        if self.actions.min() < 0 or self.actions.max() >= n_actions:
            raise ValueError("trajectory uses an action outside the MDP")


def visit_counts(trajectories: Sequence[Trajectory], n_states: int, n_actions: int) -> np.ndarray:
    """Number of times each ``(s, a)`` was observed, pooled over trajectories."""
    counts = np.zeros(n_states * n_actions)
    for traj in trajectories:
        traj.check(n_states, n_actions)
        counts += np.bincount(traj.states * n_actions + traj.actions, minlength=n_states * n_actions)
    return counts.reshape(n_states, n_actions)


def value_iteration(
    mdp: Mdp, reward, tol: float = 1e-8, max_iter: int = 10_000
) -> tuple[np.ndarray, np.ndarray]:
    """Solve the Bellman optimality equation for a state reward.

    Iterates ``V <- max_a P (r + gamma V)`` until the sup-norm change drops
    below ``tol``. If ``max_iter`` sweeps are not enough a
    :class:`ConvergenceWarning` carrying the last residual is emitted and the
    current iterate is returned.

    Returns:
        ``(V, Q)`` with ``V = Q.max(axis=1)``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    reward = np.asarray(reward, dtype=np.float64)
    if reward.shape != (mdp.n_states,) or not np.all(np.isfinite(reward)):
        raise ValueError(f"reward must be a finite vector of length {mdp.n_states}")

    V = np.zeros(mdp.n_states)
    residual = np.inf
    for it in range(1, max_iter + 1):
        Q = mdp.expect(reward + mdp.gamma * V)
        V_new = Q.max(axis=1)
        residual = float(np.max(np.abs(V_new - V)))
        V = V_new
        if residual < tol:
            break
    else:
        warnings.warn(
            ConvergenceWarning(
                f"value iteration stopped after {max_iter} sweeps, residual {residual:.3e}",
                residual,
                max_iter,
            ),
            stacklevel=2,
        )
    return V, Q


def greedy_policy(Q) -> np.ndarray:
    """Per-state argmax action; ties go to the lowest action index."""
    return np.argmax(np.asarray(Q), axis=-1)


def boltzmann_distribution(q_row, b: float) -> np.ndarray:
    """``softmax(b * q)`` along the last axis, with max subtraction."""
    z = b * np.asarray(q_row, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _draw(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    # index of the first cdf entry exceeding u; clamped against rounding at 1
    idx = (cdf <= u[:, None]).sum(axis=1)
    return np.minimum(idx, cdf.shape[1] - 1)


def sample_trajectories(
    mdp: Mdp,
    Q,
    b: float,
    count: int,
    horizon: int,
    seed: int,
    start_states=None,
) -> list[Trajectory]:
    """Roll out a Boltzmann policy ``P(a|s) ~ exp(b Q(s,a))``.

    Start states are uniform over the state space unless ``start_states``
    (length ``count``) is given. All trajectories advance in lockstep, so the
    cost is ``horizon`` vectorized steps.
    """
    if count < 1 or horizon < 1:
        raise ValueError("count and horizon must be >= 1")
    rng = np.random.default_rng(seed)
    policy_cdf = np.cumsum(boltzmann_distribution(Q, b), axis=1)
    succ_cdf = np.cumsum(mdp.probs, axis=2)

    if start_states is None:
        state = rng.integers(mdp.n_states, size=count)
    else:
        state = np.asarray(start_states, dtype=np.int64)
        if state.shape != (count,):
            raise ValueError("start_states must have length count")
    states = np.empty((count, horizon), dtype=np.int64)
    actions = np.empty((count, horizon), dtype=np.int64)
    for t in range(horizon):
        act = _draw(policy_cdf[state], rng.random(count))
        k = _draw(succ_cdf[state, act], rng.random(count))
        states[:, t] = state
        actions[:, t] = act
        state = mdp.next_states[state, act, k]
    return [Trajectory(states[i], actions[i]) for i in range(count)]


def pearson_correlation(x, y, return_flag: bool = False):
    """Pearson correlation of two equal-length vectors.

    A zero-variance input gives 0.0. With ``return_flag=True`` the result is
    ``(value, degenerate)`` so callers can tell that case apart.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise ValueError("need at least two points")
    degenerate = bool(np.ptp(x) == 0.0 or np.ptp(y) == 0.0)
    if degenerate:
        value = 0.0
    else:
        xc = x - x.mean()
        yc = y - y.mean()
        value = float(np.dot(xc, yc) / np.sqrt(np.dot(xc, xc) * np.dot(yc, yc)))
        value = min(1.0, max(-1.0, value))
    return (value, degenerate) if return_flag else value
