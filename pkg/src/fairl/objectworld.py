"""Objectworld benchmark: a grid with colored objects and a nonlinear reward.

States are cells ``s = x + y * grid_n``. Actions are right, up, left, down
and stay; moves off the grid leave the agent in place. Outer color 0 plays
the role of C1 and outer color 1 of C2 in the reward rule.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .mdp import Mdp

MOVES = ((1, 0), (0, 1), (-1, 0), (0, -1), (0, 0))
C1, C2 = 0, 1
C1_RADIUS, C2_RADIUS = 3, 2


@dataclass(frozen=True)
class ObjectworldConfig:
    grid_n: int = 5
    n_objects: int = 2
    n_colors: int = 2
    seed: int = 0
    wind: float = 0.0
    gamma: float = 0.9

    def __post_init__(self):
        if self.grid_n < 1:
            raise ValueError("grid_n must be positive")
        if not 1 <= self.n_objects <= self.grid_n**2:
            raise ValueError("n_objects must be in [1, grid_n**2]")
        if self.n_colors < 2:
            raise ValueError("n_colors must be >= 2 so that C1 and C2 exist")
        if not 0.0 <= self.wind < 1.0:
            raise ValueError("wind must lie in [0, 1)")


@dataclass(frozen=True)
class PlacedObject:
    x: int
    y: int
    inner_color: int
    outer_color: int


@dataclass
class EnvBundle:
    """Everything an experiment consumes about one environment instance."""

    mdp: Mdp
    features: np.ndarray
    true_reward: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.true_reward = np.asarray(self.true_reward, dtype=np.float64)
        if self.features.shape[0] != self.mdp.n_states:
            raise ValueError("one feature row per state required")
        if self.true_reward.shape != (self.mdp.n_states,):
            raise ValueError("true_reward must have length n_states")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features must be finite")


def _cell(state: int, grid_n: int) -> tuple[int, int]:
    return state % grid_n, state // grid_n


def _chebyshev(state: int, obj: PlacedObject, grid_n: int) -> int:
    x, y = _cell(state, grid_n)
    return max(abs(x - obj.x), abs(y - obj.y))


def true_reward_at(state: int, objects, grid_n: int) -> float:
    """+1 near both C1 (<=3) and C2 (<=2), -1 near C1 only, else 0."""
    near_c1 = any(_chebyshev(state, o, grid_n) <= C1_RADIUS for o in objects if o.outer_color == C1)
    if not near_c1:
        return 0.0
    near_c2 = any(_chebyshev(state, o, grid_n) <= C2_RADIUS for o in objects if o.outer_color == C2)
    return 1.0 if near_c2 else -1.0


def state_features(state: int, objects, n_colors: int, grid_n: int) -> np.ndarray:
    """Chebyshev distance to the nearest object of each inner, then outer, color.

    A color with no object on the map saturates at ``grid_n``.
    """
    feat = np.full(2 * n_colors, float(grid_n))
    for o in objects:
        d = _chebyshev(state, o, grid_n)
        feat[o.inner_color] = min(feat[o.inner_color], d)
        feat[n_colors + o.outer_color] = min(feat[n_colors + o.outer_color], d)
    return feat


def grid_mdp(grid_n: int, wind: float, gamma: float) -> Mdp:
    """Five-action grid; with prob ``wind`` the move is replaced by a uniform one."""
    n_states = grid_n * grid_n
    n_moves = len(MOVES)
    xs, ys = np.arange(n_states) % grid_n, np.arange(n_states) // grid_n
    dest = np.empty((n_states, n_moves), dtype=np.int64)
    for m, (dx, dy) in enumerate(MOVES):
        nx = np.clip(xs + dx, 0, grid_n - 1)
        ny = np.clip(ys + dy, 0, grid_n - 1)
        dest[:, m] = nx + ny * grid_n

    if wind == 0.0:
        return Mdp(dest[:, :, None], np.ones((n_states, n_moves, 1)), gamma)

    # merge duplicate destinations (clamped moves) so rows stay sparse
    transitions = []
    for s in range(n_states):
        row = []
        for a in range(n_moves):
            mass: dict[int, float] = {}
            for m in range(n_moves):
                p = wind / n_moves + (1.0 - wind if m == a else 0.0)
                mass[int(dest[s, m])] = mass.get(int(dest[s, m]), 0.0) + p
            row.append(sorted(mass.items()))
        transitions.append(row)
    return Mdp.from_transitions(n_states, n_moves, transitions, gamma)


def place_objects(config: ObjectworldConfig, rng: np.random.Generator) -> list[PlacedObject]:
    cells = rng.choice(config.grid_n**2, size=config.n_objects, replace=False)
    inner = rng.integers(config.n_colors, size=config.n_objects)
    outer = rng.integers(config.n_colors, size=config.n_objects)
    # the first two objects carry C1 and C2 so the reward is never identically zero
    outer[: min(2, config.n_objects)] = [C1, C2][: min(2, config.n_objects)]
    return [
        PlacedObject(int(c % config.grid_n), int(c // config.grid_n), int(i), int(o))
        for c, i, o in zip(cells, inner, outer)
    ]


MAX_PLACEMENT_DRAWS = 100


def generate(config: ObjectworldConfig) -> EnvBundle:
    """Generate a seeded objectworld instance.

    Placements whose reward is constant over the grid (possible on small
    grids) are redrawn from the same stream, so accuracy scores stay defined.
    """
    rng = np.random.default_rng(config.seed)
    n_states = config.grid_n**2
    for _ in range(MAX_PLACEMENT_DRAWS):
        objects = place_objects(config, rng)
        reward = np.array([true_reward_at(s, objects, config.grid_n) for s in range(n_states)])
        if np.ptp(reward) > 0:
            break
    features = np.stack(
        [state_features(s, objects, config.n_colors, config.grid_n) for s in range(n_states)]
    )
    return EnvBundle(
        mdp=grid_mdp(config.grid_n, config.wind, config.gamma),
        features=features,
        true_reward=reward,
        metadata={"kind": "objectworld", "config": asdict(config), "objects": [asdict(o) for o in objects]},
    )
