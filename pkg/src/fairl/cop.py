"""Synthetic center-of-pressure (COP) instruction-following benchmark.

A state is a grid position together with one of eight velocity directions:
``s = (x + y * grid_g) * 8 + v``. Action ``a`` sets the velocity to direction
``a`` and moves one cell along it, clamped at the border, so every transition
is deterministic.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .mdp import Mdp
from .objectworld import EnvBundle

# direction k points at angle 45 * k degrees; +y is "forward"
STEPS = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))
DIRECTION_NAMES = (
    "right",
    "top right",
    "forward",
    "top left",
    "left",
    "bottom left",
    "backward",
    "bottom right",
)
N_VELOCITIES = 8
ORIGIN = 8  # instruction index meaning "head back to the grid center"
INSTRUCTION_NAMES = DIRECTION_NAMES + ("origin",)
UNIT = np.array(STEPS, dtype=np.float64) / np.linalg.norm(STEPS, axis=1)[:, None]
CARDINAL = (0, 2, 4, 6)


@dataclass(frozen=True)
class CopConfig:
    grid_g: int = 10
    n_directions: int = 8
    seed: int = 0
    gamma: float = 0.9
    n_segments: int = 18

    def __post_init__(self):
        if self.grid_g < 1:
            raise ValueError("grid_g must be positive")
        if self.n_directions not in (4, 8):
            raise ValueError("n_directions must be 4 or 8")
        if self.n_segments < 1:
            raise ValueError("n_segments must be positive")


def decode(state: int | np.ndarray, grid_g: int):
    """``(x, y, velocity)`` of a state index."""
    cell, v = np.divmod(state, N_VELOCITIES)
    return cell % grid_g, cell // grid_g, v


def cop_mdp(grid_g: int, gamma: float) -> Mdp:
    n_states = grid_g * grid_g * N_VELOCITIES
    x, y, _ = decode(np.arange(n_states), grid_g)
    nxt = np.empty((n_states, N_VELOCITIES, 1), dtype=np.int64)
    for a, (dx, dy) in enumerate(STEPS):
        nx = np.clip(x + dx, 0, grid_g - 1)
        ny = np.clip(y + dy, 0, grid_g - 1)
        nxt[:, a, 0] = (nx + ny * grid_g) * N_VELOCITIES + a
    return Mdp(nxt, np.ones(nxt.shape), gamma)


def cop_features(grid_g: int) -> np.ndarray:
    """Normalized position and velocity unit vector per state."""
    n_states = grid_g * grid_g * N_VELOCITIES
    x, y, v = decode(np.arange(n_states), grid_g)
    scale = max(grid_g - 1, 1)
    return np.column_stack([x / scale, y / scale, UNIT[v, 0], UNIT[v, 1]])


def _origin_direction(x, y, grid_g):
    c = (grid_g - 1) / 2.0
    d = np.stack([c - np.asarray(x, float), c - np.asarray(y, float)], axis=-1)
    n = np.linalg.norm(d, axis=-1, keepdims=True)
    return np.divide(d, n, out=np.zeros_like(d), where=n > 0)


def ideal_reward(state: int, instructed_direction: int, grid_g: int) -> float:
    """Cosine between the state's velocity and the instructed direction.

    ``instructed_direction`` is a direction index 0..7, or :data:`ORIGIN`, in
    which case the target is the unit vector toward the grid center (0 at the
    center itself).
    """
    x, y, v = decode(state, grid_g)
    if instructed_direction == ORIGIN:
        target = _origin_direction(x, y, grid_g)
    elif 0 <= instructed_direction < N_VELOCITIES:
        target = UNIT[instructed_direction]
    else:
        raise ValueError(f"unknown instruction {instructed_direction}")
    return float(np.clip(UNIT[v] @ target, -1.0, 1.0))


def ideal_reward_vector(instruction: int, grid_g: int) -> np.ndarray:
    n_states = grid_g * grid_g * N_VELOCITIES
    x, y, v = decode(np.arange(n_states), grid_g)
    if instruction == ORIGIN:
        target = _origin_direction(x, y, grid_g)
    else:
        target = np.broadcast_to(UNIT[instruction], (n_states, 2))
    return np.clip(np.einsum("ij,ij->i", UNIT[v], target), -1.0, 1.0)


def instruction_schedule(config: CopConfig) -> list[int]:
    """Seeded order of instructions, one per segment.

    Every instruction (directions plus origin) appears before any repeats.
    """
    rng = np.random.default_rng(config.seed)
    pool = list(range(N_VELOCITIES) if config.n_directions == 8 else CARDINAL) + [ORIGIN]
    schedule: list[int] = []
    while len(schedule) < config.n_segments:
        schedule.extend(int(i) for i in rng.permutation(pool))
    return schedule[: config.n_segments]


def cop_generate(config: CopConfig) -> tuple[EnvBundle, list[int]]:
    """Build the COP MDP and its instruction schedule.

    ``true_reward`` of the bundle is the ideal reward averaged over the
    schedule's segments; the per-instruction ideal rewards are what scoring
    uses.
    """
    schedule = instruction_schedule(config)
    ideal = np.stack([ideal_reward_vector(i, config.grid_g) for i in schedule])
    bundle = EnvBundle(
        mdp=cop_mdp(config.grid_g, config.gamma),
        features=cop_features(config.grid_g),
        true_reward=ideal.mean(axis=0),
        metadata={
            "kind": "cop",
            "config": asdict(config),
            "schedule": schedule,
            "instruction_names": [INSTRUCTION_NAMES[i] for i in schedule],
        },
    )
    return bundle, schedule
