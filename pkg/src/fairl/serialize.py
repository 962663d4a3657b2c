"""JSON/CSV formats for environments, rewards and training checkpoints.

All JSON is written with sorted keys and a fixed indent so identical inputs
give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .cop import CopConfig, cop_generate
from .gp import GpParams
from .learner import FairlConfig, TrainReport
from .mlp import MlpParams
from .objectworld import EnvBundle, ObjectworldConfig, generate

CHECKPOINT_KIND = "fairl-checkpoint"
ITERATION_HEADER = ("iteration", "loglik", "grad_norm", "seconds")


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(obj, path) -> None:
    Path(path).write_text(dumps(obj))


def read_json(path):
    return json.loads(Path(path).read_text())


def env_to_dict(bundle: EnvBundle) -> dict:
    return {
        "metadata": bundle.metadata,
        "n_states": bundle.mdp.n_states,
        "n_actions": bundle.mdp.n_actions,
        "gamma": bundle.mdp.gamma,
        "features": bundle.features.tolist(),
        "true_reward": bundle.true_reward.tolist(),
    }


def env_from_dict(d: dict) -> EnvBundle:
    """Rebuild an environment from its stored generator config.

    The stored features and rewards are checked against the regenerated ones.
    """
    meta = d["metadata"]
    if meta["kind"] == "objectworld":
        bundle = generate(ObjectworldConfig(**meta["config"]))
    elif meta["kind"] == "cop":
        bundle = cop_generate(CopConfig(**meta["config"]))[0]
    else:
        raise ValueError(f"unknown environment kind {meta['kind']!r}")
    if not (
        np.array_equal(bundle.features, np.asarray(d["features"]))
        and np.array_equal(bundle.true_reward, np.asarray(d["true_reward"]))
    ):
        raise ValueError("stored environment does not match its generator config")
    return bundle


def reward_from_json(obj) -> np.ndarray:
    """Accept a bare list, ``{"reward": [...]}`` or an environment file."""
    if isinstance(obj, dict):
        for key in ("reward", "true_reward"):
            if key in obj:
                return np.asarray(obj[key], dtype=np.float64)
        raise ValueError("JSON object has no 'reward' or 'true_reward' entry")
    return np.asarray(obj, dtype=np.float64)


def checkpoint_to_dict(params, config: FairlConfig, report: TrainReport, seed: int) -> dict:
    if isinstance(params, MlpParams):
        approximator = "nn"
    elif isinstance(params, GpParams):
        approximator = "gp"
    else:
        raise TypeError(f"cannot checkpoint {type(params).__name__}")
    return {
        "kind": CHECKPOINT_KIND,
        "approximator": approximator,
        "config": config.to_dict(),
        "params": params.to_dict(),
        "iterations": report.iterations_run,
        "converged": report.converged,
        "loglik_history": report.loglik_history,
        "seed": seed,
    }


def checkpoint_from_dict(d: dict):
    """``(params, config, loglik_history)`` from a checkpoint dict."""
    if d.get("kind") != CHECKPOINT_KIND:
        raise ValueError("not a checkpoint")
    params = (MlpParams if d["approximator"] == "nn" else GpParams).from_dict(d["params"])
    return params, FairlConfig.from_dict(d["config"]), list(d["loglik_history"])


def iteration_csv(report: TrainReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ITERATION_HEADER)
    for i, (L, g, t) in enumerate(zip(report.loglik_history, report.grad_norm_history, report.seconds_history)):
        w.writerow([i, L, g, t])
    return buf.getvalue()
