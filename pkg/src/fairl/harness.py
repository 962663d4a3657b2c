"""Experiment drivers: accuracy, scalability, operator extension and COP.

Each driver returns a list of :class:`ResultRow`; :func:`write_csv` renders
them with the fixed column order in :data:`CSV_HEADER`.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import statistics
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Iterable

import numpy as np

from . import cop as cop_env
from .backups import backup_from_config, backup_to_config
from .learner import FairlConfig, MotionModel, train_gp, train_nn
from .mdp import Trajectory, pearson_correlation, sample_trajectories, value_iteration
from .objectworld import ObjectworldConfig, generate

log = logging.getLogger(__name__)

CSV_HEADER = ("experiment", "method", "n_states", "n_samples", "metric", "value", "stddev", "seconds", "seed")
TIMING_COLUMNS = ("seconds",)
# metrics whose value is itself a wall-clock measurement
TIMING_METRICS = ("seconds_per_iteration", "seconds_per_epoch", "loglog_slope")
EXPERIMENTS = ("accuracy", "scalability", "extension", "cop")

# seconds per gradient iteration reported for the reference implementation
TABLE1_SECONDS = {
    "FAIRLNN": {25: 0.197, 225: 0.397, 625: 0.724, 1225: 0.921, 2025: 0.776, 3025: 0.762,
                4225: 2.468, 5625: 2.831, 7225: 2.217, 9025: 3.347},
    "FAIRLGP": {25: 0.331, 225: 0.721, 625: 1.317, 1225: 2.163, 2025: 2.332, 3025: 3.723,
                4225: 4.459, 5625: 6.495, 7225: 9.316, 9025: 12.372},
}


@dataclass
class ResultRow:
    experiment: str
    method: str
    n_states: int
    n_samples: int
    metric: str
    value: float
    stddev: float = 0.0
    seconds: float = 0.0
    seed: int = 0

    @property
    def flagged(self) -> bool:
        return "[" in self.metric or not math.isfinite(self.value)


@dataclass
class LearnerSpec:
    label: str
    approximator: str = "nn"  # "nn", "gp" or "random"
    config: dict = field(default_factory=dict)

    def fairl_config(self, **overrides) -> FairlConfig:
        return FairlConfig(**{**self.config, **overrides})


@dataclass
class ExperimentConfig:
    experiment: str
    env: dict = field(default_factory=dict)
    learners: list[LearnerSpec] = field(default_factory=list)
    schedule: list[int] = field(default_factory=list)
    repetitions: int = 1
    seed: int = 0
    horizon: int = 40
    demo_b: float = 1.0
    n_trajectories: int = 64
    operators: list[dict] = field(
        default_factory=lambda: [{"kind": "max"}, {"kind": "logsumexp"}, {"kind": "pnorm", "p": 10.0},
                                 {"kind": "gsoft", "k": 100.0}]
    )
    motion_models: list[str] = field(default_factory=lambda: ["q", "reward"])
    warmup: int = 2
    timed: int = 5
    walkers: int = 20
    segment_length: int = 30
    output: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        self.learners = [l if isinstance(l, LearnerSpec) else LearnerSpec(**l) for l in self.learners]
        if self.experiment in ("accuracy", "scalability") and not self.schedule:
            raise ValueError("schedule must be nonempty")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.timed < 1 or self.warmup < 0:
            raise ValueError("need timed >= 1 and warmup >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        return d


def write_csv(rows: Iterable[ResultRow], stream=None) -> str:
    """Render rows as CSV; also written to ``stream`` when given."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow([getattr(row, name) for name in CSV_HEADER])
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def read_csv(text: str) -> list[ResultRow]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    out = []
    for rec in reader:
        out.append(
            ResultRow(
                rec["experiment"], rec["method"], int(rec["n_states"]), int(rec["n_samples"]),
                rec["metric"], float(rec["value"]), float(rec["stddev"]), float(rec["seconds"]),
                int(rec["seed"]),
            )
        )
    return out


def timing_free(text: str) -> str:
    """CSV text with every wall-clock field blanked, for reproducibility checks."""
    rows = read_csv(text)
    for row in rows:
        for name in TIMING_COLUMNS:
            setattr(row, name, 0.0)
        if row.metric in TIMING_METRICS and not row.method.startswith("reference:"):
            row.value = row.stddev = 0.0
    return write_csv(rows)


def demonstrations(env, b: float, count: int, horizon: int, seed: int) -> list[Trajectory]:
    """Boltzmann-rational rollouts under the optimal Q of the true reward."""
    _, Q = value_iteration(env.mdp, env.true_reward)
    return sample_trajectories(env.mdp, Q, b, count, horizon, seed)


def fit(spec: LearnerSpec, env, trajectories, seed: int, **overrides) -> np.ndarray:
    """Train one learner and return its recovered reward."""
    if spec.approximator == "random":
        return np.random.default_rng(seed).normal(size=env.mdp.n_states)
    cfg = spec.fairl_config(**overrides)
    if spec.approximator == "nn":
        return train_nn(env, trajectories, cfg, seed)[1]
    if spec.approximator == "gp":
        return train_gp(env, trajectories, cfg, seed)[1]
    raise ValueError(f"unknown approximator {spec.approximator!r}")


def _objectworld_config(config: ExperimentConfig, seed: int, **overrides) -> ObjectworldConfig:
    return ObjectworldConfig(**{**config.env, **overrides, "seed": seed})


def _summary_row(experiment, method, n_states, n_samples, metric, values, flags, seconds, seed):
    values = np.asarray(values, dtype=float)
    if flags:
        metric = f"{metric}[{','.join(sorted(set(flags)))}]"
    ok = values[np.isfinite(values)]
    mean = float(ok.mean()) if ok.size else float("nan")
    std = float(ok.std()) if ok.size else float("nan")
    return ResultRow(experiment, method, n_states, n_samples, metric, mean, std, float(np.mean(seconds)), seed)


def _score(spec, env, trajs, seed, **overrides):
    """``(correlation, flag, seconds)`` for one learner run; never raises."""
    t0 = time.perf_counter()
    try:
        r = fit(spec, env, trajs, seed, **overrides)
    except Exception as exc:  # sweeps record failed cells instead of aborting
        log.warning("learner %s failed: %s", spec.label, exc)
        return float("nan"), f"failed:{type(exc).__name__}", time.perf_counter() - t0
    value, degenerate = pearson_correlation(r, env.true_reward, return_flag=True)
    return value, ("degenerate" if degenerate else None), time.perf_counter() - t0


def run_accuracy(config: ExperimentConfig) -> list[ResultRow]:
    """Correlation of recovered and true reward versus number of trajectories."""
    rows = []
    for n_traj in config.schedule:
        per_learner = {spec.label: ([], [], []) for spec in config.learners}
        n_states = 0
        for rep in range(config.repetitions):
            seed = config.seed + rep
            env = generate(_objectworld_config(config, seed))
            n_states = env.mdp.n_states
            trajs = demonstrations(env, config.demo_b, n_traj, config.horizon, seed)
            for spec in config.learners:
                value, flag, secs = _score(spec, env, trajs, seed)
                vals, flags, times = per_learner[spec.label]
                vals.append(value)
                times.append(secs)
                if flag:
                    flags.append(flag)
        for spec in config.learners:
            vals, flags, times = per_learner[spec.label]
            rows.append(
                _summary_row("accuracy", spec.label, n_states, n_traj * config.horizon, "correlation",
                             vals, flags, times, config.seed)
            )
    return rows


def loglog_slope(n_states, seconds) -> float:
    """Least-squares slope of log(seconds) against log(n_states)."""
    x = np.log(np.asarray(n_states, dtype=float))
    y = np.log(np.asarray(seconds, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def time_iteration(spec: LearnerSpec, env, trajs, seed: int, warmup: int, timed: int) -> list[float]:
    """Wall-clock seconds of single gradient iterations (forward, Q/V/r, gradient, update)."""
    trainer = {"nn": train_nn, "gp": train_gp}[spec.approximator]
    cfg = spec.fairl_config(max_iter=1, early_stop_window=0)
    out = []
    for i in range(warmup + timed):
        t0 = time.perf_counter()
        trainer(env, trajs, cfg, seed)
        if i >= warmup:
            out.append(time.perf_counter() - t0)
    return out


def run_scalability(config: ExperimentConfig) -> list[ResultRow]:
    """Median time of one gradient iteration per state count."""
    rows = []
    measured: dict[str, tuple[list, list]] = {spec.label: ([], []) for spec in config.learners}
    for n_states in config.schedule:
        grid_n = math.isqrt(n_states)
        if grid_n * grid_n != n_states:
            raise ValueError(f"state count {n_states} is not a perfect square")
        env = generate(_objectworld_config(config, config.seed, grid_n=grid_n))
        trajs = demonstrations(env, config.demo_b, config.n_trajectories, config.horizon, config.seed)
        for spec in config.learners:
            times = time_iteration(spec, env, trajs, config.seed, config.warmup, config.timed)
            med = statistics.median(times)
            measured[spec.label][0].append(n_states)
            measured[spec.label][1].append(med)
            rows.append(
                ResultRow("scalability", spec.label, n_states, config.n_trajectories * config.horizon,
                          "seconds_per_iteration", med, float(np.std(times)), med, config.seed)
            )
    for spec in config.learners:
        ns, ts = measured[spec.label]
        if len(ns) >= 2:
            rows.append(
                ResultRow("scalability", spec.label, max(ns), config.n_trajectories * config.horizon,
                          "loglog_slope", loglog_slope(ns, ts), 0.0, 0.0, config.seed)
            )
    for method, table in TABLE1_SECONDS.items():
        for n_states in config.schedule:
            if n_states in table:
                rows.append(
                    ResultRow("scalability", f"reference:{method}", n_states, 0,
                              "seconds_per_iteration", table[n_states], 0.0, 0.0, config.seed)
                )
    return rows


def run_extension(config: ExperimentConfig) -> list[ResultRow]:
    """Every backup operator crossed with every motion model on one instance."""
    spec = config.learners[0] if config.learners else LearnerSpec("nn")
    env = generate(_objectworld_config(config, config.seed))
    trajs = demonstrations(env, config.demo_b, config.n_trajectories, config.horizon, config.seed)
    n_samples = config.n_trajectories * config.horizon
    rows = []
    for mm in config.motion_models:
        for op_cfg in config.operators:
            op = backup_from_config(op_cfg)
            label = f"{op.kind}+{MotionModel(mm).value}"
            t0 = time.perf_counter()
            flag = None
            try:
                cfg = spec.fairl_config(backup=backup_to_config(op), motion_model=mm)
                trainer = train_gp if spec.approximator == "gp" else train_nn
                _, r, _, _, report = trainer(env, trajs, cfg, config.seed)
                value, degenerate = pearson_correlation(r, env.true_reward, return_flag=True)
                flag = "degenerate" if degenerate else None
                epoch = float(np.median(np.diff([0.0, *report.seconds_history]))) if report.seconds_history else 0.0
            except Exception as exc:
                log.warning("combination %s failed: %s", label, exc)
                value, epoch, flag = float("nan"), float("nan"), f"failed:{type(exc).__name__}"
            secs = time.perf_counter() - t0
            metric = "correlation" if flag is None else f"correlation[{flag}]"
            rows.append(ResultRow("extension", label, env.mdp.n_states, n_samples, metric, value, 0.0, secs,
                                  config.seed))
            rows.append(ResultRow("extension", label, env.mdp.n_states, n_samples, "seconds_per_epoch", epoch,
                                  0.0, epoch, config.seed))
    return rows


def cop_demonstrations(env, schedule, grid_g: int, b: float, walkers: int, segment_length: int, seed: int):
    """Walkers follow each instruction segment in turn, continuing from where they stopped.

    Returns the trajectories and the instruction index of each.
    """
    mdp = env.mdp
    qs = {}
    for instr in sorted(set(schedule)):
        _, qs[instr] = value_iteration(mdp, cop_env.ideal_reward_vector(instr, grid_g))
    rng = np.random.default_rng(seed)
    start = rng.integers(mdp.n_states, size=walkers)
    trajs, labels = [], []
    for k, instr in enumerate(schedule):
        seg = sample_trajectories(mdp, qs[instr], b, walkers, segment_length + 1,
                                  int(rng.integers(2**31)), start_states=start)
        start = np.array([t.states[-1] for t in seg])
        for t in seg:
            trajs.append(Trajectory(t.states[:-1], t.actions[:-1]))
            labels.append(instr)
    return trajs, labels


def cop_scores(reward, trajs, labels, grid_g: int) -> dict[int, tuple[float, bool]]:
    """Correlation with each instruction's ideal reward over the states visited under it."""
    out = {}
    for instr in sorted(set(labels)):
        visited = np.unique(np.concatenate([t.states for t, l in zip(trajs, labels) if l == instr]))
        ideal = cop_env.ideal_reward_vector(instr, grid_g)[visited]
        if visited.size < 2:
            out[instr] = (0.0, True)
        else:
            out[instr] = pearson_correlation(np.asarray(reward)[visited], ideal, return_flag=True)
    return out


def run_cop(config: ExperimentConfig) -> list[ResultRow]:
    """Per-instruction correlation between recovered and ideal rewards."""
    learners = list(config.learners) or [LearnerSpec("fairl-nn", "nn", {"hidden": [32, 16]})]
    if not any(s.approximator == "random" for s in learners):
        learners.append(LearnerSpec("random-control", "random"))
    results: dict[tuple[str, int], list] = {}
    flags: dict[tuple[str, int], list] = {}
    times: dict[str, list] = {s.label: [] for s in learners}
    n_states = n_samples = 0
    for rep in range(config.repetitions):
        seed = config.seed + rep
        cop_cfg = cop_env.CopConfig(**{**config.env, "seed": seed})
        env, schedule = cop_env.cop_generate(cop_cfg)
        trajs, labels = cop_demonstrations(env, schedule, cop_cfg.grid_g, config.demo_b, config.walkers,
                                           config.segment_length, seed)
        n_states, n_samples = env.mdp.n_states, sum(len(t) for t in trajs)
        for spec in learners:
            t0 = time.perf_counter()
            try:
                reward = fit(spec, env, trajs, seed)
                scores = cop_scores(reward, trajs, labels, cop_cfg.grid_g)
            except Exception as exc:
                log.warning("learner %s failed: %s", spec.label, exc)
                scores = {i: (float("nan"), True) for i in set(labels)}
                flags.setdefault((spec.label, -1), []).append(f"failed:{type(exc).__name__}")
            times[spec.label].append(time.perf_counter() - t0)
            for instr, (value, degenerate) in scores.items():
                results.setdefault((spec.label, instr), []).append(value)
                if degenerate:
                    flags.setdefault((spec.label, instr), []).append("degenerate")
    rows = []
    for spec in learners:
        failed = flags.get((spec.label, -1), [])
        for instr in range(len(cop_env.INSTRUCTION_NAMES)):
            if (spec.label, instr) not in results:
                continue
            rows.append(
                _summary_row("cop", spec.label, n_states, n_samples,
                             f"correlation:{cop_env.INSTRUCTION_NAMES[instr]}", results[(spec.label, instr)],
                             failed + flags.get((spec.label, instr), []), times[spec.label], config.seed)
            )
    return rows


RUNNERS = {
    "accuracy": run_accuracy,
    "scalability": run_scalability,
    "extension": run_extension,
    "cop": run_cop,
}


def run(config: ExperimentConfig) -> list[ResultRow]:
    return RUNNERS[config.experiment](config)
