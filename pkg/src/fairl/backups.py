"""Bellman backup operators: reductions from a Q-vector to a state value.

Every operator works along the last axis, so a whole ``(n_states, n_actions)``
table can be reduced at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PNORM_EPS = 1e-9


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _logsumexp(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=-1)
    return m + np.log(np.exp(z - m[..., None]).sum(axis=-1))


@dataclass(frozen=True)
class Max:
    kind = "max"

    def value(self, q: np.ndarray) -> np.ndarray:
        return q.max(axis=-1)

    def gradient(self, q: np.ndarray) -> np.ndarray:
        # subgradient at ties: lowest index, same as greedy_policy
        g = np.zeros_like(q)
        np.put_along_axis(g, q.argmax(axis=-1)[..., None], 1.0, axis=-1)
        return g


@dataclass(frozen=True)
class LogSumExp:
    kind = "logsumexp"

    def value(self, q: np.ndarray) -> np.ndarray:
        return _logsumexp(q)

    def gradient(self, q: np.ndarray) -> np.ndarray:
        return _softmax(q)


@dataclass(frozen=True)
class GSoft:
    """Generalized softmax ``(1/k) log sum exp(k q)``."""

    k: float = 100.0
    kind = "gsoft"

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError(f"GSoft needs k > 0, got {self.k}")

    def value(self, q: np.ndarray) -> np.ndarray:
        return _logsumexp(self.k * q) / self.k

    def gradient(self, q: np.ndarray) -> np.ndarray:
        return _softmax(self.k * q)


@dataclass(frozen=True)
class PNorm:
    """Shifted p-norm ``c + ||q - c||_p`` with ``c = min(q) - 1e-9``.

    The shift keeps every base positive, so the norm approaches ``max(q)``
    from above as ``p`` grows, and adding a constant to ``q`` shifts the
    result by the same constant.
    """

    p: float = 10.0
    kind = "pnorm"

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError(f"PNorm needs p > 1, got {self.p}")

    def _parts(self, q):
        shift = q.min(axis=-1) - PNORM_EPS
        x = q - shift[..., None]
        top = x.max(axis=-1)
        norm = top * (((x / top[..., None]) ** self.p).sum(axis=-1)) ** (1.0 / self.p)
        return shift, x, norm

    def value(self, q: np.ndarray) -> np.ndarray:
        shift, _, norm = self._parts(q)
        return shift + norm

    def gradient(self, q: np.ndarray) -> np.ndarray:
        _, x, norm = self._parts(q)
        w = (x / norm[..., None]) ** (self.p - 1.0)
        # the shift tracks the (lowest-index) argmin; its share makes rows sum to 1
        lo = q.argmin(axis=-1)[..., None]
        rest = 1.0 - w.sum(axis=-1, keepdims=True)
        np.put_along_axis(w, lo, np.take_along_axis(w, lo, axis=-1) + rest, axis=-1)
        return w


BackupOperator = Max | LogSumExp | PNorm | GSoft

_KINDS = {"max": Max, "logsumexp": LogSumExp, "pnorm": PNorm, "gsoft": GSoft}


def _as_q(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.ndim == 0 or q.shape[-1] == 0:
        raise ValueError("q must contain at least one action value")
    return q


def apply_backup(op: BackupOperator, q) -> np.ndarray | float:
    """Reduce ``q`` over its last axis with ``op``."""
    out = op.value(_as_q(q))
    return float(out) if np.ndim(out) == 0 else out


def backup_gradient(op: BackupOperator, q) -> np.ndarray:
    """``dV/dq`` of :func:`apply_backup`, same shape as ``q``."""
    return op.gradient(_as_q(q))


def backup_from_config(cfg: dict | str) -> BackupOperator:
    """Parse ``{"kind": "gsoft", "k": 100.0}`` (or just ``"max"``)."""
    if isinstance(cfg, str):
        cfg = {"kind": cfg}
    cfg = dict(cfg)
    try:
        cls = _KINDS[cfg.pop("kind").lower()]
    except KeyError as exc:
        raise ValueError(f"unknown backup operator {exc}") from None
    return cls(**cfg)


def backup_to_config(op: BackupOperator) -> dict:
    cfg = {"kind": op.kind}
    if isinstance(op, PNorm):
        cfg["p"] = op.p
    elif isinstance(op, GSoft):
        cfg["k"] = op.k
    return cfg
