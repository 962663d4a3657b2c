"""Sparse Gaussian-process VR function with an ARD squared-exponential kernel.

The VR value of a state is the posterior mean given values ``f_u`` at a set
of supporting states:

    f(s) = k(s, S_u)^T (K_uu + jitter I)^{-1} f_u

with ``k(x, x') = beta * exp(-0.5 * sum_d lam_d (x_d - x'_d)^2)``. Note that
``lam_d`` multiplies the squared difference, i.e. it is an inverse squared
length scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

LOG_2PI = np.log(2.0 * np.pi)


class GpFactorizationError(ValueError):
    """The supporting-set covariance is not numerically positive definite."""


@dataclass
class GpParams:
    length_scales: np.ndarray
    signal_variance: float
    supporting_states: np.ndarray
    supporting_values: np.ndarray
    jitter: float

    def __post_init__(self):
        self.length_scales = np.asarray(self.length_scales, dtype=np.float64)
        self.supporting_states = np.asarray(self.supporting_states, dtype=np.int64)
        self.supporting_values = np.asarray(self.supporting_values, dtype=np.float64)
        self.signal_variance = float(self.signal_variance)
        self.jitter = float(self.jitter)
        if np.any(self.length_scales < 0) or not self.signal_variance > 0:
            raise ValueError("length scales must be >= 0 and signal variance > 0")
        if self.supporting_states.ndim != 1 or self.supporting_states.size < 1:
            raise ValueError("need at least one supporting state")
        if np.unique(self.supporting_states).size != self.supporting_states.size:
            raise ValueError("supporting states must be distinct")
        if self.supporting_values.shape != self.supporting_states.shape:
            raise ValueError("one supporting value per supporting state")
        if not self.jitter > 0:
            raise ValueError("jitter must be positive")

    def to_dict(self) -> dict:
        return {
            "length_scales": self.length_scales.tolist(),
            "signal_variance": self.signal_variance,
            "supporting_states": self.supporting_states.tolist(),
            "supporting_values": self.supporting_values.tolist(),
            "jitter": self.jitter,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GpParams":
        return cls(**d)


class GpGradient(NamedTuple):
    length_scales: np.ndarray
    signal_variance: float
    supporting_values: np.ndarray


def init_gp(
    features,
    n_support: int = 64,
    seed: int = 0,
    length_scale: float = 1.0,
    signal_variance: float = 1.0,
) -> GpParams:
    """Random supporting states, flat kernel parameters and ``f_u = 0``.

    Supporting states are drawn without replacement among states with
    distinct feature rows; two identical rows would make ``K_uu`` singular up
    to the jitter.
    """
    features = np.asarray(features, dtype=np.float64)
    rng = np.random.default_rng(seed)
    _, first = np.unique(features, axis=0, return_index=True)
    candidates = np.sort(first)
    n = min(n_support, candidates.size)
    chosen = np.sort(rng.choice(candidates, size=n, replace=False))
    return GpParams(
        length_scales=np.full(features.shape[1], float(length_scale)),
        signal_variance=signal_variance,
        supporting_states=chosen,
        supporting_values=np.zeros(n),
        jitter=1e-6 * signal_variance,
    )


def _weighted_sqdist(X1, X2, lam):
    a = X1 * np.sqrt(lam)
    b = X2 * np.sqrt(lam)
    d = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    return np.maximum(d, 0.0)


def ard_gram(X1, X2, length_scales, signal_variance) -> np.ndarray:
    """Kernel matrix between the rows of ``X1`` and ``X2`` (no jitter)."""
    X1 = np.atleast_2d(np.asarray(X1, dtype=np.float64))
    X2 = np.atleast_2d(np.asarray(X2, dtype=np.float64))
    if X1.shape[1] != X2.shape[1] or X1.shape[1] != len(length_scales):
        raise ValueError("feature dimensions disagree")
    return signal_variance * np.exp(-0.5 * _weighted_sqdist(X1, X2, length_scales))


def ard_kernel(x, x2, params: GpParams) -> float:
    x = np.asarray(x, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x.shape != x2.shape or x.shape != params.length_scales.shape:
        raise ValueError("dimension mismatch")
    d = x - x2
    return float(params.signal_variance * np.exp(-0.5 * np.sum(params.length_scales * d * d)))


class _Factored(NamedTuple):
    Xu: np.ndarray
    Kuu0: np.ndarray  # kernel matrix without jitter
    chol: tuple
    alpha: np.ndarray  # (K_uu + jitter I)^{-1} f_u


def _factor(params: GpParams, features) -> _Factored:
    features = np.asarray(features, dtype=np.float64)
    Xu = features[params.supporting_states]
    Kuu0 = ard_gram(Xu, Xu, params.length_scales, params.signal_variance)
    K = Kuu0 + params.jitter * np.eye(len(Xu))
    try:
        chol = cho_factor(K, lower=True)
    except LinAlgError:
        raise GpFactorizationError(
            f"Cholesky failed for supporting states {params.supporting_states.tolist()}"
        ) from None
    return _Factored(Xu, Kuu0, chol, cho_solve(chol, params.supporting_values))


def gp_mean_all(params: GpParams, features) -> np.ndarray:
    """Posterior mean at every state (row of ``features``)."""
    fac = _factor(params, features)
    Ksu = ard_gram(features, fac.Xu, params.length_scales, params.signal_variance)
    return Ksu @ fac.alpha


def gp_mean(params: GpParams, features, query_state: int) -> float:
    features = np.asarray(features, dtype=np.float64)
    fac = _factor(params, features)
    k = ard_gram(features[query_state], fac.Xu, params.length_scales, params.signal_variance)[0]
    return float(k @ fac.alpha)


def _pair_moment(M, A, B):
    """``sum_{i,j} M[i,j] (A[i,d] - B[j,d])^2`` for every dimension ``d``."""
    return M.sum(1) @ (A * A) + M.sum(0) @ (B * B) - 2.0 * np.einsum("id,ij,jd->d", A, M, B)


def gp_mean_vjp(params: GpParams, features, g, query_states=None) -> GpGradient:
    """Gradient of ``sum_i g[i] * f(query_states[i])`` w.r.t. ``(lam, beta, f_u)``.

    ``query_states`` defaults to every state.
    """
    features = np.asarray(features, dtype=np.float64)
    fac = _factor(params, features)
    Xq = features if query_states is None else features[np.atleast_1d(query_states)]
    g = np.asarray(g, dtype=np.float64).ravel()
    beta = params.signal_variance

    Kqu = ard_gram(Xq, fac.Xu, params.length_scales, beta)
    c = cho_solve(fac.chol, Kqu.T @ g)  # K^{-1} k(S_u, q) g
    a = fac.alpha

    # d f / d lam_d: explicit through k(q, S_u) and implicit through K_uu^{-1}
    M_q = (g[:, None] * Kqu) * a[None, :]
    M_u = (c[:, None] * fac.Kuu0) * a[None, :]
    d_lam = -0.5 * _pair_moment(M_q, Xq, fac.Xu) + 0.5 * _pair_moment(M_u, fac.Xu, fac.Xu)
    d_beta = (g @ Kqu @ a - c @ fac.Kuu0 @ a) / beta
    return GpGradient(d_lam, float(d_beta), c)


def gp_param_gradient(params: GpParams, features, query_state: int) -> GpGradient:
    """Gradient of the posterior mean at one state."""
    return gp_mean_vjp(params, features, [1.0], query_states=[query_state])


def gp_prior_loglik(params: GpParams, features) -> float:
    """Gaussian log-density of ``f_u`` under ``N(0, K_uu + jitter I)``."""
    fac = _factor(params, features)
    n = len(fac.alpha)
    logdet = 2.0 * np.log(np.diag(fac.chol[0])).sum()
    return float(-0.5 * params.supporting_values @ fac.alpha - 0.5 * logdet - 0.5 * n * LOG_2PI)


def gp_prior_gradient(params: GpParams, features) -> GpGradient:
    fac = _factor(params, features)
    a = fac.alpha
    K_inv = cho_solve(fac.chol, np.eye(len(a)))
    # d/dtheta = 0.5 a^T dK a - 0.5 tr(K^{-1} dK); both terms share dK's structure
    W = 0.5 * (np.outer(a, a) - K_inv) * fac.Kuu0
    d_lam = -0.5 * _pair_moment(W, fac.Xu, fac.Xu)
    d_beta = W.sum() / params.signal_variance
    return GpGradient(d_lam, float(d_beta), -a)
