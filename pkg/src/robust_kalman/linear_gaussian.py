"""Linear state-space models and the classical Kalman filter.

The filter is provided in the usual covariance form (predict / update) and in
the information-weight form, where the posterior mean is written as

    x_post = A_p @ x_prior + A_r @ z

with ``A_p = (P^-1 + H^T R^-1 H)^-1 P^-1`` and ``A_r = (P^-1 + H^T R^-1 H)^-1 H^T R^-1``.
The two matrices partition confidence between prediction and measurement and
satisfy ``A_p + A_r @ H = I``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import (
    ContractViolation,
    as_matrix,
    as_vector,
    check_psd,
    spd_inverse,
    symmetrize,
)

__all__ = [
    "StateSpaceModel",
    "GaussianBelief",
    "WeightPair",
    "kf_predict",
    "kf_update",
    "kf_gain",
    "information_weights",
    "combine_weighted",
]


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """x_k = f x_{k-1} + control + w,  z_k = h x_k + v.

    Args:
        f: (n, n) state transition matrix.
        h: (m, n) observation matrix.
        q: (n, n) process noise covariance.
        r_nominal: (m, m) measurement noise covariance.
        control: optional known additive state offset applied at every
            prediction.
    """

    f: np.ndarray
    h: np.ndarray
    q: np.ndarray
    r_nominal: np.ndarray
    control: np.ndarray | None = None

    def __post_init__(self):
        f = as_matrix(self.f, "f")
        n = f.shape[0]
        if f.shape != (n, n):
            raise ContractViolation(f"f must be square, got {f.shape}")
        h = as_matrix(self.h, "h")
        if h.shape[1] != n:
            raise ContractViolation(f"h has shape {h.shape}, expected (m, {n})")
        m = h.shape[0]
        q = as_matrix(self.q, "q", (n, n))
        r = as_matrix(self.r_nominal, "r_nominal", (m, m))
        check_psd(q, "q")
        check_psd(r, "r_nominal")
        control = None if self.control is None else as_vector(self.control, "control", n)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "r_nominal", r)
        object.__setattr__(self, "control", control)

    @property
    def n(self) -> int:
        return self.f.shape[0]

    @property
    def m(self) -> int:
        return self.h.shape[0]

    def with_r(self, r) -> "StateSpaceModel":
        return StateSpaceModel(self.f, self.h, self.q, r, self.control)


@dataclass(frozen=True, eq=False)
class GaussianBelief:
    """State mean and covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = as_vector(self.mean, "mean")
        cov = as_matrix(self.cov, "cov", (mean.shape[0], mean.shape[0]))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


@dataclass(frozen=True, eq=False)
class WeightPair:
    """Confidence weights on the prior (a_p, n x n) and the measurement (a_r, n x m)."""

    a_p: np.ndarray
    a_r: np.ndarray


def _check_belief(model: StateSpaceModel, belief: GaussianBelief, name: str) -> None:
    if belief.mean.shape[0] != model.n:
        raise ContractViolation(
            f"{name} has dimension {belief.mean.shape[0]}, model expects {model.n}"
        )


def kf_predict(model: StateSpaceModel, posterior: GaussianBelief) -> GaussianBelief:
    _check_belief(model, posterior, "posterior")
    mean = model.f @ posterior.mean
    if model.control is not None:
        mean = mean + model.control
    cov = model.f @ posterior.cov @ model.f.T + model.q
    return GaussianBelief(mean, symmetrize(cov))


def kf_gain(h: np.ndarray, p: np.ndarray, r: np.ndarray) -> np.ndarray:
    """K = P H^T (H P H^T + R)^-1."""
    s = h @ p @ h.T + r
    return p @ h.T @ spd_inverse(s, "innovation covariance")


def kf_update(
    model: StateSpaceModel,
    prior: GaussianBelief,
    z,
    r=None,
) -> GaussianBelief:
    """Measurement update in covariance form.

    ``r`` overrides ``model.r_nominal`` when given (time-varying noise).
    """
    _check_belief(model, prior, "prior")
    z = as_vector(z, "z", model.m)
    r = model.r_nominal if r is None else as_matrix(r, "r", (model.m, model.m))
    h, p = model.h, prior.cov
    gain = kf_gain(h, p, r)
    mean = prior.mean + gain @ (z - h @ prior.mean)
    cov = p - gain @ h @ p
    return GaussianBelief(mean, symmetrize(cov))


def information_weights(model: StateSpaceModel, prior_cov, r=None) -> WeightPair:
    """Return (A_p, A_r) for a prior covariance and measurement covariance.

    Raises SingularMatrixError if either covariance (or the posterior
    information matrix) cannot be inverted.
    """
    p = as_matrix(prior_cov, "prior_cov", (model.n, model.n))
    r = model.r_nominal if r is None else as_matrix(r, "r", (model.m, model.m))
    p_inv = spd_inverse(p, "prior covariance")
    r_inv = spd_inverse(r, "measurement covariance")
    h = model.h
    post_cov = spd_inverse(p_inv + h.T @ r_inv @ h, "posterior information matrix")
    return WeightPair(post_cov @ p_inv, post_cov @ h.T @ r_inv)


def combine_weighted(weights: WeightPair, prior_mean, z) -> np.ndarray:
    n, m = weights.a_r.shape
    prior_mean = as_vector(prior_mean, "prior_mean", n)
    z = as_vector(z, "z", m)
    if weights.a_p.shape != (n, n):
        raise ContractViolation(f"a_p has shape {weights.a_p.shape}, expected {(n, n)}")
    return weights.a_p @ prior_mean + weights.a_r @ z
