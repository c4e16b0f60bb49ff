"""Variational Student's-t Kalman filter (TKF) and its covariance-adaptive variant (TGKF).

One time step runs the usual prediction, then ``n_iters`` fixed-point
iterations that alternately refine

* ``E[xi]``, the Gamma-distributed scale of the prediction error,
* ``E[Sigma^-1]``, the inverse-Wishart prediction scale matrix,
* ``E[lambda]``, the Gamma-distributed scale of the measurement noise,

and re-run a Kalman update with the modified covariances
``P~ = E[Sigma^-1]^-1 / E[xi]`` and ``R~ = R / E[lambda]``.

TKF feeds the nominal measurement covariance into the loop.  TGKF feeds
``TG * R(S)`` from a two-component mixture fit instead; nothing else changes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import (
    ContractViolation,
    DivergenceError,
    as_matrix,
    as_vector,
    check_psd,
    spd_inverse,
    symmetrize,
)
from .linear_gaussian import GaussianBelief, StateSpaceModel, kf_predict
from .mixture_estimation import NoiseMixtureEstimate, effective_covariance

__all__ = [
    "TkfConfig",
    "VariationalIterate",
    "lambda_expectation",
    "adjustment_limit",
    "tkf_step",
    "tkf_step_iterates",
    "tgkf_step",
]


@dataclass(frozen=True)
class TkfConfig:
    """Student's-t filter constants.

    Args:
        omega: dof of the prediction-error Student's-t.
        nu: dof of the measurement-noise Student's-t.
        tau: inverse-Wishart tuning parameter.
        n_iters: fixed-point iterations per time step.
        state_dim, meas_dim: optional; checked against the model when set.
    """

    omega: float = 5.0
    nu: float = 5.0
    tau: float = 5.0
    n_iters: int = 10
    state_dim: int | None = None
    meas_dim: int | None = None

    def __post_init__(self):
        for name in ("omega", "nu", "tau"):
            if not getattr(self, name) > 0:
                raise ContractViolation(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_iters < 1:
            raise ContractViolation(f"n_iters must be >= 1, got {self.n_iters}")


@dataclass(frozen=True, eq=False)
class VariationalIterate:
    """Quantities produced by one fixed-point iteration."""

    x_post: np.ndarray
    p_post: np.ndarray
    e_sigma_inv: np.ndarray
    e_xi: float
    e_lambda: float
    u_hat: float
    u_mat: np.ndarray
    alpha: float
    beta: float
    gamma: float
    delta: float
    r_tilde: np.ndarray
    p_tilde: np.ndarray
    rel_change: float


def adjustment_limit(m: int, nu: float) -> float:
    """Supremum (m + nu) / nu of E[lambda]."""
    return (m + nu) / nu


def lambda_expectation(residual_outer, r_effective, config: TkfConfig) -> float:
    """E[lambda] = (m + nu) / (nu + tr(E R^-1))."""
    r = as_matrix(r_effective, "r_effective")
    e = as_matrix(residual_outer, "residual_outer", r.shape)
    m = r.shape[0]
    r_inv = spd_inverse(r, "r_effective")
    return (m + config.nu) / (config.nu + float(np.sum(e * r_inv.T)))


def _check_dims(model: StateSpaceModel, config: TkfConfig) -> None:
    if config.state_dim is not None and config.state_dim != model.n:
        raise ContractViolation(f"config.state_dim={config.state_dim}, model has n={model.n}")
    if config.meas_dim is not None and config.meas_dim != model.m:
        raise ContractViolation(f"config.meas_dim={config.meas_dim}, model has m={model.m}")


def tkf_step_iterates(
    model: StateSpaceModel,
    posterior_prev: GaussianBelief,
    z,
    r_effective,
    config: TkfConfig,
    record: bool = True,
) -> tuple[GaussianBelief, list[VariationalIterate]]:
    """Run one filter step and return the posterior plus every iterate.

    Raises:
        ContractViolation: r_effective not symmetric positive definite, or
            dimension mismatch.
        SingularMatrixError: an innovation or scale matrix is singular.
        DivergenceError: a non-finite value appears; ``.iteration`` names
            the offending iteration.
    """
    _check_dims(model, config)
    n, m = model.n, model.m
    z = as_vector(z, "z", m)
    r_eff = as_matrix(r_effective, "r_effective", (m, m))
    check_psd(r_eff, "r_effective")
    try:
        r_inv = spd_inverse(r_eff, "r_effective")
    except np.linalg.LinAlgError as exc:
        raise ContractViolation(f"r_effective must be positive definite: {exc}") from None

    h = model.h
    omega, nu, tau = config.omega, config.nu, config.tau

    # time update
    predicted = kf_predict(model, posterior_prev)
    x_pred, p_pred = predicted.mean, predicted.cov

    # initialization
    u = n + tau + 1.0
    u_mat = tau * p_pred
    e_sigma_inv = (u - n - 1.0) * spd_inverse(u_mat, "U (scaled prediction covariance)")
    x_post, p_post = x_pred, p_pred
    innovation = z - h @ x_pred

    alpha = 0.5 * (n + omega)
    gamma = 0.5 * (m + nu)
    u_hat = u + 1.0
    iterates: list[VariationalIterate] = []
    e_lambda_prev = np.nan

    for i in range(config.n_iters):
        dx = x_post - x_pred
        d_mat = p_post + np.outer(dx, dx)
        beta = 0.5 * (omega + float(np.sum(d_mat * e_sigma_inv.T)))
        e_xi = alpha / beta

        res = z - h @ x_post
        e_mat = np.outer(res, res) + h @ p_post @ h.T
        delta = 0.5 * (nu + float(np.sum(e_mat * r_inv.T)))
        e_lambda = gamma / delta

        if not (np.isfinite(e_xi) and np.isfinite(e_lambda) and e_xi > 0 and e_lambda > 0):
            raise DivergenceError(f"non-finite value at fixed-point iteration {i}", iteration=i)

        try:
            u_hat_mat = u_mat + e_xi * d_mat
            e_sigma_inv = (u_hat - n - 1.0) * spd_inverse(u_hat_mat, "U_hat")

            r_tilde = r_eff / e_lambda
            p_tilde = spd_inverse(e_sigma_inv, "E[Sigma^-1]") / e_xi

            s = h @ p_tilde @ h.T + r_tilde
            gain = p_tilde @ h.T @ spd_inverse(s, "innovation covariance")
        except DivergenceError as exc:
            raise DivergenceError(f"{exc} at fixed-point iteration {i}", iteration=i) from None
        x_post = x_pred + gain @ innovation
        p_post = symmetrize(p_tilde - gain @ h @ p_tilde)

        if not (np.all(np.isfinite(x_post)) and np.all(np.isfinite(p_post))):
            raise DivergenceError(f"non-finite value at fixed-point iteration {i}", iteration=i)

        if record:
            rel = abs(e_lambda - e_lambda_prev) / e_lambda if i else np.nan
            iterates.append(
                VariationalIterate(
                    x_post=x_post,
                    p_post=p_post,
                    e_sigma_inv=e_sigma_inv,
                    e_xi=e_xi,
                    e_lambda=e_lambda,
                    u_hat=u_hat,
                    u_mat=u_hat_mat,
                    alpha=alpha,
                    beta=beta,
                    gamma=gamma,
                    delta=delta,
                    r_tilde=r_tilde,
                    p_tilde=p_tilde,
                    rel_change=rel,
                )
            )
        e_lambda_prev = e_lambda

    return GaussianBelief(x_post, p_post), iterates


def tkf_step(
    model: StateSpaceModel,
    posterior_prev: GaussianBelief,
    z,
    r_effective,
    config: TkfConfig,
) -> GaussianBelief:
    belief, _ = tkf_step_iterates(model, posterior_prev, z, r_effective, config, record=False)
    return belief


def tgkf_step(
    model: StateSpaceModel,
    posterior_prev: GaussianBelief,
    z,
    mixture: NoiseMixtureEstimate,
    config: TkfConfig,
) -> GaussianBelief:
    """TKF step with the measurement covariance replaced by TG * R(S)."""
    return tkf_step(model, posterior_prev, z, effective_covariance(mixture), config)
