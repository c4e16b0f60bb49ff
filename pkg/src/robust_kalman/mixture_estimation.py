"""Two-component Gaussian mixture fitting of measurement noise and the TG covariance factor.

The noise is split into a nominal small-covariance component ``S`` and an
impulsive big-covariance component ``B``.  The TG factor rescales ``R(S)`` into
the effective covariance handed to the covariance-adaptive Student's-t filter:

    TG = 4 * sqrt(det(R_B R_S^-1)) / (3 + exp(10 P)),    R(I) = TG * R(S)

where ``P`` is the fitted weight of the small component.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._linalg import (
    ContractViolation,
    SingularMatrixError,
    as_matrix,
    as_vector,
    logdet_spd,
    spd_inverse,
    symmetrize,
)
from .noise_lab import RandomStream

__all__ = [
    "EmSettings",
    "NoiseMixtureEstimate",
    "InsufficientDataError",
    "DegenerateFitError",
    "gmm_pdf",
    "component_pdf",
    "fit_gmm2",
    "single_gaussian_estimate",
    "tg_factor",
    "effective_covariance",
]

_LOG_2PI = math.log(2.0 * math.pi)


class InsufficientDataError(ValueError):
    pass


class DegenerateFitError(RuntimeError):
    """EM collapsed every sample onto a single component."""


@dataclass(frozen=True)
class EmSettings:
    max_iters: int = 500
    tol: float = 1e-8
    n_restarts: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ContractViolation(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.tol > 0:
            raise ContractViolation(f"tol must be positive, got {self.tol}")
        if self.n_restarts < 1:
            raise ContractViolation(f"n_restarts must be >= 1, got {self.n_restarts}")


@dataclass(frozen=True, eq=False)
class NoiseMixtureEstimate:
    """Fitted small (S) and big (B) noise components.

    ``log_likelihood_trace`` holds the total log-likelihood after every EM
    iteration of the winning restart; it is empty for hand-built estimates.
    """

    weight_s: float
    weight_b: float
    mean_s: np.ndarray
    mean_b: np.ndarray
    cov_s: np.ndarray
    cov_b: np.ndarray
    log_likelihood: float = float("nan")
    log_likelihood_trace: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if not (0.0 <= self.weight_s <= 1.0 and 0.0 <= self.weight_b <= 1.0):
            raise ContractViolation("mixture weights must lie in [0, 1]")
        if abs(self.weight_s + self.weight_b - 1.0) > 1e-9:
            raise ContractViolation("mixture weights must sum to 1")
        cov_s = as_matrix(self.cov_s, "cov_s")
        m = cov_s.shape[0]
        object.__setattr__(self, "cov_s", cov_s)
        object.__setattr__(self, "cov_b", as_matrix(self.cov_b, "cov_b", (m, m)))
        object.__setattr__(self, "mean_s", as_vector(self.mean_s, "mean_s", m))
        object.__setattr__(self, "mean_b", as_vector(self.mean_b, "mean_b", m))

    @property
    def dim(self) -> int:
        return self.cov_s.shape[0]

    @property
    def gaussian_proportion(self) -> float:
        return self.weight_s

    @classmethod
    def from_components(cls, weight_s: float, cov_s, cov_b, mean_s=None, mean_b=None):
        cov_s = as_matrix(cov_s, "cov_s")
        m = cov_s.shape[0]
        return cls(
            weight_s,
            1.0 - weight_s,
            np.zeros(m) if mean_s is None else mean_s,
            np.zeros(m) if mean_b is None else mean_b,
            cov_s,
            cov_b,
        )


def component_pdf(u, mean, cov) -> float:
    """Multivariate normal density N(u; mean, cov)."""
    u = as_vector(u, "u")
    d = u - as_vector(mean, "mean", u.shape[0])
    cov = as_matrix(cov, "cov", (u.shape[0], u.shape[0]))
    inv = spd_inverse(cov, "component covariance")
    logdet = logdet_spd(cov, "component covariance")
    return math.exp(-0.5 * (u.shape[0] * _LOG_2PI + logdet + d @ inv @ d))


def gmm_pdf(u, estimate: NoiseMixtureEstimate) -> float:
    total = 0.0
    for w, mu, cov in (
        (estimate.weight_s, estimate.mean_s, estimate.cov_s),
        (estimate.weight_b, estimate.mean_b, estimate.cov_b),
    ):
        if w > 0.0:
            total += w * component_pdf(u, mu, cov)
    return total


def _log_gauss(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    d = x - mean
    w, v = np.linalg.eigh(symmetrize(cov))
    if w[0] <= 0.0:
        raise SingularMatrixError("component covariance", np.inf)
    proj = d @ v
    maha = np.sum(proj * proj / w, axis=1)
    return -0.5 * (x.shape[1] * _LOG_2PI + np.sum(np.log(w)) + maha)


def _init_responsibilities(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # k-means++ seeding on sample norms, then a hard assignment to the nearer centre
    norms = np.linalg.norm(x, axis=1)
    first = norms[rng.integers(len(norms))]
    d2 = (norms - first) ** 2
    total = d2.sum()
    if total > 0.0:
        second = norms[rng.choice(len(norms), p=d2 / total)]
    else:
        second = first
    resp = np.zeros((len(norms), 2))
    nearer_first = np.abs(norms - first) <= np.abs(norms - second)
    resp[nearer_first, 0] = 1.0
    resp[~nearer_first, 1] = 1.0
    return resp


def _em_run(x: np.ndarray, resp: np.ndarray, settings: EmSettings, floor: np.ndarray):
    n, m = x.shape
    trace: list[float] = []
    prev = -np.inf
    weights = means = covs = None
    for _ in range(settings.max_iters):
        nk = resp.sum(axis=0)
        if np.any(nk < 1e-10 * n):
            raise DegenerateFitError("all responsibilities collapsed onto one component")
        weights = nk / n
        means = (resp.T @ x) / nk[:, None]
        covs = []
        for k in range(2):
            d = x - means[k]
            covs.append(symmetrize((resp[:, k, None] * d).T @ d / nk[k]) + floor)
        log_joint = np.column_stack(
            [np.log(weights[k]) + _log_gauss(x, means[k], covs[k]) for k in range(2)]
        )
        top = log_joint.max(axis=1, keepdims=True)
        log_norm = top[:, 0] + np.log(np.exp(log_joint - top).sum(axis=1))
        ll = float(log_norm.sum())
        trace.append(ll)
        resp = np.exp(log_joint - log_norm[:, None])
        if np.isfinite(prev) and abs(ll - prev) <= settings.tol * abs(prev):
            break
        prev = ll
    return weights, means, covs, trace


def fit_gmm2(samples, settings: EmSettings | None = None) -> NoiseMixtureEstimate:
    """Fit a two-component Gaussian mixture by EM and label the components.

    Each restart seeds hard responsibilities, then alternates M-step and
    E-step until the relative log-likelihood change drops below
    ``settings.tol``.  The restart with the highest final log-likelihood
    wins (lowest index on ties).  The component with the smaller
    covariance determinant becomes ``S``.

    Raises:
        InsufficientDataError: fewer than ``10 * m`` samples.
        DegenerateFitError: every restart collapsed onto one component.
    """
    settings = settings or EmSettings()
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, m = x.shape
    if n < 10 * m:
        raise InsufficientDataError(f"need at least {10 * m} samples, got {n}")
    if not np.all(np.isfinite(x)):
        raise ContractViolation("samples must be finite")
    sample_cov = np.atleast_2d(np.cov(x, rowvar=False, bias=True))
    floor = 1e-8 * (np.trace(sample_cov) / m) * np.eye(m)
    if np.trace(sample_cov) <= 0.0:
        raise DegenerateFitError("samples have zero spread")

    best = None
    last_error: Exception | None = None
    root = np.random.SeedSequence(int(settings.seed))
    for child in root.spawn(settings.n_restarts):
        rng = np.random.Generator(np.random.PCG64(child))
        try:
            result = _em_run(x, _init_responsibilities(x, rng), settings, floor)
        except (DegenerateFitError, SingularMatrixError) as exc:
            last_error = exc
            continue
        if best is None or result[3][-1] > best[3][-1]:
            best = result
    if best is None:
        raise DegenerateFitError(str(last_error))

    weights, means, covs, trace = best
    dets = [np.linalg.det(c) for c in covs]
    s, b = (0, 1) if dets[0] <= dets[1] else (1, 0)
    return NoiseMixtureEstimate(
        weight_s=float(weights[s]),
        weight_b=float(1.0 - weights[s]),
        mean_s=means[s],
        mean_b=means[b],
        cov_s=covs[s],
        cov_b=covs[b],
        log_likelihood=trace[-1],
        log_likelihood_trace=tuple(trace),
    )


def single_gaussian_estimate(samples) -> NoiseMixtureEstimate:
    """Fallback when EM degenerates: one Gaussian carrying all the weight."""
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    cov = np.atleast_2d(np.cov(x, rowvar=False, bias=True))
    mean = x.mean(axis=0)
    return NoiseMixtureEstimate(1.0, 0.0, mean, mean, cov, cov)


def tg_factor(estimate: NoiseMixtureEstimate) -> float:
    """4 * sqrt(det(cov_b @ inv(cov_s))) / (3 + exp(10 * weight_s))."""
    inv_s = spd_inverse(estimate.cov_s, "cov_s")
    ratio = float(np.linalg.det(estimate.cov_b @ inv_s))
    if ratio < 0.0:
        raise ContractViolation("det(cov_b cov_s^-1) is negative; cov_b is not PSD")
    return 4.0 * math.sqrt(ratio) / (3.0 + math.exp(10.0 * estimate.weight_s))


def effective_covariance(estimate: NoiseMixtureEstimate) -> np.ndarray:
    return symmetrize(tg_factor(estimate) * estimate.cov_s)
