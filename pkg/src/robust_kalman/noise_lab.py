"""Seeded noise generators: Gaussian, two-component Gaussian mixtures, symmetric alpha-stable.

Every sampler is a pure function of its spec, the draw count and a
``RandomStream``.  Streams map onto numpy ``SeedSequence`` spawn keys, so a
(seed, stream_id) pair always yields the same variates no matter which
process draws them or in what order runs are scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._linalg import ContractViolation, as_matrix, as_vector, check_psd, symmetrize

__all__ = [
    "RandomStream",
    "MixtureNoiseSpec",
    "AlphaStableSpec",
    "GaussianNoiseSpec",
    "MixtureDraw",
    "sample_mixture",
    "sample_alpha_stable",
    "sample_gaussian",
    "sample_noise",
    "benchmark_mixture",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RandomStream:
    """Identifies an independent random sequence.

    ``path`` lets one stream be split into named sub-streams (e.g. process
    noise and measurement noise of one Monte Carlo run) without touching the
    sequences of any other stream.
    """

    seed: int
    stream_id: int = 0
    path: tuple[int, ...] = ()

    def __post_init__(self):
        for value, name in ((self.seed, "seed"), (self.stream_id, "stream_id")):
            if not 0 <= int(value) <= _MASK64:
                raise ContractViolation(f"{name} must be a 64-bit unsigned integer, got {value}")

    def child(self, tag: int) -> "RandomStream":
        return RandomStream(self.seed, self.stream_id, self.path + (int(tag),))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),) + self.path)
        return np.random.Generator(np.random.PCG64(seq))


@dataclass(frozen=True, eq=False)
class MixtureNoiseSpec:
    """Nominal N(mean, cov_small) with probability p_gauss, else N(mean, cov_big)."""

    p_gauss: float
    cov_small: np.ndarray
    cov_big: np.ndarray
    mean: np.ndarray | None = None

    def __post_init__(self):
        if not 0.0 <= self.p_gauss <= 1.0:
            raise ContractViolation(f"p_gauss must lie in [0, 1], got {self.p_gauss}")
        small = as_matrix(self.cov_small, "cov_small")
        m = small.shape[0]
        big = as_matrix(self.cov_big, "cov_big", (m, m))
        check_psd(small, "cov_small")
        check_psd(big, "cov_big")
        if np.linalg.det(small) > np.linalg.det(big) * (1 + 1e-12):
            raise ContractViolation("det(cov_small) must not exceed det(cov_big)")
        mean = np.zeros(m) if self.mean is None else as_vector(self.mean, "mean", m)
        object.__setattr__(self, "cov_small", small)
        object.__setattr__(self, "cov_big", big)
        object.__setattr__(self, "mean", mean)

    @property
    def dim(self) -> int:
        return self.cov_small.shape[0]

    def total_covariance(self) -> np.ndarray:
        # components share a mean, so the between-component term vanishes
        return self.p_gauss * self.cov_small + (1.0 - self.p_gauss) * self.cov_big


@dataclass(frozen=True)
class AlphaStableSpec:
    """Symmetric alpha-stable law S(alpha, 0, scale, location), applied per coordinate."""

    alpha: float
    scale: float = 0.5
    location: float = 0.0
    beta: float = field(default=0.0, init=False)
    dim: int = 2

    def __post_init__(self):
        if not 0.0 < self.alpha <= 2.0:
            raise ContractViolation(f"alpha must lie in (0, 2], got {self.alpha}")
        if not self.scale > 0.0:
            raise ContractViolation(f"scale must be positive, got {self.scale}")
        if self.dim < 1:
            raise ContractViolation(f"dim must be >= 1, got {self.dim}")


@dataclass(frozen=True, eq=False)
class GaussianNoiseSpec:
    """Zero-mean Gaussian noise with covariance ``cov``."""

    cov: np.ndarray

    def __post_init__(self):
        cov = as_matrix(self.cov, "cov")
        check_psd(cov, "cov")
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.cov.shape[0]


@dataclass(frozen=True, eq=False)
class MixtureDraw:
    samples: np.ndarray  # (count, m)
    is_small: np.ndarray  # (count,) bool, true component label; validation only


def benchmark_mixture(p_gauss: float = 0.9, var_small: float = 0.1, var_big: float = 10.0) -> MixtureNoiseSpec:
    """The 2-D tracking benchmark mixture: N(0, 0.1 I) w.p. 0.9, N(0, 10 I) w.p. 0.1."""
    return MixtureNoiseSpec(p_gauss, var_small * np.eye(2), var_big * np.eye(2))


def _sqrt_psd(cov: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(symmetrize(cov))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def sample_gaussian(cov, count: int, stream: RandomStream) -> np.ndarray:
    """Zero-mean multivariate normal draws, shape (count, p)."""
    cov = as_matrix(cov, "cov")
    check_psd(cov, "cov")
    if count < 0:
        raise ContractViolation(f"count must be non-negative, got {count}")
    root = _sqrt_psd(cov)
    std = stream.generator().standard_normal((count, cov.shape[0]))
    return std @ root.T


def sample_mixture(spec: MixtureNoiseSpec, count: int, stream: RandomStream) -> MixtureDraw:
    if count < 0:
        raise ContractViolation(f"count must be non-negative, got {count}")
    rng = stream.generator()
    m = spec.dim
    is_small = rng.random(count) < spec.p_gauss
    std = rng.standard_normal((count, m))
    small = std @ _sqrt_psd(spec.cov_small).T
    big = std @ _sqrt_psd(spec.cov_big).T
    samples = np.where(is_small[:, None], small, big) + spec.mean
    return MixtureDraw(samples, is_small)


def sample_alpha_stable(spec: AlphaStableSpec, count: int, stream: RandomStream) -> np.ndarray:
    """Chambers-Mallows-Stuck sampler, symmetric case.

    Returns shape (count,) for dim == 1, else (count, dim) with independent
    coordinates.
    """
    if count < 0:
        raise ContractViolation(f"count must be non-negative, got {count}")
    rng = stream.generator()
    shape = (count,) if spec.dim == 1 else (count, spec.dim)
    phi = rng.uniform(-np.pi / 2, np.pi / 2, size=shape)
    w = rng.standard_exponential(size=shape)
    a = spec.alpha
    if a == 1.0:
        x = np.tan(phi)
    else:
        x = (
            np.sin(a * phi)
            / np.cos(phi) ** (1.0 / a)
            * (np.cos((1.0 - a) * phi) / w) ** ((1.0 - a) / a)
        )
    return spec.scale * x + spec.location


def sample_noise(spec, count: int, stream: RandomStream) -> np.ndarray:
    """Draw ``count`` measurement-noise vectors from any supported spec, shape (count, m)."""
    if isinstance(spec, MixtureNoiseSpec):
        return sample_mixture(spec, count, stream).samples
    if isinstance(spec, AlphaStableSpec):
        return sample_alpha_stable(spec, count, stream).reshape(count, spec.dim)
    if isinstance(spec, GaussianNoiseSpec):
        return sample_gaussian(spec.cov, count, stream)
    raise ContractViolation(f"unsupported noise spec {type(spec).__name__}")
