"""Numerical helpers shared by every filter: errors, PSD checks, guarded inverses."""

from __future__ import annotations

import numpy as np

# Condition numbers above this are treated as numerically singular.
COND_LIMIT = 1e12


class ContractViolation(ValueError):
    """An input violated a documented precondition (shape, range, PSD)."""


class SingularMatrixError(np.linalg.LinAlgError):
    """A matrix that must be inverted is singular or too ill-conditioned."""

    def __init__(self, name: str, cond: float):
        self.name = name
        self.cond = cond
        super().__init__(f"{name} is numerically singular (condition number {cond:.3g})")


class DivergenceError(FloatingPointError):
    """A filter produced a non-finite intermediate."""

    def __init__(self, message: str, iteration: int | None = None):
        self.iteration = iteration
        super().__init__(message)


def symmetrize(mat: np.ndarray) -> np.ndarray:
    return 0.5 * (mat + mat.T)


def as_matrix(value, name: str, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Coerce `value` to a 2-D float array, promoting scalars to 1x1."""
    mat = np.atleast_2d(np.asarray(value, dtype=float))
    if mat.ndim != 2:
        raise ContractViolation(f"{name} must be a matrix, got ndim={mat.ndim}")
    if shape is not None and mat.shape != shape:
        raise ContractViolation(f"{name} has shape {mat.shape}, expected {shape}")
    return mat


def as_vector(value, name: str, size: int | None = None) -> np.ndarray:
    vec = np.atleast_1d(np.asarray(value, dtype=float))
    if vec.ndim != 1:
        raise ContractViolation(f"{name} must be a vector, got ndim={vec.ndim}")
    if size is not None and vec.shape[0] != size:
        raise ContractViolation(f"{name} has length {vec.shape[0]}, expected {size}")
    return vec


def is_symmetric(mat: np.ndarray, rtol: float = 1e-12) -> bool:
    scale = max(float(np.max(np.abs(mat))), np.finfo(float).tiny)
    return float(np.max(np.abs(mat - mat.T))) <= rtol * scale


def is_psd(mat: np.ndarray, rtol: float = 1e-10) -> bool:
    """Symmetric with eigenvalues >= -rtol * trace."""
    if mat.shape[0] != mat.shape[1] or not np.all(np.isfinite(mat)):
        return False
    if not is_symmetric(mat):
        return False
    eig = np.linalg.eigvalsh(symmetrize(mat))
    return bool(eig.min() >= -rtol * max(abs(float(np.trace(mat))), 0.0))


def check_psd(mat: np.ndarray, name: str, rtol: float = 1e-10) -> None:
    if not is_psd(mat, rtol):
        raise ContractViolation(f"{name} must be symmetric positive semidefinite")


def spd_inverse(mat: np.ndarray, name: str) -> np.ndarray:
    """Invert a symmetric positive definite matrix via its eigendecomposition.

    Raises SingularMatrixError when the matrix is not positive definite or
    its condition number exceeds COND_LIMIT.
    """
    if not np.isfinite(mat).all():
        raise DivergenceError(f"{name} contains non-finite entries")
    w, v = np.linalg.eigh(0.5 * (mat + mat.T))
    top = w[-1]
    if top <= 0.0 or w[0] <= 0.0 or top / w[0] > COND_LIMIT:
        cond = np.inf if w[0] <= 0.0 or top <= 0.0 else top / w[0]
        raise SingularMatrixError(name, cond)
    inv = (v / w) @ v.T
    return 0.5 * (inv + inv.T)


def logdet_spd(mat: np.ndarray, name: str) -> float:
    w = np.linalg.eigvalsh(symmetrize(mat))
    if w[0] <= 0.0 or w[-1] / w[0] > COND_LIMIT:
        raise SingularMatrixError(name, np.inf if w[0] <= 0.0 else w[-1] / w[0])
    return float(np.sum(np.log(w)))
