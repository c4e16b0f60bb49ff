"""Robust Kalman filtering under heavy-tailed measurement noise.

Classical KF, the variational Student's-t Kalman filter (TKF), and the
covariance-adaptive TKF (TGKF) that swaps the nominal measurement covariance
for a Gaussian-mixture-derived one.
"""

__version__ = "0.1.0"

from ._linalg import ContractViolation, DivergenceError, SingularMatrixError
from .linear_gaussian import (
    GaussianBelief,
    StateSpaceModel,
    WeightPair,
    combine_weighted,
    information_weights,
    kf_predict,
    kf_update,
)
from .mixture_estimation import (
    DegenerateFitError,
    EmSettings,
    InsufficientDataError,
    NoiseMixtureEstimate,
    effective_covariance,
    fit_gmm2,
    gmm_pdf,
    tg_factor,
)
from .noise_lab import (
    AlphaStableSpec,
    MixtureNoiseSpec,
    RandomStream,
    sample_alpha_stable,
    sample_gaussian,
    sample_mixture,
)
from .robust_filters import TkfConfig, lambda_expectation, tgkf_step, tkf_step
