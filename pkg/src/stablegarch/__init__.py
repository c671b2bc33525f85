"""Gaussian quasi-maximum-likelihood estimation for GARCH(p, q) with heavy-tailed noise."""

from .errors import ConfigError, ExplosiveParametersError, NonStationaryError
from .filtering import (
    FilterOutput,
    filter_gradient,
    filter_h,
    h_hat_via_psi,
    psi_coefficients,
    run_filter,
    stationary_filter,
)
from .garch import GarchParams, GarchPath, lyapunov_stationarity, necessary_stationarity, simulate
from .innovations import (
    Gaussian,
    InnovationModel,
    ParetoHybrid,
    SeedSpec,
    StudentT,
    normalizing_a_n,
    sample_innovations,
    square_tail_index,
)

__version__ = "0.1.0"
