"""Fractal-index estimation for bivariate stationary Gaussian processes.

Modules
-------
specialfn    Gamma and modified Bessel K at double precision.
covariance   Bivariate Matérn and generic models, validity checks.
simulate     Exact Cholesky simulation on the grid j/n.
estimator    Dilated second-difference increments, OLS and GLS index estimates.
asymptotics  Limit covariances, asymptotic law, predicted decay rates.
montecarlo   Replicated experiments, decay-rate fits, normality diagnostics.
figures      Deterministic SVG panels.
cli          Command-line front end.
"""

__version__ = "0.1.0"

from .covariance import (CovarianceModel, GenericModel, InvalidModelError, LocalExpansion,
                         MaternModel, MaternParams, check_matern_validity, check_validity,
                         local_expansion, trajectory_dimension)
from .estimator import DegeneratePathError, JointEstimate, estimate, gls_weights, ols_weights
from .simulate import NotPositiveDefiniteError, SamplePath, SeedSpec, simulate_ensemble, simulate_path

__all__ = [
    "CovarianceModel", "GenericModel", "InvalidModelError", "LocalExpansion", "MaternModel",
    "MaternParams", "check_matern_validity", "check_validity", "local_expansion",
    "trajectory_dimension", "DegeneratePathError", "JointEstimate", "estimate", "gls_weights",
    "ols_weights", "NotPositiveDefiniteError", "SamplePath", "SeedSpec", "simulate_ensemble",
    "simulate_path",
]
