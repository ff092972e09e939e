"""Distances between neural representations via Gaussian process predictives."""

from ._core import (
    DEFAULT_B,
    DEFAULT_SAMPLES,
    Error,
    NumericalError,
    UsageError,
    ValidationError,
    baseline,
    estimate_pair,
    gradient,
    gram,
    heuristic_a,
    mds_embed,
    noise_variance_to_a,
    pairwise,
    predictive_covariance,
    read_matrix,
    write_matrix,
)

__version__ = "0.1.0"
