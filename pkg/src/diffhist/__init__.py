"""Differentiable histograms that approximate hard binning.

The HistLayer vote ``phi(b ** (omega - |x - mu|))`` is exactly zero outside
a bin and lies in ``(1, b ** omega]`` inside it, so a soft histogram built
from it over-counts each bin by a factor of at most ``b ** omega``.
"""

from .core import (BinSpec, HistogramVector, Normalization, Provenance, SampleBatch,
                   ValidationError, make_uniform_bins, validate_samples)
from .kernels import (Kernel, KernelKind, KernelParams, VoteGradient, default_params,
                      histlayer_vote, kde_vote, lbf_vote, make_kernel, rbf_vote,
                      soft_histogram, threshold_phi)
from .oracle import BoundaryMode, hard_histogram, normalize

__all__ = [
    "BinSpec", "HistogramVector", "Normalization", "Provenance", "SampleBatch",
    "ValidationError", "make_uniform_bins", "validate_samples",
    "Kernel", "KernelKind", "KernelParams", "VoteGradient", "default_params",
    "histlayer_vote", "kde_vote", "lbf_vote", "make_kernel", "rbf_vote",
    "soft_histogram", "threshold_phi",
    "BoundaryMode", "hard_histogram", "normalize",
]

__version__ = "0.1.0"
