"""Conventional hard-binning histogram, the reference every soft histogram
is measured against."""

from __future__ import annotations

import enum

import numpy as np

from .core import BinSpec, HistogramVector, Normalization, SampleBatch, ValidationError


class BoundaryMode(str, enum.Enum):
    # (mu - omega, mu + omega), both ends excluded
    OPEN_INTERVAL = "open_interval"
    # [e_k, e_{k+1}) with the last bin closed, as numpy.histogram does
    RIGHT_OPEN_EDGES = "right_open_edges"


_MODE_ALIASES = {"open": BoundaryMode.OPEN_INTERVAL,
                 "right_open": BoundaryMode.RIGHT_OPEN_EDGES}


def parse_boundary(mode) -> BoundaryMode:
    if isinstance(mode, BoundaryMode):
        return mode
    if mode in _MODE_ALIASES:
        return _MODE_ALIASES[mode]
    try:
        return BoundaryMode(mode)
    except ValueError:
        raise ValidationError(f"unknown boundary mode {mode!r}") from None


def bin_counts(x: np.ndarray, bins: BinSpec, mode) -> np.ndarray:
    """Integer counts per bin for a flat float array."""
    mode = parse_boundary(mode)
    x = np.asarray(x, dtype=float).reshape(-1)
    if mode is BoundaryMode.OPEN_INTERVAL:
        inside = np.abs(x[:, None] - bins.centers[None, :]) < bins.half_widths[None, :]
        return inside.sum(axis=0).astype(np.int64)
    edges = bins.edges()
    idx = np.searchsorted(edges, x, side="right") - 1
    idx[x == edges[-1]] = bins.n_bins - 1
    keep = (idx >= 0) & (idx < bins.n_bins)
    return np.bincount(idx[keep], minlength=bins.n_bins).astype(np.int64)


def hard_histogram(samples: SampleBatch, bins: BinSpec,
                   mode=BoundaryMode.RIGHT_OPEN_EDGES) -> HistogramVector:
    counts = bin_counts(samples.values, bins, mode)
    return HistogramVector(counts.astype(float), Normalization.COUNTS, len(samples),
                           meta={"kernel": "hard", "boundary": parse_boundary(mode).value})


def normalize(h: HistogramVector, target) -> HistogramVector:
    """Convert between counts and probability (value / N).

    An empty batch normalizes to all zeros.
    """
    target = Normalization(target)
    if target is h.normalization:
        return h
    n = h.n_samples
    if target is Normalization.PROBABILITY:
        values = h.values / n if n > 0 else np.zeros_like(h.values)
    else:
        values = h.values * n
    return HistogramVector(values, target, n, meta=dict(h.meta))

