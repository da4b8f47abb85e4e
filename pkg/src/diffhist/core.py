"""Shared value types: bin grids, sample batches and histogram vectors.

Bins are stored as centers and half-widths, so bin ``k`` is the open
interval ``(centers[k] - half_widths[k], centers[k] + half_widths[k])``.
Edge representations are derived on demand.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np


class ValidationError(ValueError):
    """Raised when user-supplied data or parameters are rejected."""


class Normalization(str, enum.Enum):
    COUNTS = "counts"
    PROBABILITY = "probability"


class Provenance(str, enum.Enum):
    FILE = "file"
    SYNTHETIC = "synthetic"


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class BinSpec:
    centers: np.ndarray
    half_widths: np.ndarray

    def __post_init__(self):
        centers = _frozen_array(self.centers)
        half_widths = _frozen_array(self.half_widths)
        if centers.size == 0:
            raise ValidationError("a bin grid needs at least one bin")
        if centers.shape != half_widths.shape:
            raise ValidationError(
                f"{centers.size} centers but {half_widths.size} half-widths")
        if not (np.all(np.isfinite(centers)) and np.all(np.isfinite(half_widths))):
            raise ValidationError("bin centers and half-widths must be finite")
        if np.any(half_widths <= 0):
            raise ValidationError("bin half-widths must be positive")
        if np.any(np.diff(centers) <= 0):
            raise ValidationError("bin centers must be strictly increasing")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "half_widths", half_widths)

    @property
    def n_bins(self) -> int:
        return int(self.centers.size)

    @property
    def lower(self) -> np.ndarray:
        return self.centers - self.half_widths

    @property
    def upper(self) -> np.ndarray:
        return self.centers + self.half_widths

    def is_uniform(self, rtol: float = 1e-9) -> bool:
        """True when all half-widths agree and neighbouring bins abut."""
        w = self.half_widths
        if not np.allclose(w, w[0], rtol=rtol, atol=0.0):
            return False
        if self.n_bins == 1:
            return True
        # center differences carry rounding relative to the centers' magnitude
        slack = 16 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(self.centers))))
        return bool(np.allclose(np.diff(self.centers), 2 * w[0], rtol=rtol, atol=slack))

    def is_contiguous(self, rtol: float = 1e-9) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.centers))))
        gaps = self.lower[1:] - self.upper[:-1]
        return bool(np.all(np.abs(gaps) <= rtol * scale))

    def edges(self) -> np.ndarray:
        """K+1 edges for contiguous bins: every lower edge plus the last upper edge."""
        if not self.is_contiguous():
            raise ValidationError("edges are only defined for contiguous bins")
        return np.append(self.lower, self.upper[-1])

    def to_dict(self) -> dict:
        return {"centers": self.centers.tolist(),
                "half_widths": self.half_widths.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "BinSpec":
        return cls(d["centers"], d["half_widths"])

    def __eq__(self, other):
        if not isinstance(other, BinSpec):
            return NotImplemented
        return (np.array_equal(self.centers, other.centers)
                and np.array_equal(self.half_widths, other.half_widths))

    __hash__ = None


def make_uniform_bins(lo: float, hi: float, n_bins: int) -> BinSpec:
    """K equal bins covering ``[lo, hi]``.

    >>> b = make_uniform_bins(-1, 1, 20)
    >>> round(b.centers[0], 12), round(b.half_widths[0], 12)
    (-0.95, 0.05)
    """
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValidationError("bin range bounds must be finite")
    if lo >= hi:
        raise ValidationError(f"empty bin range: lo={lo} >= hi={hi}")
    if int(n_bins) != n_bins or n_bins < 1:
        raise ValidationError(f"number of bins must be a positive integer, got {n_bins}")
    n_bins = int(n_bins)
    width = (hi - lo) / n_bins
    centers = lo + (np.arange(1, n_bins + 1) - 0.5) * width
    return BinSpec(centers, np.full(n_bins, width / 2))


@dataclass(frozen=True, eq=False)
class SampleBatch:
    values: np.ndarray
    provenance: Provenance = Provenance.SYNTHETIC
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values))
        object.__setattr__(self, "provenance", Provenance(self.provenance))

    def __len__(self) -> int:
        return int(self.values.size)


def validate_samples(raw: Iterable[float], provenance=Provenance.FILE,
                     seed: Optional[int] = None) -> SampleBatch:
    values = np.asarray(list(raw), dtype=float).reshape(-1)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        i = int(bad[0])
        raise ValidationError(f"non-finite sample at index {i}: {values[i]!r}")
    return SampleBatch(values, provenance, seed)


@dataclass(frozen=True, eq=False)
class HistogramVector:
    values: np.ndarray
    normalization: Normalization
    n_samples: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values))
        object.__setattr__(self, "normalization", Normalization(self.normalization))
        if self.n_samples < 0:
            raise ValidationError("n_samples must be non-negative")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ValidationError("histogram values must be finite and non-negative")

    def __len__(self) -> int:
        return int(self.values.size)


def check_compatible(a: HistogramVector, b: HistogramVector) -> None:
    if len(a) != len(b):
        raise ValidationError(f"histogram lengths differ: {len(a)} vs {len(b)}")
    if a.normalization is not b.normalization:
        raise ValidationError(
            f"normalizations differ: {a.normalization.value} vs {b.normalization.value}")
