"""Approximation error of soft histograms against the hard-binning oracle."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .core import (BinSpec, HistogramVector, Normalization, SampleBatch, ValidationError,
                   check_compatible)
from .kernels import Kernel, KernelKind, KernelParams, soft_histogram
from .oracle import BoundaryMode, bin_counts, hard_histogram, normalize, parse_boundary

DISPLAY_NAMES = {"lbf": "LBF", "rbf": "RBF", "kde": "KDE", "histlayer": "HistLayer"}


class Metric(str, enum.Enum):
    SUM_ABS = "sum_abs"
    MEAN_ABS = "mean_abs"


def absolute_error(soft: HistogramVector, hard: HistogramVector,
                   metric=Metric.SUM_ABS) -> float:
    check_compatible(soft, hard)
    total = float(np.sum(np.abs(soft.values - hard.values)))
    if Metric(metric) is Metric.MEAN_ABS:
        return total / len(soft)
    return total


def histlayer_error_bound(samples: SampleBatch, bins: BinSpec, base: float,
                          normalization=Normalization.COUNTS) -> float:
    """Largest possible HistLayer over-count against the open-interval oracle.

    Every in-bin sample votes at most ``base ** omega_k``, so the summed
    excess is at most ``sum_k c_k (base ** omega_k - 1)``.
    """
    counts = bin_counts(samples.values, bins, BoundaryMode.OPEN_INTERVAL)
    bound = float(np.sum(counts * np.expm1(bins.half_widths * np.log(base))))
    if Normalization(normalization) is Normalization.PROBABILITY:
        return bound / len(samples) if len(samples) else 0.0
    return bound


def check_histlayer_sandwich(samples: SampleBatch, bins: BinSpec, base: float,
                             rtol: float = 1e-12) -> bool:
    """c_k <= h_k <= c_k * base**omega_k for every bin (counts)."""
    counts = bin_counts(samples.values, bins, BoundaryMode.OPEN_INTERVAL).astype(float)
    h = soft_histogram(samples, bins, Kernel(KernelKind.HISTLAYER, KernelParams(base=base))).values
    upper = counts * np.power(base, bins.half_widths)
    return bool(np.all(counts <= h) and np.all(h <= upper * (1 + rtol)))


@dataclass
class ErrorRow:
    kernel: str
    params: dict
    absolute_error: float
    counts_error: float
    values: List[float]
    per_bin_error: List[float]

    @property
    def display_name(self) -> str:
        return DISPLAY_NAMES.get(self.kernel, self.kernel)


@dataclass
class ErrorReport:
    config: dict
    rows: List[ErrorRow]
    oracle: List[float]
    centers: List[float]
    histlayer_bounds: dict = field(default_factory=dict)

    def row(self, kernel: str) -> ErrorRow:
        for r in self.rows:
            if r.kernel == kernel:
                return r
        raise KeyError(kernel)

    def ordering(self) -> List[str]:
        return [r.kernel for r in self.rows]

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "rows": [{"kernel": r.kernel, "params": r.params,
                      "absolute_error": r.absolute_error, "counts_error": r.counts_error,
                      "values": r.values, "per_bin_error": r.per_bin_error}
                     for r in self.rows],
            "oracle": self.oracle,
            "centers": self.centers,
            "histlayer_bounds": self.histlayer_bounds,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ErrorReport":
        rows = [ErrorRow(r["kernel"], r["params"], r["absolute_error"], r["counts_error"],
                         r["values"], r["per_bin_error"]) for r in d["rows"]]
        return cls(d["config"], rows, d["oracle"], d["centers"], d.get("histlayer_bounds", {}))

    def to_text(self) -> str:
        metric = self.config["metric"]
        header = ("Differentiable Histogram", f"Absolute Error ({metric}, "
                  f"{self.config['normalization']})", "Absolute Error (counts)")
        body = [(r.display_name, f"{r.absolute_error:.6g}", f"{r.counts_error:.6g}")
                for r in self.rows]
        widths = [max(len(line[i]) for line in [header, *body]) for i in range(3)]
        fmt = lambda line: "  ".join(c.ljust(w) for c, w in zip(line, widths)).rstrip()
        rule = "-" * len(fmt(header))
        return "\n".join([fmt(header), rule, *map(fmt, body)]) + "\n"

    def per_bin_table(self) -> List[dict]:
        table = []
        by_kernel = {r.kernel: r.values for r in self.rows}
        for i, c in enumerate(self.centers):
            entry = {"bin_index": i, "center": c, "oracle": self.oracle[i]}
            for name in ("histlayer", "lbf", "rbf", "kde"):
                entry[name] = by_kernel[name][i] if name in by_kernel else ""
            table.append(entry)
        return table


def run_comparison(samples: SampleBatch, bins: BinSpec, kernels: Sequence[Kernel],
                   boundary=BoundaryMode.RIGHT_OPEN_EDGES,
                   normalization=Normalization.PROBABILITY, metric=Metric.SUM_ABS,
                   source: Optional[dict] = None) -> ErrorReport:
    """One error row per kernel, sorted by decreasing error.

    Raises ``AssertionError`` if a HistLayer row breaks its provable bound
    against the open-interval oracle.
    """
    if not kernels:
        raise ValidationError("no kernels to compare")
    boundary = parse_boundary(boundary)
    normalization = Normalization(normalization)
    metric = Metric(metric)

    hard_counts = hard_histogram(samples, bins, boundary)
    hard = normalize(hard_counts, normalization)
    open_counts = hard_histogram(samples, bins, BoundaryMode.OPEN_INTERVAL)

    rows, bounds = [], {}
    for kernel in kernels:
        soft_counts = soft_histogram(samples, bins, kernel, Normalization.COUNTS)
        soft = normalize(soft_counts, normalization)
        rows.append(ErrorRow(
            kernel=kernel.kind.value,
            params=kernel.describe()["params"],
            absolute_error=absolute_error(soft, hard, metric),
            counts_error=absolute_error(soft_counts, hard_counts, metric),
            values=soft.values.tolist(),
            per_bin_error=np.abs(soft.values - hard.values).tolist(),
        ))
        if kernel.kind is KernelKind.HISTLAYER:
            base = kernel.params.base
            bound = histlayer_error_bound(samples, bins, base, normalization)
            err_open = float(np.sum(np.abs(soft.values - normalize(open_counts, normalization).values)))
            if err_open > bound * (1 + 1e-9) + 1e-15 or not check_histlayer_sandwich(samples, bins, base):
                raise AssertionError(
                    f"histlayer error {err_open} exceeds its bound {bound} (base {base})")
            bounds[str(base)] = {"bound": bound, "error_vs_open_interval": err_open}

    rows.sort(key=lambda r: r.absolute_error, reverse=True)
    config = {
        "source": source or {"provenance": samples.provenance.value, "seed": samples.seed},
        "n_samples": len(samples),
        "bins": bins.to_dict(),
        "boundary": boundary.value,
        "normalization": normalization.value,
        "metric": metric.value,
    }
    return ErrorReport(config, rows, hard.values.tolist(), bins.centers.tolist(), bounds)
