"""HistLayer built from elementary layer operations.

Per bin ``k`` a sample goes through six stages::

    x -> x - mu_k -> |.| -> omega_k - (.) -> b ** (.) -> threshold at 1 -> pool

Stages 1 and 3 are per-bin affine maps (unit weight / bias ``-mu_k``, then
weight ``-1`` / bias ``omega_k``), i.e. 1x1 convolutions with fixed weights.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .core import BinSpec, SampleBatch
from .kernels import DEFAULT_BASE, KernelParams, Kernel, KernelKind, ordered_sum, soft_histogram


class StageKind(str, enum.Enum):
    CENTER_SHIFT = "center_shift"
    ABSOLUTE = "absolute"
    NEGATE_PLUS_WIDTH = "negate_plus_width"
    EXPONENTIATE = "exponentiate_base_b"
    THRESHOLD = "threshold_at_one"
    POOL = "pool_sum"


STAGE_ORDER = tuple(StageKind)


@dataclass(frozen=True)
class PipelineStage:
    kind: StageKind
    weight: Optional[np.ndarray] = None
    bias: Optional[np.ndarray] = None
    base: Optional[float] = None
    average: bool = False

    def apply(self, t: np.ndarray) -> np.ndarray:
        """Map an (N, K) stage input to its output; POOL reduces over samples."""
        if self.kind in (StageKind.CENTER_SHIFT, StageKind.NEGATE_PLUS_WIDTH):
            return self.weight[None, :] * t + self.bias[None, :]
        if self.kind is StageKind.ABSOLUTE:
            return np.abs(t)
        if self.kind is StageKind.EXPONENTIATE:
            return np.power(self.base, t)
        if self.kind is StageKind.THRESHOLD:
            return np.where(t > 1.0, t, 0.0)
        pooled = ordered_sum(t) if t.shape[0] else np.zeros(t.shape[1])
        if self.average and t.shape[0]:
            pooled = pooled / t.shape[0]
        return pooled


def build_pipeline(bins: BinSpec, base: float = DEFAULT_BASE,
                   average: bool = False) -> List[PipelineStage]:
    k = bins.n_bins
    return [
        PipelineStage(StageKind.CENTER_SHIFT, weight=np.ones(k), bias=-bins.centers),
        PipelineStage(StageKind.ABSOLUTE),
        PipelineStage(StageKind.NEGATE_PLUS_WIDTH, weight=-np.ones(k), bias=bins.half_widths.copy()),
        PipelineStage(StageKind.EXPONENTIATE, base=float(base)),
        PipelineStage(StageKind.THRESHOLD),
        PipelineStage(StageKind.POOL, average=average),
    ]


def trace(stages: List[PipelineStage], x) -> List[np.ndarray]:
    """Outputs of every stage, first the five (N, K) maps then the pooled K-vector."""
    if [s.kind for s in stages] != list(STAGE_ORDER):
        raise ValueError("pipeline stages are out of order")
    t = np.broadcast_to(np.asarray(x, dtype=float).reshape(-1, 1),
                        (np.size(x), stages[0].bias.size))
    outputs = []
    for stage in stages:
        t = stage.apply(t)
        outputs.append(t)
    return outputs


def run_pipeline(stages: List[PipelineStage], x) -> np.ndarray:
    return trace(stages, x)[-1]


def pipeline_equivalence_check(samples: SampleBatch, bins: BinSpec,
                               base: float = DEFAULT_BASE) -> float:
    """Largest per-bin gap between the staged pipeline and the direct histlayer sum."""
    staged = run_pipeline(build_pipeline(bins, base), samples.values)
    direct = soft_histogram(samples, bins, Kernel(KernelKind.HISTLAYER, KernelParams(base=base)))
    return float(np.max(np.abs(staged - direct.values)))
