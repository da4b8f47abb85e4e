"""Seeded synthetic sample generation.

Uniform variates come from numpy's PCG64 bit generator; normals are made
with the basic Box-Muller transform, two uniforms per pair of normals.
Streams are reproducible bit for bit within this implementation.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .core import Provenance, SampleBatch, ValidationError

PRNG_NAME = "numpy.PCG64 + Box-Muller"


@dataclass(frozen=True)
class Distribution:
    name: str = "normal"
    mean: float = 0.0
    std: float = 1.0
    lo: float = -1.0
    hi: float = 1.0
    mean2: float = 1.0
    std2: float = 1.0
    mix: float = 0.5   # probability of the first component

    def validate(self) -> None:
        if self.name not in ("normal", "uniform", "bimodal"):
            raise ValidationError(f"unknown distribution {self.name!r}")
        values = [self.mean, self.std, self.lo, self.hi, self.mean2, self.std2, self.mix]
        if not all(math.isfinite(v) for v in values):
            raise ValidationError("distribution parameters must be finite")
        if self.name in ("normal", "bimodal") and self.std <= 0:
            raise ValidationError("std must be positive")
        if self.name == "bimodal" and self.std2 <= 0:
            raise ValidationError("std2 must be positive")
        if self.name == "uniform" and not self.lo < self.hi:
            raise ValidationError("uniform needs lo < hi")
        if not 0.0 <= self.mix <= 1.0:
            raise ValidationError("mix must lie in [0, 1]")

    def describe(self) -> dict:
        d = asdict(self)
        keep = {"normal": ("mean", "std"), "uniform": ("lo", "hi"),
                "bimodal": ("mean", "std", "mean2", "std2", "mix")}[self.name]
        return {"name": self.name, **{k: d[k] for k in keep}}


def box_muller(u1: np.ndarray, u2: np.ndarray):
    # u1 must lie in (0, 1]
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    return r * np.cos(theta), r * np.sin(theta)


class SampleStream:
    def __init__(self, seed: Optional[int]):
        self.rng = np.random.Generator(np.random.PCG64(seed))

    def uniform(self, n: int) -> np.ndarray:
        """n variates in [0, 1)."""
        return self.rng.random(n)

    def standard_normal(self, n: int) -> np.ndarray:
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        z1, z2 = box_muller(1.0 - u[:, 0], u[:, 1])
        return np.column_stack([z1, z2]).reshape(-1)[:n]


def synth(dist: Distribution, n: int, seed: Optional[int] = None) -> SampleBatch:
    if int(n) != n or n < 0:
        raise ValidationError(f"sample count must be a non-negative integer, got {n}")
    dist.validate()
    n = int(n)
    stream = SampleStream(seed)
    if dist.name == "normal":
        values = dist.mean + dist.std * stream.standard_normal(n)
    elif dist.name == "uniform":
        values = dist.lo + (dist.hi - dist.lo) * stream.uniform(n)
    else:
        first = stream.uniform(n) < dist.mix
        z = stream.standard_normal(n)
        values = np.where(first, dist.mean + dist.std * z, dist.mean2 + dist.std2 * z)
    return SampleBatch(values, Provenance.SYNTHETIC, seed)
