"""Fit a small generator so the soft histogram of its outputs matches a target.

The noise batch is drawn once and reused at every step, so the loss is a
deterministic function of the generator parameters. Bin centers and widths
stay fixed; only generator parameters are learned.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .core import (BinSpec, HistogramVector, Normalization, SampleBatch, ValidationError,
                   check_compatible)
from .kernels import Kernel, KernelKind, KernelParams, soft_histogram
from .oracle import BoundaryMode, hard_histogram, normalize
from .sampling import Distribution, SampleStream, synth

log = logging.getLogger(__name__)

Params = Dict[str, np.ndarray]


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class Generator:
    kind: str
    params: Params

    def __post_init__(self):
        if self.kind not in ("affine", "mlp"):
            raise ValidationError(f"unknown generator kind {self.kind!r}")
        self.params = {k: np.array(v, dtype=float) for k, v in self.params.items()}
        expected = {"affine": {"a", "b"}, "mlp": {"W1", "b1", "W2", "b2"}}[self.kind]
        if set(self.params) != expected:
            raise ValidationError(f"{self.kind} generator needs parameters {sorted(expected)}")
        if self.kind == "mlp" and self.params["W1"].size < 1:
            raise ValidationError("mlp generator needs at least one hidden unit")
        if not all(np.all(np.isfinite(v)) for v in self.params.values()):
            raise ValidationError("generator parameters must be finite")

    @classmethod
    def affine(cls, a: float = 1.0, b: float = 0.0) -> "Generator":
        return cls("affine", {"a": a, "b": b})

    @classmethod
    def mlp(cls, hidden: int = 8, seed: Optional[int] = 0, scale: float = 1.0) -> "Generator":
        if hidden < 1:
            raise ValidationError("mlp generator needs at least one hidden unit")
        rng = np.random.default_rng(seed)
        return cls("mlp", {
            "W1": scale * rng.standard_normal(hidden),
            "b1": 0.1 * rng.standard_normal(hidden),
            "W2": scale * rng.standard_normal(hidden) / np.sqrt(hidden),
            "b2": 0.0,
        })

    def copy(self) -> "Generator":
        return Generator(self.kind, {k: v.copy() for k, v in self.params.items()})

    def snapshot(self) -> dict:
        return {"kind": self.kind, "params": {k: v.tolist() for k, v in self.params.items()}}


def generator_forward(g: Generator, z) -> Tuple[np.ndarray, Params]:
    """Outputs for every noise value and dy/dparam with a leading sample axis."""
    z = np.asarray(z, dtype=float)
    p = g.params
    if g.kind == "affine":
        y = p["a"] * z + p["b"]
        return y, {"a": z.copy(), "b": np.ones_like(z)}
    pre = np.multiply.outer(z, p["W1"]) + p["b1"]
    hidden = np.tanh(pre)
    y = hidden @ p["W2"] + p["b2"]
    back = p["W2"] * (1.0 - hidden * hidden)   # dy/dpre
    return y, {
        "W1": back * z[..., None],
        "b1": back,
        "W2": hidden,
        "b2": np.ones_like(z),
    }


def histogram_loss(h: HistogramVector, target: HistogramVector,
                   loss: str = "l2") -> Tuple[float, np.ndarray]:
    check_compatible(h, target)
    diff = h.values - target.values
    if loss == "l2":
        return float(np.sum(diff * diff)), 2.0 * diff
    if loss == "l1":
        return float(np.sum(np.abs(diff))), np.sign(diff)
    raise ValidationError(f"unknown loss {loss!r}")


class SGD:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: Params, grads: Params) -> None:
        for k in params:
            params[k] -= self.lr * grads[k]


class Adam:
    def __init__(self, lr: float = 0.02, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: Params = {}
        self.v: Params = {}
        self.t = 0

    def step(self, params: Params, grads: Params) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k in params:
            g = grads[k]
            if k not in self.m:
                self.m[k] = np.zeros_like(params[k])
                self.v[k] = np.zeros_like(params[k])
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * (g * g)
            params[k] -= self.lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)


@dataclass
class TrainConfig:
    target: HistogramVector
    bins: BinSpec
    kernel: Kernel
    loss: str = "l2"
    noise: str = "uniform"        # uniform on (-1, 1) or standard normal
    noise_n: int = 1000
    seed: Optional[int] = 7
    optimizer: str = "adam"
    lr: float = 0.02
    steps: int = 2000
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def validate(self) -> None:
        if self.target.normalization is not Normalization.PROBABILITY:
            raise ValidationError("training target must be probability-normalized")
        if len(self.target) != self.bins.n_bins:
            raise ValidationError("target length does not match the bins")
        if float(np.sum(self.target.values)) > 1 + 1e-9:
            raise ValidationError("target probabilities sum to more than 1")
        if self.steps < 0:
            raise ValidationError("step count must be non-negative")
        if not (np.isfinite(self.lr) and self.lr >= 0):
            raise ValidationError("learning rate must be finite and non-negative")
        if self.loss not in ("l1", "l2"):
            raise ValidationError(f"unknown loss {self.loss!r}")
        if self.noise not in ("uniform", "normal"):
            raise ValidationError(f"unknown noise distribution {self.noise!r}")
        if self.optimizer not in ("sgd", "adam"):
            raise ValidationError(f"unknown optimizer {self.optimizer!r}")
        if self.noise_n < 1:
            raise ValidationError("noise batch must hold at least one sample")
        self.kernel.param_array(self.bins)

    def describe(self) -> dict:
        return {
            "bins": self.bins.to_dict(), "kernel": self.kernel.describe(), "loss": self.loss,
            "noise": self.noise, "noise_n": self.noise_n, "seed": self.seed,
            "optimizer": self.optimizer, "lr": self.lr, "steps": self.steps,
            "beta1": self.beta1, "beta2": self.beta2, "adam_eps": self.adam_eps,
        }


@dataclass
class TrainTrace:
    steps: List[int] = field(default_factory=list)
    losses: List[float] = field(default_factory=list)
    grad_norms: List[float] = field(default_factory=list)
    initial_params: dict = field(default_factory=dict)
    final_params: dict = field(default_factory=dict)
    target: List[float] = field(default_factory=list)
    initial_hist: List[float] = field(default_factory=list)
    final_hist: List[float] = field(default_factory=list)
    initial_histlayer: List[float] = field(default_factory=list)
    final_histlayer: List[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)

    def records(self):
        return list(zip(self.steps, self.losses, self.grad_norms))

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def noise_batch(config: TrainConfig) -> np.ndarray:
    if config.noise == "uniform":
        return synth(Distribution("uniform", lo=-1.0, hi=1.0), config.noise_n, config.seed).values
    return synth(Distribution("normal"), config.noise_n, config.seed).values


def loss_and_grad(g: Generator, z: np.ndarray, config: TrainConfig):
    """Loss, dL/dparams and the soft histogram of the generator outputs."""
    y, dy = generator_forward(g, z)
    h, hgrad = soft_histogram(y, config.bins, config.kernel, Normalization.PROBABILITY,
                              with_grad=True)
    loss, dl_dh = histogram_loss(h, config.target, config.loss)
    # d_dx already carries the 1/N of probability normalization
    dl_dy = hgrad.d_dx @ dl_dh
    grads = {k: np.tensordot(dl_dy, v, axes=(0, 0)) for k, v in dy.items()}
    return loss, grads, h


def _histlayer_view(g: Generator, z: np.ndarray, bins: BinSpec) -> List[float]:
    y, _ = generator_forward(g, z)
    return soft_histogram(y, bins, Kernel(KernelKind.HISTLAYER, KernelParams()),
                          Normalization.PROBABILITY).values.tolist()


def train(config: TrainConfig, g0: Generator) -> TrainTrace:
    """Full-batch gradient descent; records the loss before every update and after the last."""
    config.validate()
    z = noise_batch(config)
    g = g0.copy()
    if config.optimizer == "adam":
        opt = Adam(config.lr, config.beta1, config.beta2, config.adam_eps)
    else:
        opt = SGD(config.lr)

    trace = TrainTrace(initial_params=g0.snapshot(), target=config.target.values.tolist(),
                       initial_histlayer=_histlayer_view(g, z, config.bins))
    for step in range(config.steps + 1):
        loss, grads, h = loss_and_grad(g, z, config)
        gnorm = float(np.sqrt(sum(float(np.sum(v * v)) for v in grads.values())))
        if not (np.isfinite(loss) and np.isfinite(gnorm)):
            raise TrainingDiverged(f"non-finite loss or gradient at step {step}")
        trace.steps.append(step)
        trace.losses.append(loss)
        trace.grad_norms.append(gnorm)
        if step == 0:
            trace.initial_hist = h.values.tolist()
        if step == config.steps:
            trace.final_hist = h.values.tolist()
            break
        opt.step(g.params, grads)
        if not all(np.all(np.isfinite(v)) for v in g.params.values()):
            raise TrainingDiverged(f"non-finite generator parameters after step {step}")
        if step % 500 == 0:
            log.debug("step %d loss %.6g grad %.3g", step, loss, gnorm)

    trace.final_params = g.snapshot()
    trace.final_histlayer = _histlayer_view(g, z, config.bins)
    return trace


def target_from_distribution(dist: Distribution, bins: BinSpec, n: int = 100_000,
                             seed: Optional[int] = 12345,
                             boundary=BoundaryMode.RIGHT_OPEN_EDGES) -> HistogramVector:
    """Probability histogram of a synthetic distribution, binned by the hard oracle."""
    return normalize(hard_histogram(synth(dist, n, seed), bins, boundary),
                     Normalization.PROBABILITY)


def affine_target(bins: BinSpec, a: float = 0.5, b: float = 0.2, n: int = 100_000,
                  seed: Optional[int] = 12345,
                  boundary=BoundaryMode.RIGHT_OPEN_EDGES) -> HistogramVector:
    """Target made by pushing seeded uniform(-1, 1) noise through ``a z + b``."""
    z = 2.0 * SampleStream(seed).uniform(n) - 1.0
    return normalize(hard_histogram(SampleBatch(a * z + b, seed=seed), bins, boundary),
                     Normalization.PROBABILITY)
