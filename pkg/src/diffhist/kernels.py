"""Soft-binning vote functions and their aggregation into histograms.

Four vote functions are provided, each returning its value together with
closed-form partial derivatives:

* ``histlayer`` -- ``phi(b ** (omega - |x - mu|))`` where ``phi`` keeps
  values strictly above 1 and zeroes everything else. Inside the open bin the
  vote lies in ``(1, b ** omega]``, outside it is exactly 0.
* ``lbf`` -- triangular (linear basis function) vote ``max(0, 1 - w |x - mu|)``.
* ``rbf`` -- Gaussian vote ``exp(-gamma**2 (x - mu)**2)``.
* ``kde`` -- difference of logistic sigmoids placed on the two bin edges,
  with bandwidth ``B``.

All vote functions broadcast over numpy arrays.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.special import expit

from .core import BinSpec, HistogramVector, Normalization, SampleBatch, ValidationError

DEFAULT_BASE = 1.01
KDE_BANDWIDTH_DIVISOR = 2.5


class KernelKind(str, enum.Enum):
    HISTLAYER = "histlayer"
    LBF = "lbf"
    RBF = "rbf"
    KDE = "kde"


@dataclass(frozen=True)
class VoteGradient:
    value: Union[float, np.ndarray]
    d_dx: Union[float, np.ndarray]
    d_dmu: Union[float, np.ndarray]
    d_domega: Union[float, np.ndarray]
    # derivative w.r.t. the kernel's own parameter (b, w, gamma or B)
    d_dparam: Union[float, np.ndarray]


def _scalarize(a):
    a = np.asarray(a)
    return float(a) if a.ndim == 0 else a


def _pack(value, d_dx, d_dmu, d_domega, d_dparam) -> VoteGradient:
    shape = np.broadcast_shapes(*(np.shape(a) for a in (value, d_dx, d_dmu, d_domega, d_dparam)))
    return VoteGradient(*(_scalarize(np.broadcast_to(a, shape).astype(float, copy=True))
                          for a in (value, d_dx, d_dmu, d_domega, d_dparam)))


def threshold_phi(z):
    """``z`` where ``z > 1``, otherwise 0."""
    z = np.asarray(z, dtype=float)
    return _scalarize(np.where(z > 1.0, z, 0.0))


def histlayer_vote(x, mu, omega, base: float = DEFAULT_BASE) -> VoteGradient:
    x, mu, omega = (np.asarray(a, dtype=float) for a in (x, mu, omega))
    diff = x - mu
    room = omega - np.abs(diff)
    raised = np.power(base, room)
    value = np.where(raised > 1.0, raised, 0.0)
    # sign(0) == 0 gives a zero subgradient at the bin center
    slope = np.log(base) * value
    s = np.sign(diff)
    return _pack(value, -s * slope, s * slope, slope, value * room / base)


def lbf_vote(x, mu, slope) -> VoteGradient:
    x, mu, slope = (np.asarray(a, dtype=float) for a in (x, mu, slope))
    diff = x - mu
    dist = np.abs(diff)
    value = np.maximum(0.0, 1.0 - slope * dist)
    active = value > 0.0
    d_dx = np.where(active, -slope * np.sign(diff), 0.0)
    d_dw = np.where(active, -dist, 0.0)
    return _pack(value, d_dx, -d_dx, np.zeros_like(value), d_dw)


def rbf_vote(x, mu, gamma) -> VoteGradient:
    x, mu, gamma = (np.asarray(a, dtype=float) for a in (x, mu, gamma))
    diff = x - mu
    value = np.exp(-(gamma * gamma) * (diff * diff))
    d_dx = -2.0 * gamma * gamma * diff * value
    d_dgamma = -2.0 * gamma * diff * diff * value
    return _pack(value, d_dx, -d_dx, np.zeros_like(value), d_dgamma)


def _dsigmoid(u):
    return expit(u) * expit(-u)


def kde_vote(x, mu, omega, bandwidth) -> VoteGradient:
    """Sigmoid-difference vote ``s((d + omega)/B) - s((d - omega)/B)``, ``d = x - mu``.

    Right of the center the value is evaluated through the mirrored form
    ``s(-(d - omega)/B) - s(-(d + omega)/B)``, which is the same quantity but
    avoids subtracting two numbers close to 1 in the far tail.
    """
    x, mu, omega, bandwidth = (np.asarray(a, dtype=float) for a in (x, mu, omega, bandwidth))
    diff = x - mu
    left = (diff + omega) / bandwidth
    right = (diff - omega) / bandwidth
    value = np.where(diff >= 0.0, expit(-right) - expit(-left), expit(left) - expit(right))
    ds_left = _dsigmoid(left)
    ds_right = _dsigmoid(right)
    d_dx = (ds_left - ds_right) / bandwidth
    d_domega = (ds_left + ds_right) / bandwidth
    d_dB = -(left * ds_left - right * ds_right) / bandwidth
    return _pack(value, d_dx, -d_dx, d_domega, d_dB)


def vote(kind, x, mu, omega, param) -> VoteGradient:
    """Evaluate any kernel with its own parameter passed positionally."""
    kind = KernelKind(kind)
    if kind is KernelKind.HISTLAYER:
        return histlayer_vote(x, mu, omega, param)
    if kind is KernelKind.LBF:
        return lbf_vote(x, mu, param)
    if kind is KernelKind.RBF:
        return rbf_vote(x, mu, param)
    return kde_vote(x, mu, omega, param)


def _per_bin(values, n_bins: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.size == 1:
        arr = np.full(n_bins, arr[0])
    if arr.size != n_bins:
        raise ValidationError(f"{name} needs one value per bin ({n_bins}), got {arr.size}")
    return arr


@dataclass(frozen=True)
class KernelParams:
    base: float = DEFAULT_BASE
    slopes: Optional[tuple] = None      # lbf, inverse sample units, per bin
    gammas: Optional[tuple] = None      # rbf, inverse sample units, per bin
    bandwidth: Optional[float] = None   # kde, sample units, shared


@dataclass(frozen=True)
class Kernel:
    kind: KernelKind
    params: KernelParams = field(default_factory=KernelParams)

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))

    def param_array(self, bins: BinSpec) -> np.ndarray:
        """The kernel's own parameter broadcast to one value per bin (validated)."""
        k = bins.n_bins
        p = self.params
        if self.kind is KernelKind.HISTLAYER:
            if not (math.isfinite(p.base) and p.base > 1.0):
                raise ValidationError(f"histlayer base must be > 1, got {p.base}")
            arr = np.full(k, float(p.base))
        elif self.kind is KernelKind.LBF:
            if p.slopes is None:
                raise ValidationError("lbf kernel needs slopes")
            arr = _per_bin(p.slopes, k, "lbf slopes")
        elif self.kind is KernelKind.RBF:
            if p.gammas is None:
                raise ValidationError("rbf kernel needs gammas")
            arr = _per_bin(p.gammas, k, "rbf gammas")
        else:
            if p.bandwidth is None:
                raise ValidationError("kde kernel needs a bandwidth")
            arr = np.full(k, float(p.bandwidth))
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise ValidationError(f"{self.kind.value} parameters must be finite and positive")
        return arr

    def describe(self) -> dict:
        p = self.params
        if self.kind is KernelKind.HISTLAYER:
            params = {"base": p.base}
        elif self.kind is KernelKind.LBF:
            params = {"slopes": list(p.slopes)}
        elif self.kind is KernelKind.RBF:
            params = {"gammas": list(p.gammas)}
        else:
            params = {"bandwidth": p.bandwidth}
        return {"kind": self.kind.value, "params": params}


def default_params(kind, bins: BinSpec) -> KernelParams:
    """Default parameters tied to the bin geometry.

    histlayer: b = 1.01. lbf: w = 1/omega, so each triangle is supported on
    its own bin. rbf: gamma = sqrt(ln 2)/omega, half maximum at the bin edges.
    kde: B = omega/2.5, which needs equal-width bins.
    """
    kind = KernelKind(kind)
    w = bins.half_widths
    if kind is KernelKind.HISTLAYER:
        return KernelParams(base=DEFAULT_BASE)
    if kind is KernelKind.LBF:
        return KernelParams(slopes=tuple((1.0 / w).tolist()))
    if kind is KernelKind.RBF:
        return KernelParams(gammas=tuple((math.sqrt(math.log(2.0)) / w).tolist()))
    if not bins.is_uniform():
        raise ValidationError("kde uses one shared bandwidth and needs uniform bins")
    return KernelParams(bandwidth=float(w[0]) / KDE_BANDWIDTH_DIVISOR)


def make_kernel(kind, bins: BinSpec, *, base=None, slope=None, gamma=None,
                bandwidth=None) -> Kernel:
    """Kernel with default parameters; an override only applies to its own kind."""
    kind = KernelKind(kind)
    if kind is KernelKind.HISTLAYER and base is not None:
        p = KernelParams(base=float(base))
    elif kind is KernelKind.LBF and slope is not None:
        p = KernelParams(slopes=tuple(_per_bin(slope, bins.n_bins, "lbf slopes").tolist()))
    elif kind is KernelKind.RBF and gamma is not None:
        p = KernelParams(gammas=tuple(_per_bin(gamma, bins.n_bins, "rbf gammas").tolist()))
    elif kind is KernelKind.KDE and bandwidth is not None:
        p = KernelParams(bandwidth=float(bandwidth))
    else:
        p = default_params(kind, bins)
    kernel = Kernel(kind, p)
    kernel.param_array(bins)
    return kernel


@dataclass(frozen=True)
class SoftHistogramGrad:
    """Partials of every bin value, already scaled by the normalization.

    ``d_dx[i, k]`` is dh_k/dx_i; the per-bin arrays are dh_k/dmu_k,
    dh_k/domega_k and dh_k/dparam_k.
    """
    d_dx: np.ndarray
    d_dmu: np.ndarray
    d_domega: np.ndarray
    d_dparam: np.ndarray


def ordered_sum(m: np.ndarray) -> np.ndarray:
    # axis-0 reduction adds rows one after another, i.e. ascending sample index
    return np.add.reduce(m, axis=0)


def vote_matrix(x: np.ndarray, bins: BinSpec, kernel: Kernel) -> VoteGradient:
    """Votes of every sample (rows) for every bin (columns)."""
    x = np.asarray(x, dtype=float).reshape(-1, 1)
    param = kernel.param_array(bins)
    return vote(kernel.kind, x, bins.centers[None, :], bins.half_widths[None, :], param[None, :])


def soft_histogram(samples, bins: BinSpec, kernel: Kernel,
                   normalization=Normalization.COUNTS, with_grad: bool = False):
    """Sum every sample's vote per bin.

    ``samples`` is a :class:`SampleBatch` or a flat float array. Returns a
    :class:`HistogramVector`, or ``(HistogramVector, SoftHistogramGrad)``
    when ``with_grad`` is set.
    """
    x = samples.values if isinstance(samples, SampleBatch) else np.asarray(samples, dtype=float).reshape(-1)
    normalization = Normalization(normalization)
    n = x.size
    k = bins.n_bins
    if n == 0:
        kernel.param_array(bins)
        values = np.zeros(k)
        grad = SoftHistogramGrad(np.zeros((0, k)), np.zeros(k), np.zeros(k), np.zeros(k))
    else:
        votes = vote_matrix(x, bins, kernel)
        values = ordered_sum(np.atleast_2d(votes.value))
        grad = None
        if with_grad:
            grad = SoftHistogramGrad(np.atleast_2d(votes.d_dx),
                                     ordered_sum(np.atleast_2d(votes.d_dmu)),
                                     ordered_sum(np.atleast_2d(votes.d_domega)),
                                     ordered_sum(np.atleast_2d(votes.d_dparam)))
        if normalization is Normalization.PROBABILITY:
            values = values / n
            if grad is not None:
                grad = SoftHistogramGrad(grad.d_dx / n, grad.d_dmu / n,
                                         grad.d_domega / n, grad.d_dparam / n)
    h = HistogramVector(values, normalization, n, meta={"kernel": kernel.kind.value})
    if with_grad:
        return h, grad
    return h
