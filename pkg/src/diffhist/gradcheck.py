"""Finite-difference certification of the analytic vote derivatives."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, Optional

import mpmath
import numpy as np

from .core import BinSpec, ValidationError
from .kernels import Kernel, KernelKind, vote

COORDINATES = ("x", "mu", "omega", "param")
DEFAULT_EPS = 1e-6
DEFAULT_EXCLUSION = 1e-4
DEFAULT_TOLERANCE = 1e-6
REL_FLOOR = 1e-12
# float64 differences whose rounding bound exceeds this relative size are redone in mpmath
ROUNDING_REFINE = 1e-7
_MP_DPS = 40


@dataclass
class GradCheckReport:
    kernel: str
    n_points: int
    max_rel_error: float
    worst_point: tuple           # (x, mu, omega, param)
    worst_coordinate: str
    epsilon: float
    exclusion_radius: float
    excluded_points: int
    refined_points: int = 0

    def passed(self, tol: float = DEFAULT_TOLERANCE) -> bool:
        return self.n_points > 0 and self.max_rel_error <= tol

    def to_dict(self) -> dict:
        d = asdict(self)
        d["worst_point"] = list(self.worst_point)
        return d


def central_difference(f: Callable, x, eps: float):
    return (f(x + eps) - f(x - eps)) / (2 * eps)


def sampling_plan(n: int, lo: float, hi: float, seed: int = 0) -> np.ndarray:
    """Jittered stratified points: one seeded uniform draw in each of n equal cells."""
    if n < 1:
        raise ValidationError("sampling plan needs at least one point")
    u = np.random.default_rng(seed).random(n)
    return lo + (np.arange(n) + u) * ((hi - lo) / n)


def _mp_vote_value(kind: KernelKind, x, mu, omega, param):
    x, mu, omega, param = (mpmath.mpf(float(v)) for v in (x, mu, omega, param))
    dist = abs(x - mu)
    if kind is KernelKind.HISTLAYER:
        z = mpmath.power(param, omega - dist)
        return z if z > 1 else mpmath.mpf(0)
    if kind is KernelKind.LBF:
        return max(mpmath.mpf(0), 1 - param * dist)
    if kind is KernelKind.RBF:
        return mpmath.exp(-(param * (x - mu)) ** 2)
    sig = lambda u: 1 / (1 + mpmath.exp(-u))
    return sig((x - mu + omega) / param) - sig((x - mu - omega) / param)


def _mp_central_difference(kind: KernelKind, args: list, coord: int, eps: float) -> float:
    with mpmath.workdps(_MP_DPS):
        hi, lo = list(args), list(args)
        h = mpmath.mpf(eps)
        hi[coord] = mpmath.mpf(float(args[coord])) + h
        lo[coord] = mpmath.mpf(float(args[coord])) - h
        return float((_mp_vote_value(kind, *hi) - _mp_vote_value(kind, *lo)) / (2 * h))


def distance_to_kinks(kind, x, mu, omega, param) -> np.ndarray:
    """Distance from x to the nearest point where the vote is not differentiable."""
    kind = KernelKind(kind)
    dist = np.abs(np.asarray(x, dtype=float) - mu)
    if kind is KernelKind.HISTLAYER:
        return np.minimum(dist, np.abs(dist - omega))
    if kind is KernelKind.LBF:
        return np.minimum(dist, np.abs(dist - 1.0 / param))
    return np.full(np.broadcast(dist, param).shape, np.inf)


def check_kernel(kernel: Kernel, bins: BinSpec, points: Optional[np.ndarray] = None, *,
                 n_points: int = 1000, lo: float = -1.2, hi: float = 1.2, seed: int = 0,
                 eps: float = DEFAULT_EPS,
                 exclusion_radius: float = DEFAULT_EXCLUSION) -> GradCheckReport:
    """Compare every analytic partial against central differences.

    Each sample point is paired with every bin; pairs closer than
    ``exclusion_radius`` to a kink of the kernel are skipped.
    """
    if eps <= 0:
        raise ValidationError("eps must be positive")
    if exclusion_radius <= eps:
        raise ValidationError("exclusion radius must exceed eps")
    if points is None:
        points = sampling_plan(n_points, lo, hi, seed)
    xs = np.asarray(points, dtype=float).reshape(-1)
    param = kernel.param_array(bins)
    shape = (xs.size, bins.n_bins)
    x = np.broadcast_to(xs[:, None], shape).ravel()
    mu = np.broadcast_to(bins.centers[None, :], shape).ravel()
    omega = np.broadcast_to(bins.half_widths[None, :], shape).ravel()
    p = np.broadcast_to(param[None, :], shape).ravel()

    keep = distance_to_kinks(kernel.kind, x, mu, omega, p) > exclusion_radius
    excluded = int(np.count_nonzero(~keep))
    if not keep.any():
        raise ValidationError("every sampled point was excluded; widen the plan")
    x, mu, omega, p = x[keep], mu[keep], omega[keep], p[keep]

    kind = kernel.kind
    args = [x, mu, omega, p]
    analytic = vote(kind, x, mu, omega, p)
    exact = (analytic.d_dx, analytic.d_dmu, analytic.d_domega, analytic.d_dparam)

    worst, worst_idx, worst_coord, refined = -1.0, 0, COORDINATES[0], 0
    for c, coord in enumerate(COORDINATES):
        def f(v, c=c):
            shifted = list(args)
            shifted[c] = v
            return vote(kind, *shifted).value
        upper, lower = f(args[c] + eps), f(args[c] - eps)
        numeric = np.atleast_1d((upper - lower) / (2 * eps))
        # worst-case float64 rounding in the two evaluations, scaled by the step
        noise = 4 * np.finfo(float).eps * np.maximum(np.abs(upper), np.abs(lower)) / (2 * eps)
        redo = np.flatnonzero(noise > ROUNDING_REFINE * np.maximum(np.abs(numeric), REL_FLOOR))
        for i in redo:
            numeric[i] = _mp_central_difference(kind, [a[i] for a in args], c, eps)
        refined += redo.size
        a_ = np.atleast_1d(exact[c])
        rel = np.abs(a_ - numeric) / np.maximum(np.maximum(np.abs(a_), np.abs(numeric)), REL_FLOOR)
        i = int(np.argmax(rel))
        if rel[i] > worst:
            worst, worst_idx, worst_coord = float(rel[i]), i, coord

    return GradCheckReport(
        kernel=kind.value,
        n_points=int(x.size),
        max_rel_error=worst,
        worst_point=(float(x[worst_idx]), float(mu[worst_idx]),
                     float(omega[worst_idx]), float(p[worst_idx])),
        worst_coordinate=worst_coord,
        epsilon=eps,
        exclusion_radius=exclusion_radius,
        excluded_points=excluded,
        refined_points=int(refined),
    )
