"""Exact Choquet integrals on finite supports."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distortion import DistortionFn, eval_distortion
from .errors import EnvRiskError, InvalidProbability, LengthMismatch, TooLarge
from .model import DiscreteDistribution

MAX_GROUND = 20
MAX_SUBMODULAR_GROUND = 12
CAP_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Capacity:
    """Monotone normalized set function on {0, ..., n-1}.

    ``values[mask]`` is the capacity of the subset whose members are the set
    bits of ``mask``.
    """

    ground_size: int
    values: np.ndarray

    def __post_init__(self):
        n = int(self.ground_size)
        if n < 1:
            raise EnvRiskError("capacity needs a non-empty ground set")
        if n > MAX_GROUND:
            raise TooLarge(f"ground size {n} exceeds {MAX_GROUND}")
        vals = np.array(self.values, dtype=float)
        if vals.shape != (1 << n,):
            raise LengthMismatch(f"expected {1 << n} subset values, got {vals.shape}")
        if vals[0] != 0.0 or abs(vals[-1] - 1.0) > CAP_TOL:
            raise EnvRiskError("capacity must vanish on the empty set and equal 1 on the ground set")
        masks = np.arange(1 << n)
        for i in range(n):
            bit = 1 << i
            without = masks[(masks & bit) == 0]
            if np.any(vals[without | bit] < vals[without] - CAP_TOL):
                raise EnvRiskError("capacity is not monotone")
        vals.setflags(write=False)
        object.__setattr__(self, "ground_size", n)
        object.__setattr__(self, "values", vals)

    def __call__(self, subset) -> float:
        """Capacity of an iterable of ground indices."""
        mask = 0
        for i in subset:
            mask |= 1 << int(i)
        return float(self.values[mask])

    @classmethod
    def additive(cls, p) -> "Capacity":
        return distort_probability(p, DistortionFn.identity())


def _subset_sums(p: np.ndarray) -> np.ndarray:
    n = p.size
    sums = np.zeros(1 << n)
    for i in range(n):
        lo = 1 << i
        sums[lo : 2 * lo] = sums[:lo] + p[i]
    return sums


def choquet_distorted(dist: DiscreteDistribution, g: DistortionFn) -> float:
    """Choquet integral of ``dist`` with respect to the distorted probability g∘P.

    Uses the sorted-increment form ``x_1 + sum_k (x_{k+1} - x_k) g(P(X > x_k))``,
    which is exact on a finite support.
    """
    x = dist.values
    if x.size == 1:
        return float(x[0])
    weights = eval_distortion(g, dist.survival_levels()[:-1])
    return float(x[0] + np.dot(np.diff(x), weights))


def choquet_capacity(x, cap: Capacity) -> float:
    """Choquet integral of the vector ``x`` (one entry per ground point)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (cap.ground_size,):
        raise LengthMismatch(f"x has length {x.size}, capacity ground size is {cap.ground_size}")
    order = np.argsort(-x, kind="stable")
    xs = x[order]
    masks = np.cumsum(1 << order)
    top = cap.values[masks]
    return float(np.dot(xs[:-1] - xs[1:], top[:-1]) + xs[-1] * top[-1])


def distort_probability(p, g: DistortionFn) -> Capacity:
    """The capacity A -> g(P(A)) for a probability vector ``p``."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise InvalidProbability("p must be a non-empty vector")
    if p.size > MAX_GROUND:
        raise TooLarge(f"ground size {p.size} exceeds {MAX_GROUND}")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
        raise InvalidProbability("p must be non-negative and sum to 1")
    sums = _subset_sums(p)
    vals = eval_distortion(g, np.clip(sums, 0.0, 1.0))
    vals[0] = 0.0
    vals[-1] = 1.0
    return Capacity(p.size, vals)


def is_submodular(cap: Capacity) -> bool:
    """cap(A ∪ B) + cap(A ∩ B) <= cap(A) + cap(B) for all A, B (within 1e-12).

    Checked through the equivalent local form
    cap(A+i) + cap(A+j) >= cap(A+i+j) + cap(A) for i, j outside A.
    """
    n = cap.ground_size
    if n > MAX_SUBMODULAR_GROUND:
        raise TooLarge(f"submodularity check limited to {MAX_SUBMODULAR_GROUND} points")
    v = cap.values
    masks = np.arange(1 << n)
    for i in range(n):
        for j in range(i + 1, n):
            bi, bj = 1 << i, 1 << j
            a = masks[(masks & (bi | bj)) == 0]
            lhs = v[a | bi | bj] + v[a]
            rhs = v[a | bi] + v[a | bj]
            if np.any(lhs > rhs + CAP_TOL):
                return False
    return True
