"""VaR, AVaR, WVaR and RVaR on finite laws, computed from quantile breakpoints.

The quantile convention is the lower one, VaR_a(X) = inf{x : F(x) >= a}, so
VaR_t = x_k for t in (F(x_{k-1}), F(x_k)]. All level integrals below are
exact sums over those cells.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .distortion import JUMP_TOL, DistortionFn, StateFamilyRule
from .envmeasure import EnvMeasureSpec, env_risk
from .errors import DomainError, EnvRiskError
from .model import ConditionalModel, DiscreteDistribution, build_distribution


@dataclass(frozen=True, eq=False)
class LevelMeasure:
    """Finite probability measure on confidence levels in (0, 1)."""

    levels: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        lv = np.asarray(self.levels, dtype=float)
        wt = np.asarray(self.weights, dtype=float)
        if lv.size == 0 or lv.shape != wt.shape:
            raise EnvRiskError("level measure needs aligned, non-empty levels and weights")
        if np.any(lv <= 0) or np.any(lv >= 1):
            raise DomainError("levels must lie in the open interval (0, 1)")
        canon = build_distribution(lv, wt)
        object.__setattr__(self, "levels", canon.values)
        object.__setattr__(self, "weights", canon.probs)

    @classmethod
    def from_atoms(cls, atoms) -> "LevelMeasure":
        atoms = list(atoms)
        if not atoms:
            raise EnvRiskError("level measure needs at least one atom")
        lv, wt = zip(*atoms)
        return cls(lv, wt)

    @classmethod
    def point(cls, level: float) -> "LevelMeasure":
        return cls([level], [1.0])

    def to_json(self) -> dict[str, Any]:
        return {"atoms": [[float(a), float(w)] for a, w in zip(self.levels, self.weights)]}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "LevelMeasure":
        return cls.from_atoms(obj["atoms"])


def _check_level(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {alpha}")
    return alpha


def _cdf(dist: DiscreteDistribution) -> np.ndarray:
    F = np.cumsum(dist.probs)
    F[-1] = 1.0
    return F


def _cell_widths(dist: DiscreteDistribution, lo: float, hi: float) -> np.ndarray:
    """Length of (lo, hi] covered by each atom's quantile cell (F(x-), F(x)]."""
    F = _cdf(dist)
    Fprev = np.concatenate([[0.0], F[:-1]])
    return np.clip(np.minimum(hi, F) - np.maximum(lo, Fprev), 0.0, None)


def quantile_integral(dist: DiscreteDistribution, lo: float, hi: float) -> float:
    """Integral of VaR_t(X) over t in (lo, hi], 0 <= lo <= hi <= 1."""
    return float(np.dot(dist.values, _cell_widths(dist, lo, hi)))


def quantile_average(dist: DiscreteDistribution, lo: float, hi: float) -> float:
    """Mean of VaR_t(X) over t in (lo, hi], lo < hi.

    Increments above the smallest atom are averaged with the summed cell
    widths (hi - lo up to rounding), so constant losses come back exactly.
    """
    w = _cell_widths(dist, lo, hi)
    base = dist.values[0]
    return float(base + np.dot(dist.values - base, w) / w.sum())


def var(dist: DiscreteDistribution, alpha: float) -> float:
    """Lower quantile inf{x : F(x) >= alpha}.

    A cumulative level within 1e-12 of ``alpha`` counts as reaching it, so a
    level that is a rounded CDF breakpoint resolves the same way here and in
    the Choquet route with the VaR indicator distortion.
    """
    alpha = _check_level(alpha)
    k = int(np.searchsorted(_cdf(dist), alpha - JUMP_TOL, side="left"))
    return float(dist.values[min(k, len(dist) - 1)])


def var_right(dist: DiscreteDistribution, alpha: float) -> float:
    """Upper quantile inf{x : F(x) > alpha}."""
    alpha = _check_level(alpha)
    k = int(np.searchsorted(_cdf(dist), alpha + JUMP_TOL, side="right"))
    return float(dist.values[min(k, len(dist) - 1)])


def avar(dist: DiscreteDistribution, alpha: float) -> float:
    alpha = _check_level(alpha)
    return quantile_average(dist, alpha, 1.0)


def wvar(dist: DiscreteDistribution, nu: LevelMeasure) -> float:
    return float(sum(w * avar(dist, a) for a, w in zip(nu.levels, nu.weights)))


def rvar(dist: DiscreteDistribution, alpha1: float, alpha2: float) -> float:
    alpha1, alpha2 = _check_level(alpha1), _check_level(alpha2)
    if not alpha1 < alpha2:
        raise DomainError(f"need alpha1 < alpha2, got {alpha1} >= {alpha2}")
    return quantile_average(dist, alpha1, alpha2)


@dataclass(frozen=True)
class RecoveryReport:
    lhs: float
    rhs: float

    @property
    def delta(self) -> float:
        return abs(self.lhs - self.rhs)

    def to_json(self) -> dict[str, float]:
        return {"lhs": self.lhs, "rhs": self.rhs, "delta": self.delta}


def independent_model(x_dist: DiscreteDistribution, levels, weights) -> ConditionalModel:
    """Environment on the given levels, independent of the loss: every state
    carries the same conditional law."""
    return ConditionalModel.from_parts(levels, weights, [x_dist] * len(levels))


def wvar_recovery_check(x_dist: DiscreteDistribution, mu: LevelMeasure) -> RecoveryReport:
    """Two-layer risk with AVaR levels drawn from ``mu`` versus WVaR_mu."""
    model = independent_model(x_dist, mu.levels, mu.weights)
    clamp = (float(mu.levels.min()), float(mu.levels.max()))
    spec = EnvMeasureSpec(StateFamilyRule.level_from_state("avar", clamp), DistortionFn.identity())
    return RecoveryReport(env_risk(model, spec), wvar(x_dist, mu))


def rvar_levels(alpha1: float, alpha2: float, n_states: int) -> np.ndarray:
    """Midpoints of ``n_states`` equal cells of [alpha1, alpha2]."""
    k = np.arange(1, n_states + 1)
    return alpha1 + (k - 0.5) * (alpha2 - alpha1) / n_states


def rvar_recovery_check(x_dist: DiscreteDistribution, alpha1: float, alpha2: float, n_states: int) -> RecoveryReport:
    """Two-layer risk with VaR levels uniform on [alpha1, alpha2] (midpoint
    discretization) versus RVaR over the same range."""
    alpha1, alpha2 = _check_level(alpha1), _check_level(alpha2)
    if not alpha1 < alpha2:
        raise DomainError(f"need alpha1 < alpha2, got {alpha1} >= {alpha2}")
    if n_states < 1:
        raise DomainError("n_states must be positive")
    levels = rvar_levels(alpha1, alpha2, n_states)
    model = independent_model(x_dist, levels, np.full(n_states, 1.0 / n_states))
    spec = EnvMeasureSpec(StateFamilyRule.level_from_state("var", (alpha1, alpha2)), DistortionFn.identity())
    return RecoveryReport(env_risk(model, spec), rvar(x_dist, alpha1, alpha2))
