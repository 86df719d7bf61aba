"""Risk of a derivative whose environment is a lognormal (one-period GBM) price.

Model: ln Z ~ N(mu, sigma^2) with mu = r - sigma^2 / 2, and given Z = z the
loss is N(1 - z, sigma2^2). The inner distortion is AVaR at level ``a`` and
the outer one AVaR at level ``b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy import integrate, special

from .distortion import DistortionFn
from .envmeasure import EnvMeasureSpec, env_risk
from .errors import DomainError
from .model import ConditionalModel, DiscreteDistribution


class NormalTable:
    """Standard normal cdf, survival, density and quantile."""

    @staticmethod
    def cdf(x):
        return special.ndtr(x)

    @staticmethod
    def sf(x):
        return special.ndtr(-np.asarray(x, dtype=float))

    @staticmethod
    def pdf(x):
        x = np.asarray(x, dtype=float)
        return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)

    @staticmethod
    def ppf(p):
        return special.ndtri(p)

    @staticmethod
    def isf(p):
        """Inverse survival; accurate where 1 - p would round away digits."""
        return -special.ndtri(p)

    @staticmethod
    def tail_integral(q: float) -> float:
        """Integral of 1 - Phi(x) over (q, inf), i.e. phi(q) - q (1 - Phi(q))."""
        return float(NormalTable.pdf(q) - q * NormalTable.sf(q))


N = NormalTable


@dataclass(frozen=True)
class GbmSpec:
    r: float = 0.05
    sigma: float = 0.2
    sigma2: float = 0.3
    a: float = 0.95
    b: float = 0.95
    multiple: float = 1.0

    def __post_init__(self):
        for name in ("r", "sigma", "sigma2", "a", "b", "multiple"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.sigma <= 0 or self.sigma2 <= 0:
            raise DomainError("sigma and sigma2 must be positive")
        if not (0 < self.a < 1 and 0 < self.b < 1):
            raise DomainError("distortion levels a and b must lie in (0, 1)")

    @property
    def mu(self) -> float:
        return self.r - 0.5 * self.sigma**2

    def inner_spec(self) -> EnvMeasureSpec:
        return EnvMeasureSpec.simple(DistortionFn.avar(self.a), DistortionFn.avar(self.b))


def _require_unit_multiple(spec: GbmSpec) -> None:
    if spec.multiple != 1.0:
        raise DomainError("closed form is only available for loss multiple 1")


def inner_constant(spec: GbmSpec) -> float:
    """delta: the inner risk at z = 0, so that inner risk at z is delta - z."""
    _require_unit_multiple(spec)
    q = float(N.ppf(spec.a))
    return 1.0 + spec.sigma2 * q + spec.sigma2 / (1.0 - spec.a) * N.tail_integral(q)


def inner_rho_z(z: float, spec: GbmSpec) -> float:
    """State-wise risk: AVaR_a of N(1 - z, sigma2^2)."""
    if not z > 0:
        raise DomainError(f"price state must be positive, got {z}")
    return inner_constant(spec) - z


def lower_tail_integral(spec: GbmSpec) -> float:
    """Integral of Phi(x) exp(sigma x) over (-inf, Phi^{-1}(1 - b)), adaptive."""
    qb = float(N.ppf(1.0 - spec.b))
    s = spec.sigma
    val, _ = integrate.quad(lambda x: N.cdf(x) * math.exp(s * x), -np.inf, qb, epsabs=1e-12, epsrel=1e-12, limit=200)
    return val


def closed_form_rho(spec: GbmSpec) -> float:
    qb = float(N.ppf(1.0 - spec.b))
    s = spec.sigma
    bracket = math.exp(s * qb) - s / (1.0 - spec.b) * lower_tail_integral(spec)
    return inner_constant(spec) - math.exp(spec.mu) * bracket


def delta_threshold(spec: GbmSpec) -> float:
    """Delta: below this level the distorted exceedance probability is 1."""
    qb = float(N.ppf(1.0 - spec.b))
    return inner_constant(spec) - math.exp(spec.mu + spec.sigma * qb)


def _distorted_exceedance_integral(spec: GbmSpec, lo: float, hi: float) -> float:
    """Integral over beta in [lo, hi] (Delta <= lo <= hi <= delta) of
    Phi((ln(delta - beta) - mu) / sigma) / (1 - b), with t = ln(delta - beta)."""
    delta = inner_constant(spec)
    if hi <= lo:
        return 0.0
    t_hi = math.log(delta - lo)
    t_lo = -np.inf if hi >= delta else math.log(delta - hi)
    mu, s = spec.mu, spec.sigma
    val, _ = integrate.quad(
        lambda t: N.cdf((t - mu) / s) * math.exp(t), t_lo, t_hi, epsabs=1e-13, epsrel=1e-13, limit=200
    )
    return val / (1.0 - spec.b)


def _exceedance(spec: GbmSpec, beta: float) -> float:
    """H(beta): distorted probability that the state-wise risk exceeds beta."""
    delta = inner_constant(spec)
    if beta >= delta:
        return 0.0
    p = float(N.cdf((math.log(delta - beta) - spec.mu) / spec.sigma))
    return min(p / (1.0 - spec.b), 1.0)


def outer_by_branch(spec: GbmSpec) -> dict[str, float]:
    """Outer Choquet integral computed two ways.

    ``literal`` integrates H directly in beta, split at zero into the
    negative part (H - 1) and the positive part H, whichever side Delta falls
    on. ``shifted`` uses Delta + integral of H over [Delta, delta] after the
    substitution t = ln(delta - beta).
    """
    delta = inner_constant(spec)
    big_delta = delta_threshold(spec)
    H = lambda beta: _exceedance(spec, beta)  # noqa: E731
    opts = dict(epsabs=1e-13, epsrel=1e-13, limit=400)

    negative = 0.0
    if big_delta < 0:
        hi = min(delta, 0.0)
        negative += integrate.quad(lambda b: H(b) - 1.0, big_delta, hi, **opts)[0]
        negative -= 0.0 - hi
    positive = 0.0
    if delta > 0:
        lo = max(big_delta, 0.0)
        positive += lo
        positive += integrate.quad(H, lo, delta, **opts)[0]
    literal = negative + positive

    shifted = big_delta + _distorted_exceedance_integral(spec, big_delta, delta)
    return {"Delta": big_delta, "literal": literal, "shifted": shifted}


# -- discretized pipeline ---------------------------------------------------

CONDITIONAL_ATOMS = 400
TRUNCATION = 8.0


def normal_cell_means(n_atoms: int = CONDITIONAL_ATOMS, width: float = TRUNCATION) -> DiscreteDistribution:
    """Standard normal on [-width, width] cut into ``n_atoms`` equal cells,
    each represented by its conditional mean and carrying its probability.

    The left half is computed from lower-tail probabilities and mirrored, so
    the law is exactly symmetric and free of cancellation in the upper tail.
    """
    if n_atoms < 2 or n_atoms % 2:
        raise DomainError("n_atoms must be an even number >= 2")
    edges = np.linspace(-width, 0.0, n_atoms // 2 + 1)
    mass = np.diff(N.cdf(edges))
    means = (N.pdf(edges[:-1]) - N.pdf(edges[1:])) / mass
    values = np.concatenate([means, -means[::-1]])
    probs = np.concatenate([mass, mass[::-1]])
    return DiscreteDistribution(values, probs / probs.sum())


def lognormal_states(spec: GbmSpec, n_states: int) -> np.ndarray:
    levels = (np.arange(1, n_states + 1) - 0.5) / n_states
    return np.exp(spec.mu + spec.sigma * N.ppf(levels))


def pipeline_model(spec: GbmSpec, n_states: int, n_atoms: int = CONDITIONAL_ATOMS) -> ConditionalModel:
    if n_states < 1:
        raise DomainError("n_states must be positive")
    base = normal_cell_means(n_atoms)
    zs = lognormal_states(spec, n_states)
    scaled = base.values * spec.sigma2
    conds = [DiscreteDistribution(scaled + spec.multiple * (1.0 - z), base.probs) for z in zs]
    return ConditionalModel.from_parts(zs, np.full(n_states, 1.0 / n_states), conds)


def pipeline_rho(spec: GbmSpec, n_states: int = 2000, seed: int = 0, n_atoms: int = CONDITIONAL_ATOMS) -> float:
    """Two-layer risk of the discretized model through the generic engine.

    The discretization is deterministic; ``seed`` is accepted for interface
    symmetry with the other drivers and does not affect the value.
    """
    if n_states < 100:
        raise DomainError("pipeline needs at least 100 environment states")
    return env_risk(pipeline_model(spec, n_states, n_atoms), spec.inner_spec())


def convergence_table(spec: GbmSpec, n_list: Sequence[int] = (100, 250, 500, 1000, 2000)) -> list[dict[str, float]]:
    exact = closed_form_rho(spec)
    rows = []
    for n in n_list:
        approx = pipeline_rho(spec, n)
        rows.append({"n_states": n, "pipeline": approx, "closed_form": exact, "rel_error": abs(approx - exact) / abs(exact)})
    return rows


@dataclass(frozen=True)
class MonotonicityReport:
    r_grid: tuple[float, ...]
    values: tuple[float, ...]

    @property
    def ok(self) -> bool:
        return all(b < a - 1e-10 for a, b in zip(self.values, self.values[1:]))


def r_monotonicity_check(base: GbmSpec, r_grid: Sequence[float]) -> MonotonicityReport:
    """Closed-form risk along increasing return rates."""
    grid = [float(r) for r in r_grid]
    if len(grid) < 2 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise DomainError("r_grid must hold at least two strictly increasing rates")
    vals = tuple(closed_form_rho(replace(base, r=r)) for r in grid)
    return MonotonicityReport(tuple(grid), vals)
