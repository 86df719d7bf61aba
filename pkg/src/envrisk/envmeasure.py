"""Two-layer distortion risk measures on conditional scenario models.

The inner layer evaluates the loss state by state with a state-dependent
distortion of the conditional law; the outer layer aggregates the resulting
risk profile with a distortion of the environment law.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .choquet import _subset_sums, choquet_distorted
from .distortion import DistortionFn, StateFamilyRule, is_concave, resolve_state
from .errors import (
    GridNotAttainable,
    IndexOutOfRange,
    LevelNotAttainable,
    NonConcaveSpec,
)
from .model import (
    Binning,
    ConditionalModel,
    DiscreteDistribution,
    ScenarioTable,
    build_conditional_model,
    build_distribution,
    point_mass,
)

StateFunctional = Callable[[DiscreteDistribution, float], float]


@dataclass(frozen=True)
class EnvMeasureSpec:
    """Inner per-state distortion rule plus outer environment distortion."""

    inner: StateFamilyRule
    outer: DistortionFn

    @classmethod
    def simple(cls, inner: DistortionFn, outer: DistortionFn) -> "EnvMeasureSpec":
        return cls(StateFamilyRule.constant(inner), outer)

    def to_json(self) -> dict[str, Any]:
        return {"inner": self.inner.to_json(), "outer": self.outer.to_json()}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "EnvMeasureSpec":
        return cls(StateFamilyRule.from_json(obj["inner"]), DistortionFn.from_json(obj["outer"]))

    def is_concave(self) -> bool:
        return is_concave(self.outer) and all(is_concave(d) for d in self.inner.distortions())


@dataclass(frozen=True, eq=False)
class RiskProfile:
    """State values, their probabilities and the inner risk in each state."""

    states: np.ndarray
    state_probs: np.ndarray
    values: np.ndarray

    def law(self) -> DiscreteDistribution:
        """Distribution of the inner risk under the environment law."""
        return build_distribution(self.values, self.state_probs)


def inner_risk(model: ConditionalModel, z_index: int, spec: EnvMeasureSpec) -> float:
    if not 0 <= z_index < model.n_states:
        raise IndexOutOfRange(f"state index {z_index} outside 0..{model.n_states - 1}")
    g = resolve_state(spec.inner, float(model.states[z_index]))
    return choquet_distorted(model.conditionals[z_index], g)


def risk_profile(model: ConditionalModel, spec: EnvMeasureSpec, max_workers: int | None = None) -> RiskProfile:
    idx = range(model.n_states)
    if max_workers and max_workers > 1 and model.n_states > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            vals = list(pool.map(lambda i: inner_risk(model, i, spec), idx))
    else:
        vals = [inner_risk(model, i, spec) for i in idx]
    return RiskProfile(model.states.copy(), model.probs.copy(), np.asarray(vals, dtype=float))


def outer_risk(profile: RiskProfile, outer: DistortionFn) -> float:
    """Outer Choquet aggregation of an already computed profile."""
    return choquet_distorted(profile.law(), outer)


def env_risk(model: ConditionalModel, spec: EnvMeasureSpec, max_workers: int | None = None) -> float:
    """Environment-wise risk: the outer distorted Choquet integral of the
    state-wise inner risks."""
    return outer_risk(risk_profile(model, spec, max_workers), spec.outer)


def env_risk_of_loss(table: ScenarioTable, x, spec: EnvMeasureSpec, binning: Binning | None = None) -> float:
    """Convenience: risk of loss column ``x`` on the scenarios of ``table``."""
    return env_risk(build_conditional_model(table.with_loss(x), binning), spec)


# -- recovery of distortions ------------------------------------------------


def state_functional(spec: EnvMeasureSpec) -> StateFunctional:
    """The inner risk of ``spec`` as a black-box functional of (law, state)."""

    def functional(dist: DiscreteDistribution, z: float) -> float:
        return choquet_distorted(dist, resolve_state(spec.inner, z))

    return functional


def recover_inner_distortion(
    model: ConditionalModel,
    z_index: int,
    blackbox: StateFunctional,
    grid: Sequence[float],
    m: int = 100,
) -> list[tuple[float, float]]:
    """Sample the distortion hidden in a state-wise risk functional.

    The state is augmented with an auxiliary variable U, uniform on
    {1/m, ..., 1} and independent of the loss. For each grid level u the
    functional is evaluated on the indicator loss 1{U > 1 - u}, whose
    conditional law is Bernoulli(u).
    """
    if not 0 <= z_index < model.n_states:
        raise IndexOutOfRange(f"state index {z_index} outside 0..{model.n_states - 1}")
    z = float(model.states[z_index])
    out = []
    for u in grid:
        u = float(u)
        j = round(u * m)
        if not 0.0 <= u <= 1.0 or abs(u * m - j) > 1e-9:
            raise GridNotAttainable(f"level {u} is not a multiple of 1/{m}")
        # count of grid atoms k/m with k/m > 1 - u, i.e. k > m - j
        law = build_distribution([0.0, 1.0], [m - j, j])
        out.append((u, float(blackbox(law, z))))
    return out


def _find_state_set(probs: np.ndarray, u: float, tol: float = 1e-12) -> np.ndarray:
    """Boolean mask of states whose total probability equals ``u``."""
    n = probs.size
    if u <= tol:
        return np.zeros(n, dtype=bool)
    if abs(u - 1.0) <= tol:
        return np.ones(n, dtype=bool)
    for order in (np.arange(n), np.argsort(-probs, kind="stable"), np.argsort(probs, kind="stable")):
        csum = np.cumsum(probs[order])
        hit = np.flatnonzero(np.abs(csum - u) <= tol)
        if hit.size:
            mask = np.zeros(n, dtype=bool)
            mask[order[: hit[0] + 1]] = True
            return mask
    if n <= 20:
        sums = _subset_sums(probs)
        hit = np.flatnonzero(np.abs(sums - u) <= tol)
        if hit.size:
            bits = int(hit[0])
            return np.array([(bits >> i) & 1 == 1 for i in range(n)])
    raise LevelNotAttainable(f"no set of states has probability {u}")


def recover_outer_distortion(
    model: ConditionalModel, spec: EnvMeasureSpec, levels: Sequence[float]
) -> list[tuple[float, float]]:
    """Sample the outer distortion by evaluating indicators of state sets.

    For each level u a set of states B with probability u is located and the
    two-layer risk of the loss 1_B(Z) is computed. Each state sees a constant
    loss, so the inner layer returns 0 or 1 regardless of the inner rule.
    """
    out = []
    for u in levels:
        mask = _find_state_set(model.probs, float(u))
        conds = [point_mass(1.0 if b else 0.0) for b in mask]
        indicator_model = ConditionalModel(model.states, model.state_probs, tuple(conds))
        out.append((float(u), env_risk(indicator_model, spec)))
    return out


# -- coherence property suite -----------------------------------------------

AXIOMS = ("monotonicity", "translation", "homogeneity", "subadditivity")
AXIOM_TOL = 1e-9


@dataclass
class CoherenceReport:
    trials: int
    violations: dict[str, int] = field(default_factory=lambda: dict.fromkeys(AXIOMS, 0))
    worst_slack: dict[str, float] = field(default_factory=lambda: dict.fromkeys(AXIOMS, math.inf))

    @property
    def ok(self) -> bool:
        return not any(self.violations.values())

    def record(self, axiom: str, slack: float, tol: float = AXIOM_TOL) -> None:
        """``slack`` is non-negative when the axiom holds exactly."""
        self.worst_slack[axiom] = min(self.worst_slack[axiom], slack)
        if slack < -tol:
            self.violations[axiom] += 1

    def to_json(self) -> dict[str, Any]:
        return {
            "trials": self.trials,
            "ok": self.ok,
            "violations": dict(self.violations),
            "worst_slack": dict(self.worst_slack),
        }


def random_scenarios(rng: np.random.Generator, n_rows: int, n_states: int, state_range=(0.05, 0.95)) -> ScenarioTable:
    """Random weighted table with ``n_states`` distinct environment values."""
    zvals = np.sort(rng.uniform(*state_range, size=n_states))
    z = np.concatenate([zvals, rng.choice(zvals, size=n_rows - n_states)])
    w = rng.uniform(0.1, 1.0, size=n_rows)
    x = rng.normal(0.0, 5.0, size=n_rows)
    return ScenarioTable(w, x, z)


def coherence_suite(seed: int, trials: int, spec: EnvMeasureSpec) -> CoherenceReport:
    """Randomized check of monotonicity, translation invariance, positive
    homogeneity and subadditivity of ``env_risk`` under ``spec``.

    Losses X and Y share one scenario table, so X + Y is well defined.
    """
    if not spec.is_concave():
        raise NonConcaveSpec("coherence suite needs concave inner and outer distortions")
    rng = np.random.default_rng(seed)
    report = CoherenceReport(trials)
    for _ in range(trials):
        n_states = int(rng.integers(1, 6))
        n_rows = int(rng.integers(n_states, n_states + 25))
        table = random_scenarios(rng, n_rows, n_states)
        x = table.x
        y = rng.normal(0.0, 5.0, size=n_rows)
        rho = lambda loss: env_risk_of_loss(table, loss, spec)  # noqa: E731
        rx, ry = rho(x), rho(y)

        bigger = x + rng.exponential(1.0, size=n_rows) * (rng.random(n_rows) < 0.7)
        report.record("monotonicity", rho(bigger) - rx)

        a = float(rng.normal(0.0, 10.0))
        report.record("translation", -abs(rho(x + a) - rx - a))

        c = float(rng.uniform(0.1, 10.0))
        scaled = rho(c * x)
        report.record("homogeneity", -abs(scaled - c * rx) / max(1.0, abs(c * rx)))

        report.record("subadditivity", rx + ry - rho(x + y))
    return report
