"""Desk-scale check of the nested dual representation.

For concave distortions the two-layer risk equals the largest repeated
expectation over pairs (Q1, Q2) in which Q1 is dominated by h∘P_Z and every
Q2(z, .) is dominated by g_z∘K_Z(z, .). On finite grounds the dominated
measures are probability vectors and domination is checked on every subset.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .choquet import _subset_sums
from .distortion import DistortionFn, StateFamilyRule, eval_distortion, is_concave
from .envmeasure import EnvMeasureSpec, env_risk
from .errors import EnvRiskError, LengthMismatch, NonConcave, NotDominated, TooLarge
from .model import ConditionalModel, DiscreteDistribution, build_distribution

DOMINATION_TOL = 1e-12
DUAL_TOL = 1e-9
MAX_DUAL_GROUND = 12


def greedy_core_measure(p, g: DistortionFn, x) -> np.ndarray:
    """Additive measure attaining the Choquet integral of ``x`` under g∘P.

    Points are ranked by decreasing ``x`` (ties keep index order) and each
    receives the increment of g along the cumulative probability.
    """
    p = np.asarray(p, dtype=float)
    x = np.asarray(x, dtype=float)
    if p.shape != x.shape:
        raise LengthMismatch("p and x must have the same length")
    if not is_concave(g):
        raise NonConcave(f"greedy measure needs a concave distortion, got {g.family}")
    order = np.argsort(-x, kind="stable")
    cum = np.clip(np.cumsum(p[order]), 0.0, 1.0)
    cum[-1] = 1.0
    gv = eval_distortion(g, cum)
    q = np.empty_like(p)
    q[order] = np.diff(np.concatenate([[0.0], gv]))
    return q


def _subset_matrix(n: int) -> np.ndarray:
    masks = np.arange(1 << n)
    return ((masks[:, None] >> np.arange(n)) & 1).astype(float)


def verify_dominated(q, p, g: DistortionFn) -> bool:
    """q(A) <= g(P(A)) + 1e-12 for every subset A."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if q.shape != p.shape:
        raise LengthMismatch("q and p must have the same length")
    if p.size > MAX_DUAL_GROUND:
        raise TooLarge(f"exhaustive domination check limited to {MAX_DUAL_GROUND} points")
    bound = eval_distortion(g, np.clip(_subset_sums(p), 0.0, 1.0))
    return bool(np.all(_subset_sums(q) <= bound + DOMINATION_TOL))


def _random_distortion(rng: np.random.Generator) -> DistortionFn:
    kind = rng.integers(0, 4)
    if kind == 0:
        return DistortionFn.identity()
    if kind == 1:
        return DistortionFn.avar(float(rng.uniform(0.05, 0.95)))
    if kind == 2:
        return DistortionFn.power(float(rng.uniform(0.2, 1.0)))
    k = int(rng.integers(1, 4))
    us = np.sort(rng.uniform(0.05, 0.95, size=k))
    widths = np.diff(np.concatenate([[0.0], us, [1.0]]))
    slopes = np.sort(rng.uniform(0.1, 3.0, size=k + 1))[::-1]
    gs = np.cumsum(widths * slopes)
    gs /= gs[-1]
    knots = [(0.0, 0.0)] + [(float(u), float(v)) for u, v in zip(us, gs[:-1])] + [(1.0, 1.0)]
    return DistortionFn.pwl(knots)


@dataclass(frozen=True, eq=False)
class TwoLayerFiniteModel:
    """Environment probabilities ``p`` with outer distortion ``h``; for each
    state z a conditional probability vector, a distortion and a loss vector."""

    p: np.ndarray
    cond_probs: tuple[np.ndarray, ...]
    h: DistortionFn
    g: tuple[DistortionFn, ...]
    x: tuple[np.ndarray, ...]

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        conds = tuple(np.asarray(c, dtype=float) for c in self.cond_probs)
        xs = tuple(np.asarray(v, dtype=float) for v in self.x)
        gs = tuple(self.g)
        m = p.size
        if not (len(conds) == len(xs) == len(gs) == m) or m == 0:
            raise LengthMismatch("one conditional, distortion and loss vector per state is required")
        if m > 8 or any(c.size > 8 for c in conds):
            raise TooLarge("finite dual models are limited to 8 states and 8 points per state")
        for vec in (p, *conds):
            if np.any(vec < 0) or abs(vec.sum() - 1.0) > 1e-12:
                raise EnvRiskError("probability vectors must be non-negative and sum to 1")
        for c, v in zip(conds, xs):
            if c.shape != v.shape:
                raise LengthMismatch("loss vector and conditional probabilities must align")
        if not is_concave(self.h) or not all(is_concave(d) for d in gs):
            raise NonConcave("dual model needs concave distortions")
        for name, val in (("p", p), ("cond_probs", conds), ("g", gs), ("x", xs)):
            object.__setattr__(self, name, val)

    @property
    def n_states(self) -> int:
        return self.p.size

    def conditional_model(self) -> ConditionalModel:
        conds = [build_distribution(v, c) for v, c in zip(self.x, self.cond_probs)]
        states = np.arange(self.n_states, dtype=float)
        return ConditionalModel(states, DiscreteDistribution(states, self.p), tuple(conds))

    def spec(self) -> EnvMeasureSpec:
        rule = StateFamilyRule.table([(float(i), d) for i, d in enumerate(self.g)], DistortionFn.identity())
        return EnvMeasureSpec(rule, self.h)

    def env_risk(self) -> float:
        return env_risk(self.conditional_model(), self.spec())

    @classmethod
    def random(cls, rng: np.random.Generator, max_states: int = 6, max_points: int = 6) -> "TwoLayerFiniteModel":
        m = int(rng.integers(1, max_states + 1))
        p = rng.dirichlet(np.ones(m))
        conds, gs, xs = [], [], []
        for _ in range(m):
            n = int(rng.integers(1, max_points + 1))
            conds.append(rng.dirichlet(np.ones(n)))
            gs.append(_random_distortion(rng))
            xs.append(rng.normal(0.0, 3.0, size=n) + rng.normal(0.0, 3.0))
        return cls(p, tuple(conds), _random_distortion(rng), tuple(gs), tuple(xs))


def dual_value(model: TwoLayerFiniteModel, Q1, Q2: Sequence) -> float:
    """Repeated expectation sum_z Q1(z) sum_w Q2(z, w) x[z][w] for a dominated pair."""
    Q1 = np.asarray(Q1, dtype=float)
    if Q1.shape != model.p.shape or len(Q2) != model.n_states:
        raise LengthMismatch("Q1 and Q2 must match the model's states")
    if not verify_dominated(Q1, model.p, model.h):
        raise NotDominated("Q1 is not dominated by h∘P_Z")
    inner = []
    for q2, c, g, x in zip(Q2, model.cond_probs, model.g, model.x):
        if not verify_dominated(q2, c, g):
            raise NotDominated("a conditional Q2 is not dominated by g_z∘K_Z")
        inner.append(float(np.dot(q2, x)))
    return float(np.dot(Q1, inner))


def nested_greedy(model: TwoLayerFiniteModel) -> tuple[np.ndarray, list[np.ndarray]]:
    Q2 = [greedy_core_measure(c, g, x) for c, g, x in zip(model.cond_probs, model.g, model.x)]
    profile = np.array([np.dot(q, x) for q, x in zip(Q2, model.x)])
    Q1 = greedy_core_measure(model.p, model.h, profile)
    return Q1, Q2


def sample_dominated(rng: np.random.Generator, p, g: DistortionFn, size: int, halvings: int = 40) -> np.ndarray:
    """``size`` random probability vectors dominated by g∘P (rows).

    Each draw starts from a random convex combination of greedy measures for
    random orderings (all dominated, and the dominated set is convex), then
    moves toward a Dirichlet draw by the largest factor t in {1, 1/2, 1/4, ...}
    that keeps domination. After ``halvings`` failures t = 0 is used.
    """
    p = np.asarray(p, dtype=float)
    n = p.size
    if n == 1:
        return np.ones((size, 1))
    bound = eval_distortion(g, np.clip(_subset_sums(p), 0.0, 1.0))
    S = _subset_matrix(n)

    def greedy_rows(orders: np.ndarray) -> np.ndarray:
        cum = np.clip(np.cumsum(p[orders], axis=1), 0.0, 1.0)
        cum[:, -1] = 1.0
        inc = np.diff(np.concatenate([np.zeros((size, 1)), eval_distortion(g, cum)], axis=1), axis=1)
        out = np.empty_like(inc)
        np.put_along_axis(out, orders, inc, axis=1)
        return out

    k = 3
    mix = rng.dirichlet(np.ones(k), size=size)
    base = sum(mix[:, [i]] * greedy_rows(np.argsort(rng.random((size, n)), axis=1)) for i in range(k))
    target = rng.dirichlet(np.ones(n), size=size)
    t = np.ones(size)
    done = np.zeros(size, dtype=bool)
    out = base.copy()
    for _ in range(halvings):
        cand = t[:, None] * target + (1.0 - t[:, None]) * base
        ok = np.all(cand @ S.T <= bound + DOMINATION_TOL, axis=1) & ~done
        out[ok] = cand[ok]
        done |= ok
        if done.all():
            break
        t = np.where(done, t, 0.5 * t)
    return out


@dataclass(frozen=True)
class DualReport:
    max_random_value: float
    attained_value: float
    env_risk_value: float

    @property
    def ok(self) -> bool:
        return (
            self.max_random_value <= self.env_risk_value + DUAL_TOL
            and abs(self.attained_value - self.env_risk_value) <= DUAL_TOL
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "max_random_value": self.max_random_value,
            "attained_value": self.attained_value,
            "env_risk_value": self.env_risk_value,
            "ok": self.ok,
        }


def dual_gap_check(model: TwoLayerFiniteModel, trials: int, seed: int) -> DualReport:
    """Weak duality on ``trials`` random dominated pairs plus attainment by
    the nested greedy pair."""
    if trials < 1:
        raise EnvRiskError("trials must be positive")
    rng = np.random.Generator(np.random.Philox(seed))
    Q1 = sample_dominated(rng, model.p, model.h, trials)
    inner = np.column_stack(
        [sample_dominated(rng, c, g, trials) @ x for c, g, x in zip(model.cond_probs, model.g, model.x)]
    )
    values = np.einsum("tz,tz->t", Q1, inner)
    gQ1, gQ2 = nested_greedy(model)
    return DualReport(float(values.max()), dual_value(model, gQ1, gQ2), model.env_risk())


def dual_suite(n_models: int, trials: int, seed: int, max_states: int = 6, max_points: int = 6) -> list[DualReport]:
    """Independent random models, each with its own child random stream."""
    children = np.random.SeedSequence(seed).spawn(n_models)
    reports = []
    for child in children:
        rng = np.random.Generator(np.random.Philox(child))
        model = TwoLayerFiniteModel.random(rng, max_states, max_points)
        reports.append(dual_gap_check(model, trials, int(rng.integers(0, 2**32))))
    return reports
