"""Seeded verification suites behind ``envrisk verify``."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .choquet import _subset_sums
from .background import SmoothConcaveG, build_hL_hR, random_joint_model, sandwich_check
from .classical import LevelMeasure, wvar_recovery_check
from .distortion import DistortionFn, StateFamilyRule, eval_distortion
from .dual import dual_suite
from .envmeasure import (
    EnvMeasureSpec,
    coherence_suite,
    recover_inner_distortion,
    recover_outer_distortion,
    state_functional,
)
from .model import ConditionalModel, build_distribution

SUITES = ("coherence", "dual", "recovery", "background")


@dataclass
class Check:
    name: str
    cases: int = 0
    violations: int = 0
    worst: float = 0.0

    def add(self, err: float, tol: float) -> None:
        """Record one case whose error magnitude is ``err``."""
        self.cases += 1
        self.worst = max(self.worst, float(err))
        if not err <= tol:
            self.violations += 1


@dataclass
class SuiteResult:
    suite: str
    checks: list[Check] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.violations == 0 for c in self.checks)

    def table(self) -> str:
        width = max(len(c.name) for c in self.checks)
        lines = [f"{'check':<{width}}  {'cases':>7}  {'violations':>10}  {'worst':>12}"]
        for c in self.checks:
            lines.append(f"{c.name:<{width}}  {c.cases:>7}  {c.violations:>10}  {c.worst:>12.3e}")
        lines.append(f"suite {self.suite}: {'PASS' if self.ok else 'FAIL'}")
        return "\n".join(lines)

    def to_json(self) -> dict[str, Any]:
        return {
            "suite": self.suite,
            "ok": self.ok,
            "checks": [vars(c).copy() for c in self.checks],
        }


COHERENCE_SPECS = (
    EnvMeasureSpec.simple(DistortionFn.identity(), DistortionFn.identity()),
    EnvMeasureSpec.simple(DistortionFn.avar(0.9), DistortionFn.avar(0.8)),
    EnvMeasureSpec(StateFamilyRule.level_from_state("avar", (0.05, 0.95)), DistortionFn.power(0.5)),
)


def describe(d: DistortionFn) -> str:
    if d.family == "identity":
        return "identity"
    if d.family in ("avar", "var"):
        return f"{d.family}({d.level:g})"
    if d.family == "power":
        return f"power({d.p:g})"
    return f"pwl({len(d.knots)} knots)"


def describe_rule(rule: StateFamilyRule) -> str:
    if rule.rule == "constant":
        return describe(rule.distortion)
    if rule.rule == "table":
        return f"table({len(rule.entries)} entries)"
    return f"{rule.family}(z in [{rule.clamp[0]:g}, {rule.clamp[1]:g}])"


def run_coherence(trials: int, seed: int) -> SuiteResult:
    result = SuiteResult("coherence")
    for i, spec in enumerate(COHERENCE_SPECS):
        rep = coherence_suite(seed + i, trials, spec)
        label = f"{describe_rule(spec.inner)} / {describe(spec.outer)}"
        for axiom, count in rep.violations.items():
            chk = Check(f"{axiom} [{label}]", rep.trials, count, max(0.0, -rep.worst_slack[axiom]))
            result.checks.append(chk)
    return result


def run_dual(trials: int, seed: int, n_models: int = 20) -> SuiteResult:
    weak = Check("weak duality (random dominated pairs)")
    attain = Check("attainment (nested greedy)")
    for rep in dual_suite(n_models, trials, seed):
        weak.add(max(0.0, rep.max_random_value - rep.env_risk_value), 1e-9)
        attain.add(abs(rep.attained_value - rep.env_risk_value), 1e-9)
    weak.cases = attain.cases = n_models
    return SuiteResult("dual", [weak, attain])


def random_distortion_any(rng: np.random.Generator) -> DistortionFn:
    """Any supported family, concave or not."""
    kind = int(rng.integers(0, 5))
    if kind == 0:
        return DistortionFn.identity()
    if kind == 1:
        return DistortionFn.avar(float(rng.uniform(0.05, 0.95)))
    if kind == 2:
        return DistortionFn.var(float(rng.uniform(0.05, 0.95)))
    if kind == 3:
        return DistortionFn.power(float(rng.uniform(0.1, 1.0)))
    return _random_pwl(rng)


def random_conditional_model(rng: np.random.Generator, max_states: int = 6, max_atoms: int = 8) -> ConditionalModel:
    m = int(rng.integers(1, max_states + 1))
    states = np.sort(rng.uniform(0.05, 0.95, size=m))
    probs = rng.dirichlet(np.ones(m))
    conds = []
    for _ in range(m):
        n = int(rng.integers(1, max_atoms + 1))
        conds.append(build_distribution(rng.normal(0, 5, size=n), rng.uniform(0.1, 1, size=n)))
    return ConditionalModel.from_parts(states, probs, conds)


FAMILY_SAMPLERS = {
    "identity": lambda rng: DistortionFn.identity(),
    "avar": lambda rng: DistortionFn.avar(float(rng.uniform(0.05, 0.95))),
    "var": lambda rng: DistortionFn.var(float(rng.uniform(0.05, 0.95))),
    "power": lambda rng: DistortionFn.power(float(rng.uniform(0.1, 1.0))),
    "pwl": lambda rng: _random_pwl(rng),
}


def _random_pwl(rng: np.random.Generator) -> DistortionFn:
    k = int(rng.integers(1, 5))
    us = np.sort(rng.uniform(0.02, 0.98, size=k))
    gs = np.sort(rng.uniform(0.0, 1.0, size=k))
    return DistortionFn.pwl([(0.0, 0.0), *zip(us.tolist(), gs.tolist()), (1.0, 1.0)])


def recovery_errors(model: ConditionalModel, d: DistortionFn, rng: np.random.Generator, m: int = 100) -> tuple[float, float]:
    """Max round-trip errors (inner, outer) of distortion ``d`` on ``model``."""
    grid = np.arange(m + 1) / m
    inner_spec = EnvMeasureSpec.simple(d, DistortionFn.identity())
    inner_err = 0.0
    for zi in range(model.n_states):
        got = recover_inner_distortion(model, zi, state_functional(inner_spec), grid, m)
        us = np.array([u for u, _ in got])
        vals = np.array([v for _, v in got])
        inner_err = max(inner_err, float(np.max(np.abs(vals - eval_distortion(d, us)))))

    outer_spec = EnvMeasureSpec.simple(random_distortion_any(rng), d)
    levels = np.unique(np.clip(_subset_sums(model.probs), 0.0, 1.0))
    got = recover_outer_distortion(model, outer_spec, levels)
    us = np.array([u for u, _ in got])
    vals = np.array([v for _, v in got])
    outer_err = float(np.max(np.abs(vals - eval_distortion(d, us))))
    return inner_err, outer_err


def run_recovery(trials: int, seed: int) -> SuiteResult:
    rng = np.random.default_rng(seed)
    inner = Check("inner distortion round-trip")
    outer = Check("outer distortion round-trip")
    wvar_chk = Check("WVaR recovery")
    for _ in range(trials):
        model = random_conditional_model(rng)
        for family, sampler in FAMILY_SAMPLERS.items():
            ie, oe = recovery_errors(model, sampler(rng), rng)
            inner.add(ie, 1e-12)
            outer.add(oe, 1e-12)
        k = int(rng.integers(1, 5))
        mu = LevelMeasure(rng.uniform(0.01, 0.99, size=k), rng.uniform(0.1, 1.0, size=k))
        x = build_distribution(rng.normal(0, 5, size=20), rng.uniform(0.1, 1, size=20))
        wvar_chk.add(wvar_recovery_check(x, mu).delta, 1e-10)
    return SuiteResult("recovery", [inner, outer, wvar_chk])


BACKGROUND_GS = (SmoothConcaveG.quadratic(), SmoothConcaveG.power(0.7))


def run_background(trials: int, seed: int) -> SuiteResult:
    rng = np.random.default_rng(seed)
    lower = Check("rho_R <= Gamma")
    upper = Check("Gamma <= rho_L")
    forms = Check("Gamma expectation form = L_s form")
    order = Check("h_L >= h_R at attainable levels")
    for _ in range(trials):
        model = random_joint_model(rng)
        for g in BACKGROUND_GS:
            rep = sandwich_check(model, g)
            lower.add(max(0.0, rep.rho_r - rep.gamma), 1e-9)
            upper.add(max(0.0, rep.gamma - rep.rho_l), 1e-9)
            forms.add(abs(rep.gamma - rep.gamma_ls), 1e-9)
            hh = build_hL_hR(model, g)
            order.add(max(0.0, float(np.max(hh.h_right - hh.h_left))), 1e-12)
    return SuiteResult("background", [lower, upper, forms, order])


def run_suite(name: str, trials: int, seed: int) -> SuiteResult:
    runners = {
        "coherence": run_coherence,
        "dual": run_dual,
        "recovery": run_recovery,
        "background": run_background,
    }
    if name not in runners:
        raise KeyError(name)
    return runners[name](trials, seed)
