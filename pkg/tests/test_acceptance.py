"""Acceptance gate: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are printed even
when output is captured) or directly with ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from envrisk.background import build_hL_hR, random_joint_model, sandwich_check
from envrisk.background import SmoothConcaveG
from envrisk.choquet import choquet_distorted
from envrisk.classical import LevelMeasure, avar, rvar_recovery_check, var, wvar_recovery_check
from envrisk.distortion import DistortionFn, StateFamilyRule
from envrisk.dual import dual_suite
from envrisk.envmeasure import EnvMeasureSpec, coherence_suite, env_risk, risk_profile
from envrisk.gbm import GbmSpec, N, closed_form_rho, pipeline_rho, r_monotonicity_check
from envrisk.model import ScenarioTable, build_conditional_model, build_distribution, check_comonotone
from envrisk.suites import FAMILY_SAMPLERS, random_conditional_model, recovery_errors


def _line(number: int, title: str, ok: bool, detail: str) -> str:
    return f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})"


# -- 1. coherence -------------------------------------------------------------

COHERENT_SPECS = (
    EnvMeasureSpec.simple(DistortionFn.avar(0.9), DistortionFn.avar(0.8)),
    EnvMeasureSpec.simple(DistortionFn.power(0.5), DistortionFn.pwl([(0, 0), (0.2, 0.5), (1, 1)])),
    EnvMeasureSpec(StateFamilyRule.level_from_state("avar", (0.05, 0.95)), DistortionFn.power(0.7)),
)


def criterion_1():
    t0 = time.perf_counter()
    worst = {}
    violations = 0
    for i, spec in enumerate(COHERENT_SPECS):
        rep = coherence_suite(7 + i, 500, spec)
        violations += sum(rep.violations.values())
        for axiom, slack in rep.worst_slack.items():
            worst[axiom] = min(worst.get(axiom, math.inf), slack)
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 10.0
    detail = f"{len(COHERENT_SPECS)}x500 models, {violations} violations, worst slack {min(worst.values()):.1e}, {elapsed:.1f}s"
    return ok, detail


# -- 2. comonotonic additivity ------------------------------------------------

ADDITIVITY_SPECS = (
    EnvMeasureSpec.simple(DistortionFn.avar(0.8), DistortionFn.power(0.6)),
    EnvMeasureSpec(StateFamilyRule.level_from_state("var", (0.1, 0.9)), DistortionFn.var(0.4)),
    EnvMeasureSpec.simple(DistortionFn.pwl([(0, 0), (0.3, 0.1), (1, 1)]), DistortionFn.identity()),
    EnvMeasureSpec(StateFamilyRule.level_from_state("avar", (0.05, 0.95)), DistortionFn.avar(0.5)),
)
STRICT_SPEC = EnvMeasureSpec.simple(DistortionFn.power(0.5), DistortionFn.power(0.5))


def _coupled_table(rng):
    n_rows = int(rng.integers(5, 60))
    n_states = int(rng.integers(1, 6))
    z = rng.integers(0, n_states, size=n_rows).astype(float)
    return ScenarioTable(rng.uniform(0.1, 1.0, size=n_rows), np.zeros(n_rows), z), z.astype(int), n_states


def comonotone_case(rng):
    """Losses that are non-decreasing functions of one within-state score,
    shifted per state along a common ranking wider than the within-state
    spread: comonotone in every state and with comonotone profiles."""
    table, zi, n_states = _coupled_table(rng)
    score = rng.uniform(size=zi.size)
    rank = rng.permutation(n_states).astype(float)
    a, b = rng.uniform(0.5, 3.0, size=2)
    x = a * score**2 + 10.0 * rank[zi]
    y = b * np.exp(score) + 20.0 * rank[zi]
    return table, x, y


def criterion_2():
    rng = np.random.default_rng(2)
    worst_state = worst_env = 0.0
    profiles_comonotone = True
    for i in range(500):
        table, x, y = comonotone_case(rng)
        spec = ADDITIVITY_SPECS[i % len(ADDITIVITY_SPECS)]
        models = [build_conditional_model(table.with_loss(v)) for v in (x, y, x + y)]
        px, py, ps = (risk_profile(m, spec).values for m in models)
        profiles_comonotone &= check_comonotone(px, py)
        worst_state = max(worst_state, float(np.max(np.abs(ps - px - py))))
        ex, ey, es = (env_risk(m, spec) for m in models)
        worst_env = max(worst_env, abs(es - ex - ey))

    strict = 0
    for _ in range(100):
        table, _, _ = _coupled_table(rng)
        x = rng.normal(0.0, 3.0, size=len(table))
        y = -x
        ex, ey, es = (env_risk(build_conditional_model(table.with_loss(v)), STRICT_SPEC) for v in (x, y, x + y))
        if ex + ey - es > 0:
            strict += 1
    ok = worst_state <= 1e-10 and worst_env <= 1e-10 and profiles_comonotone and strict >= 95
    detail = (
        f"500 comonotone pairs: state-wise {worst_state:.1e}, environment-wise {worst_env:.1e}; "
        f"{strict}/100 anti-comonotone pairs strictly subadditive"
    )
    return ok, detail


# -- 3. WVaR / RVaR recovery -------------------------------------------------


def _random_x(rng, n=None):
    n = int(rng.integers(1, 60)) if n is None else n
    return build_distribution(rng.normal(0.0, 5.0, size=n), rng.uniform(0.1, 1.0, size=n))


def aligned_rvar_case(rng):
    """Equally weighted atoms with level range and cells on the 1/n grid, so
    every cell lies inside one quantile step and the midpoint rule is exact."""
    n_atoms = int(rng.integers(2, 40))
    x = build_distribution(rng.permutation(n_atoms) + rng.normal(0, 0.1, size=n_atoms), np.ones(n_atoms))
    k1 = int(rng.integers(1, n_atoms))
    k2 = int(rng.integers(k1 + 1, n_atoms + 1)) if k1 + 1 < n_atoms else n_atoms
    if k2 == n_atoms:  # keep alpha2 < 1
        k1, k2 = (k1 - 1, k1) if k1 > 1 else (k1, k1 + 1)
    if k2 >= n_atoms:
        return None
    cells = (k2 - k1) * int(rng.integers(1, 6))
    return x, k1 / n_atoms, k2 / n_atoms, cells


def criterion_3():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    wvar_worst = 0.0
    for _ in range(50):
        k = int(rng.integers(1, 6))
        mu = LevelMeasure(rng.uniform(0.01, 0.99, size=k), rng.uniform(0.1, 1.0, size=k))
        wvar_worst = max(wvar_worst, wvar_recovery_check(_random_x(rng), mu).delta)

    rvar_worst = 0.0
    for _ in range(20):
        a1 = float(rng.uniform(0.01, 0.8))
        a2 = float(rng.uniform(a1 + 0.05, 0.99))
        rvar_worst = max(rvar_worst, rvar_recovery_check(_random_x(rng), a1, a2, 4000).delta)

    exact_worst = 0.0
    exact_cases = 0
    while exact_cases < 20:
        case = aligned_rvar_case(rng)
        if case is None:
            continue
        exact_worst = max(exact_worst, rvar_recovery_check(*case).delta)
        exact_cases += 1
    elapsed = time.perf_counter() - t0
    ok = wvar_worst < 1e-10 and rvar_worst < 1e-3 and exact_worst < 1e-12 and elapsed < 30.0
    detail = (
        f"WVaR 50 cases max {wvar_worst:.1e}; RVaR n=4000 20 cases max {rvar_worst:.1e}; "
        f"aligned cells 20 cases max {exact_worst:.1e}; {elapsed:.1f}s"
    )
    return ok, detail


# -- 4. GBM closed form -------------------------------------------------------


def _gauss_legendre(f, lo, hi, panels, order=20):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    mids, halves = 0.5 * (edges[:-1] + edges[1:]), 0.5 * np.diff(edges)
    pts = mids[:, None] + halves[:, None] * x[None, :]
    return float(np.sum(halves[:, None] * w[None, :] * f(pts)))


def quadrature_oracle(spec: GbmSpec, panels: int) -> float:
    q, qb, s = float(N.ppf(spec.a)), float(N.ppf(1 - spec.b)), spec.sigma
    upper = _gauss_legendre(N.sf, q, q + 40.0, panels)
    lower = _gauss_legendre(lambda t: N.cdf(t) * np.exp(s * t), qb - 40.0, qb, panels)
    delta = 1 + spec.sigma2 * q + spec.sigma2 / (1 - spec.a) * upper
    return delta - math.exp(spec.mu) * (math.exp(s * qb) - s / (1 - spec.b) * lower)


def criterion_4():
    t0 = time.perf_counter()
    spec = GbmSpec(r=0.05, sigma=0.2, sigma2=0.3, a=0.95, b=0.95)
    exact = closed_form_rho(spec)
    single, double = quadrature_oracle(spec, 200), quadrature_oracle(spec, 400)
    oracle_err = abs(exact - double)
    pipe_err = abs(pipeline_rho(spec, 2000) - exact) / abs(exact)
    mono = r_monotonicity_check(spec, [-0.05, 0.0, 0.05, 0.1])
    elapsed = time.perf_counter() - t0
    ok = oracle_err <= 1e-8 and abs(single - double) <= 1e-8 and pipe_err < 5e-3 and mono.ok and elapsed < 60.0
    vals = ", ".join(f"{v:.6f}" for v in mono.values)
    detail = (
        f"closed form {exact:.10f}, oracle gap {oracle_err:.1e}; pipeline rel {pipe_err:.1e}; "
        f"r-grid values [{vals}]; {elapsed:.1f}s"
    )
    return ok, detail


# -- 5. background risk -------------------------------------------------------


def criterion_5():
    rng = np.random.default_rng(11)
    gs = (SmoothConcaveG.quadratic(), SmoothConcaveG.power(0.7))
    worst_sandwich = worst_forms = worst_order = -math.inf
    for _ in range(200):
        model = random_joint_model(rng)
        for g in gs:
            rep = sandwich_check(model, g)
            worst_sandwich = max(worst_sandwich, rep.rho_r - rep.gamma, rep.gamma - rep.rho_l)
            worst_forms = max(worst_forms, abs(rep.gamma - rep.gamma_ls))
            t = build_hL_hR(model, g)
            worst_order = max(worst_order, float(np.max(t.h_right - t.h_left)))
    ok = worst_sandwich <= 1e-9 and worst_forms <= 1e-9 and worst_order <= 1e-12
    detail = (
        f"200 models x 2 g: max sandwich excess {worst_sandwich:.1e}, "
        f"Gamma form gap {worst_forms:.1e}, max h_R - h_L {worst_order:.1e}"
    )
    return ok, detail


# -- 6. dual representation ---------------------------------------------------


def criterion_6():
    t0 = time.perf_counter()
    reports = dual_suite(50, 10_000, seed=1, max_states=6, max_points=6)
    excess = max(r.max_random_value - r.env_risk_value for r in reports)
    attain = max(abs(r.attained_value - r.env_risk_value) for r in reports)
    elapsed = time.perf_counter() - t0
    ok = excess <= 1e-9 and attain <= 1e-9 and elapsed < 120.0
    detail = f"50 models x 10000 pairs: max excess {excess:.1e}, attainment gap {attain:.1e}; {elapsed:.1f}s"
    return ok, detail


# -- 7. representation recovery ------------------------------------------------


def criterion_7():
    rng = np.random.default_rng(7)
    inner = outer = 0.0
    count = 0
    for _ in range(20):
        model = random_conditional_model(rng)
        for sampler in FAMILY_SAMPLERS.values():
            ie, oe = recovery_errors(model, sampler(rng), rng)
            inner, outer = max(inner, ie), max(outer, oe)
            count += 1
    ok = inner <= 1e-12 and outer <= 1e-12
    detail = f"20 models x {len(FAMILY_SAMPLERS)} families: inner {inner:.1e}, outer {outer:.1e}"
    return ok, detail


# -- 8. classical identities --------------------------------------------------


def criterion_8():
    rng = np.random.default_rng(8)
    worst_avar = worst_var = 0.0
    for _ in range(100):
        dist = _random_x(rng)
        levels = np.concatenate([rng.uniform(0.01, 0.99, size=5), np.cumsum(dist.probs)[:-1][:3]])
        for a in levels:
            a = float(a)
            if not 0 < a < 1:
                continue
            worst_avar = max(worst_avar, abs(avar(dist, a) - choquet_distorted(dist, DistortionFn.avar(a))))
            worst_var = max(worst_var, abs(var(dist, a) - choquet_distorted(dist, DistortionFn.var(a))))
    ok = worst_avar <= 1e-12 and worst_var <= 1e-12
    detail = f"100 distributions: AVaR gap {worst_avar:.1e}, VaR gap {worst_var:.1e}"
    return ok, detail


CRITERIA = {
    1: ("coherence", criterion_1),
    2: ("comonotonic additivity", criterion_2),
    3: ("WVaR / RVaR recovery", criterion_3),
    4: ("GBM closed form", criterion_4),
    5: ("background risk sandwich", criterion_5),
    6: ("dual representation", criterion_6),
    7: ("distortion recovery", criterion_7),
    8: ("classical identities", criterion_8),
}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    title, fn = CRITERIA[number]
    ok, detail = fn()
    with capsys.disabled():
        print("\n" + _line(number, title, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    results = []
    for number, (title, fn) in sorted(CRITERIA.items()):
        ok, detail = fn()
        results.append(ok)
        print(_line(number, title, ok, detail), flush=True)
    print(f"{sum(results)}/{len(results)} criteria passed")
    raise SystemExit(0 if all(results) else 1)
