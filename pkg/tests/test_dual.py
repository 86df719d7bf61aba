import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from envrisk.distortion import DistortionFn
from envrisk.dual import (
    TwoLayerFiniteModel,
    dual_gap_check,
    dual_suite,
    dual_value,
    greedy_core_measure,
    nested_greedy,
    sample_dominated,
    verify_dominated,
)
from envrisk.errors import NonConcave, NotDominated, TooLarge

ID = DistortionFn.identity()
G_ROOT = DistortionFn.pwl([(0, 0), (0.5, 0.7071), (1, 1)])


def test_greedy_examples():
    q = greedy_core_measure([0.5, 0.5], G_ROOT, [1, 0])
    np.testing.assert_allclose(q, [0.7071, 0.2929], atol=1e-15)
    p = np.array([0.2, 0.3, 0.5])
    np.testing.assert_allclose(greedy_core_measure(p, ID, [3, -1, 2]), p, atol=1e-15)
    q = greedy_core_measure(p, DistortionFn.avar(0.6), [1, 1, 1])
    assert verify_dominated(q, p, DistortionFn.avar(0.6))
    with pytest.raises(NonConcave):
        greedy_core_measure(p, DistortionFn.var(0.5), [1, 2, 3])


def test_verify_dominated_examples():
    assert verify_dominated(greedy_core_measure([0.5, 0.5], G_ROOT, [1, 0]), [0.5, 0.5], G_ROOT)
    assert not verify_dominated([1, 0], [0.5, 0.5], G_ROOT)
    p = np.array([0.1, 0.2, 0.3, 0.4])
    assert verify_dominated(p, p, DistortionFn.power(0.5))
    with pytest.raises(TooLarge):
        verify_dominated(np.full(13, 1 / 13), np.full(13, 1 / 13), ID)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_greedy_is_dominated_probability_vector(n, seed):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(n))
    g = DistortionFn.power(float(rng.uniform(0.1, 1)))
    x = rng.normal(size=n)
    q = greedy_core_measure(p, g, x)
    assert np.all(q >= -1e-15) and q.sum() == pytest.approx(1.0, abs=1e-12)
    assert verify_dominated(q, p, g)
    # greedy attains the single-layer Choquet value
    from envrisk.choquet import choquet_distorted
    from envrisk.model import build_distribution

    assert np.dot(q, x) == pytest.approx(choquet_distorted(build_distribution(x, p), g), abs=1e-12)


def small_model():
    p = np.array([0.2, 0.5, 0.3])
    conds = (np.array([0.3, 0.3, 0.4]), np.array([0.5, 0.25, 0.25]), np.array([0.1, 0.6, 0.3]))
    xs = (np.array([1.0, -2.0, 4.0]), np.array([0.5, 3.0, 1.5]), np.array([-1.0, 2.0, 0.0]))
    gs = (DistortionFn.avar(0.5), DistortionFn.avar(0.8), DistortionFn.avar(0.3))
    return TwoLayerFiniteModel(p, conds, DistortionFn.avar(0.6), gs, xs)


def test_dual_value_examples():
    m = small_model()
    ident = TwoLayerFiniteModel(m.p, m.cond_probs, ID, (ID, ID, ID), m.x)
    mean = sum(pz * np.dot(c, x) for pz, c, x in zip(m.p, m.cond_probs, m.x))
    assert dual_value(ident, m.p, m.cond_probs) == pytest.approx(mean)
    assert ident.env_risk() == pytest.approx(mean)
    Q1, Q2 = nested_greedy(m)
    assert dual_value(m, Q1, Q2) == pytest.approx(m.env_risk(), abs=1e-10)
    with pytest.raises(NotDominated):
        dual_value(m, [1.0, 0.0, 0.0], Q2)
    with pytest.raises(NotDominated):
        dual_value(m, Q1, [np.array([0, 0, 1.0])] + Q2[1:])


def test_dual_gap_check_examples():
    rep = dual_gap_check(small_model(), 10_000, 1)
    assert rep.ok
    assert rep.max_random_value <= rep.env_risk_value + 1e-9
    m = small_model()
    ident = TwoLayerFiniteModel(m.p, m.cond_probs, ID, (ID, ID, ID), m.x)
    rep = dual_gap_check(ident, 1000, 2)
    assert rep.attained_value == pytest.approx(rep.env_risk_value)
    assert rep.max_random_value <= rep.env_risk_value + 1e-9


def test_single_state_reduces_to_one_layer_duality():
    p = np.array([1.0])
    cond = (np.array([0.25, 0.25, 0.5]),)
    g = DistortionFn.power(0.5)
    model = TwoLayerFiniteModel(p, cond, DistortionFn.avar(0.9), (g,), (np.array([3.0, 1.0, 2.0]),))
    rep = dual_gap_check(model, 2000, 3)
    assert rep.ok


def test_model_validation():
    m = small_model()
    with pytest.raises(NonConcave):
        TwoLayerFiniteModel(m.p, m.cond_probs, DistortionFn.var(0.5), m.g, m.x)
    with pytest.raises(TooLarge):
        TwoLayerFiniteModel(np.full(9, 1 / 9), (np.ones(1),) * 9, ID, (ID,) * 9, (np.zeros(1),) * 9)


def test_sampler_outputs_are_dominated(rng):
    for _ in range(20):
        n = int(rng.integers(1, 7))
        p = rng.dirichlet(np.ones(n))
        g = DistortionFn.avar(float(rng.uniform(0.05, 0.95)))
        rows = sample_dominated(rng, p, g, 200)
        assert rows.shape == (200, n)
        np.testing.assert_allclose(rows.sum(axis=1), 1.0, atol=1e-12)
        assert all(verify_dominated(q, p, g) for q in rows)


def test_dual_suite_is_reproducible():
    a = [r.to_json() for r in dual_suite(3, 500, 9)]
    b = [r.to_json() for r in dual_suite(3, 500, 9)]
    assert a == b
    assert all(r["ok"] for r in a)
