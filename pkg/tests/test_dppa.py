import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from noma_dpp.dppa import (EffectiveWeights, build_candidate_set, candidate_bound, dppa_solve,
                           marginal_gain_f, objective_value, solve_with_table)
from noma_dpp.oracle import kkt_enumerate_solve, random_instance

ETA = 2e-12
P_MAX = 2.0


def water_level(w, z, g, eta=ETA, p_max=P_MAX):
    return min(max(w / z - eta / g, 0.0), p_max)


# f_k examples

def test_f_zero_power_is_zero():
    w = EffectiveWeights([3.0, 4.0], 2.0)
    assert marginal_gain_f(1, 0.7, 0.0, w, np.array([1e-8, 1e-9]), ETA) == 0.0


def test_f_one_nat():
    g = np.array([1e-9])
    p = ETA * (math.e - 1) / g[0]
    assert marginal_gain_f(0, 0.0, p, EffectiveWeights([1.0], 0.0), g, ETA) == pytest.approx(1.0, rel=1e-12)


def test_f_pure_penalty():
    assert marginal_gain_f(0, 0.0, 0.5, EffectiveWeights([0.0], 1.0), np.array([1e-9]), ETA) == -0.5


# weight construction

def test_weights_from_backlogs():
    w = EffectiveWeights.from_backlogs([2e6, 0.0], 3.0, 1e6, unit_bits=1e6)
    assert w.w == pytest.approx([2.0 / math.log(2), 0.0])
    assert w.z == 3.0
    half = EffectiveWeights.from_backlogs([2e6, 0.0], 3.0, 1e6, unit_bits=1e6, time_share=2)
    assert half.w == pytest.approx(w.w / 2)


def test_weights_validated():
    with pytest.raises(ValueError):
        EffectiveWeights([-1.0], 0.0)
    with pytest.raises(ValueError):
        EffectiveWeights([1.0], -1.0)
    with pytest.raises(ValueError):
        EffectiveWeights([np.inf], 1.0)


# candidate set

def test_single_user_candidates():
    g = np.array([1e-9])
    w = EffectiveWeights([1.0], 2.0)
    pi = build_candidate_set(w, g, ETA, P_MAX).pi
    assert pi.tolist() == pytest.approx([0.0, 0.5 - ETA / 1e-9, P_MAX])


def test_equal_weights_skip_pair():
    g = np.array([1e-8, 1e-9])
    c = build_candidate_set(EffectiveWeights([5.0, 5.0], 10.0), g, ETA, P_MAX)
    assert len(c) <= 4
    assert np.all(np.isfinite(c.pi))


def test_zero_price_keeps_p_max():
    g = np.array([1e-8, 1e-9, 1e-10])
    c = build_candidate_set(EffectiveWeights([5.0, 6.0, 7.0], 0.0), g, ETA, P_MAX)
    assert c.pi[0] == 0.0 and c.pi[-1] == P_MAX
    assert np.all(np.isfinite(c.pi))


@settings(max_examples=200)
@given(st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_candidate_set_structure(k, seed):
    w, g, eta, p_max = random_instance(np.random.default_rng(seed), k)
    pi = build_candidate_set(w, g, eta, p_max).pi
    assert pi[0] == 0.0
    assert np.all(np.diff(pi) > 0)
    assert pi[-1] <= p_max
    assert len(pi) <= candidate_bound(k)


@settings(max_examples=100)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
def test_pairwise_candidates_scale_invariant(k, seed, c):
    w, g, eta, _ = random_instance(np.random.default_rng(seed), k)
    i, j = np.triu_indices(k, 1)

    def pairs(wv):
        return eta * (g[j] * wv[j] - g[i] * wv[i]) / (g[i] * g[j] * (wv[i] - wv[j]))

    assert pairs(c * w.w) == pytest.approx(pairs(w.w), rel=1e-9)


# solver examples

def test_single_user_water_filling():
    g = np.array([1e-9])
    for w1, z in [(1.0, 2.0), (10.0, 2.0), (1e-4, 5.0)]:
        a = dppa_solve(EffectiveWeights([w1], z), g, ETA, P_MAX)
        assert a.powers[0] == pytest.approx(water_level(w1, z, g[0]), abs=1e-12)


def test_single_user_objective_at_interior_point():
    g1, w1, z = 1e-9, 1.0, 2.0
    p = w1 / z - ETA / g1
    expected = w1 * math.log(w1 * g1 / (z * ETA)) - z * p
    w = EffectiveWeights([w1], z)
    assert objective_value([p], w, np.array([g1]), ETA) == pytest.approx(expected, rel=1e-12)


def test_zero_weights_zero_allocation():
    g = np.array([1e-8, 1e-9, 1e-10])
    a = dppa_solve(EffectiveWeights([0.0, 0.0, 0.0], 1.0), g, ETA, P_MAX)
    assert np.all(a.powers == 0.0) and a.objective == 0.0


def test_zero_price_uses_full_power():
    g = np.array([1e-8, 1e-9])
    a = dppa_solve(EffectiveWeights([1.0, 2.0], 0.0), g, ETA, P_MAX)
    assert a.total == pytest.approx(P_MAX, rel=1e-12)


def test_three_user_reference_instance():
    g = np.array([1e-8, 0.5e-8, 0.25e-8])
    w = EffectiveWeights(np.array([1.0, 2.0, 4.0]) * 1e5, 1e5)
    a = dppa_solve(w, g, ETA, P_MAX)
    ref = kkt_enumerate_solve(w, g, ETA, P_MAX)
    assert a.objective == pytest.approx(ref.objective, rel=1e-9)
    assert a.powers == pytest.approx([0.0, 0.0, 2.0])


def test_unsorted_gains_rejected():
    with pytest.raises(ValueError):
        dppa_solve(EffectiveWeights([1.0, 1.0], 1.0), np.array([1e-9, 1e-8]), ETA, P_MAX)


def test_permutation_restores_user_order():
    gains = np.array([1e-10, 1e-8, 1e-9])
    perm = np.argsort(-gains, kind="stable")
    w = EffectiveWeights(np.array([1e5, 3e5, 2e5])[perm], 1e4)
    sorted_alloc = dppa_solve(w, gains[perm], ETA, P_MAX)
    orig = dppa_solve(w, gains[perm], ETA, P_MAX, perm=perm)
    assert np.array_equal(orig.powers[perm], sorted_alloc.powers)


def test_oracle_equivalence_random():
    rng = np.random.default_rng(20)
    for _ in range(300):
        k = int(rng.integers(2, 5))
        w, g, eta, p_max = random_instance(rng, k)
        got = dppa_solve(w, g, eta, p_max).objective
        ref = kkt_enumerate_solve(w, g, eta, p_max).objective
        assert abs(got - ref) <= 1e-9 * max(1.0, abs(ref))


@settings(max_examples=200)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_solution_properties(k, seed):
    w, g, eta, p_max = random_instance(np.random.default_rng(seed), k)
    powers, obj, cands, table = solve_with_table(w, g, eta, p_max)
    # feasibility
    assert np.all(powers >= 0) and powers.sum() <= p_max + 1e-9
    # prefix sums land on candidates
    for s in np.cumsum(powers):
        assert np.min(np.abs(cands.pi - s)) <= 1e-9 * p_max
    # reported objective is the true objective of the returned powers
    assert objective_value(powers, w, g, eta) == pytest.approx(obj, rel=1e-12, abs=1e-12)
    # evaluation count
    L = len(cands)
    assert table.evaluations == L + (k - 1) * L * (L + 1) // 2
    assert table.evaluations <= k * L * L


def test_first_stage_and_back_pointers():
    w, g, eta, p_max = random_instance(np.random.default_rng(3), 4)
    _, _, cands, table = solve_with_table(w, g, eta, p_max)
    f1 = marginal_gain_f(0, 0.0, cands.pi, w, g, eta)
    assert np.array_equal(table.H[:, 0], f1)
    L = len(cands)
    for k in range(1, 4):
        assert np.all(table.back[:, k] <= np.arange(L))


def test_dominates_random_feasible_points():
    rng = np.random.default_rng(9)
    for _ in range(20):
        w, g, eta, p_max = random_instance(rng, 3)
        best = dppa_solve(w, g, eta, p_max).objective
        pts = rng.dirichlet(np.ones(4), 2000)[:, :3] * p_max
        vals = [objective_value(p, w, g, eta) for p in pts]
        assert best >= max(vals) - 1e-9 * max(1.0, abs(best))


def test_forty_users_run():
    rng = np.random.default_rng(4)
    w, g, eta, p_max = random_instance(rng, 40)
    powers, obj, cands, table = solve_with_table(w, g, eta, p_max)
    assert len(cands) <= candidate_bound(40)
    assert powers.sum() <= p_max + 1e-9
