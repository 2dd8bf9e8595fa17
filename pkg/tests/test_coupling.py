import math

import numpy as np
import pytest

import spinmix as sm
from spinmix.errors import ParameterError, SearchCapError

from conftest import random_feasible_pinning


def test_identical_conditionings_give_zero_hamming():
    g = sm.cycle_graph(6)
    inst = sm.ColoringInstance.full(g, 4)
    out = sm.algorithm1_couple(inst, {}, 0, 1, 1, 2, seed=0)
    assert out.hamming == 0
    assert out.x == out.y


def test_sphere_empty_hamming_bounded_by_ball():
    g = sm.path_graph(5)
    inst = sm.ColoringInstance.full(g, 4)
    # R beyond the eccentricity of vertex 2
    out = sm.algorithm1_couple(inst, {}, 2, 0, 1, 10, seed=1)
    ball_free = len(sm.ball(g, 2, 10)) - 1
    assert out.hamming <= ball_free
    assert set(out.x) == set(out.y) == set(range(5)) - {2}


def test_coupling_marginal_law_matches_oracle():
    g = sm.cycle_graph(6)
    inst = sm.ColoringInstance.full(g, 4)
    u, b, c, big_r = 0, 0, 1, 2
    trials = 2500
    res = sm.run_coupling_trials(inst, {}, u, b, c, big_r, trials=trials, seed=11)
    assert res["discarded"] == 0
    oracle = sm.enumerate_gibbs(inst, {u: b})
    for v in range(1, 6):
        counts = np.zeros(4)
        for o in res["outcomes"]:
            counts[o.x[v]] += 1
        expected = oracle.marginal(v) * trials
        keep = expected > 0
        chi2 = float(((counts[keep] - expected[keep]) ** 2 / expected[keep]).sum())
        df = int(keep.sum()) - 1
        assert chi2 <= df + 3 * math.sqrt(2 * df), f"vertex {v}: chi2={chi2}"
        assert counts[~keep].sum() == 0


def test_mean_hamming_upper_bounds_w1():
    g = sm.cycle_graph(6)
    inst = sm.ColoringInstance.full(g, 4)
    res = sm.run_coupling_trials(inst, {}, 0, 0, 1, 2, trials=1500, seed=7)
    hams = [o.hamming for o in res["outcomes"]]
    mean = float(np.mean(hams))
    sem = float(np.std(hams) / math.sqrt(len(hams)))
    ta = sm.enumerate_gibbs(inst, {0: 0})
    tb = sm.enumerate_gibbs(inst, {0: 1})
    w1, _, _ = sm.w1_hamming(ta, tb)
    assert mean + 3 * sem >= w1


def test_nine_cycle_influence_gate_and_hamming():
    # measure (R, eps)-influence decay first; assert the Hamming bound only
    # when the measured eps is inside the lemma's regime
    g = sm.cycle_graph(9)
    inst = sm.ColoringInstance.full(g, 5)
    delta_max = 2
    for big_r in (2, 3):
        eps = sm.influence_decay_at_R(inst, {}, 0, big_r)
        threshold = 1.0 / (8 * big_r * math.log(delta_max))
        res = sm.run_coupling_trials(inst, {}, 0, 0, 1, big_r, trials=1200, seed=3)
        if eps <= threshold:
            assert res["mean_hamming"] <= 2 * delta_max**big_r
    # the R=3 gate holds on this instance
    assert sm.influence_decay_at_R(inst, {}, 0, 3) <= 1.0 / (24 * math.log(2))


def test_coupling_respects_pinnings(rng):
    for _ in range(10):
        g = sm.random_tree(8, 3, rng)
        inst = sm.ColoringInstance.full(g, 5)
        pin = random_feasible_pinning(inst, rng, max_pins=2)
        free = [v for v in range(8) if v not in pin]
        u = free[0]
        mu_u = sm.enumerate_gibbs(inst, pin).marginal(u)
        feas = [c for c in range(5) if mu_u[c] > 0]
        b, c = feas[0], feas[1]
        out = sm.algorithm1_couple(inst, pin, u, b, c, 2, seed=2)
        assert set(out.x) == set(free) - {u}
        # coupled configurations extend their conditionings feasibly
        for side, col in ((out.x, b), (out.y, c)):
            full = dict(side)
            full[u] = col
            full.update(pin.assignments)
            for a, b_ in g.edges:
                assert full[a] != full[b_]


def test_d_recursion_base_cases():
    assert sm.d_recursion(5, 0, 9, 0.05) == 9.0
    assert sm.d_recursion(0, 4, 9, 0.05) == 9.0
    for k in (1, 7, 30):
        assert sm.d_recursion(k, 3, 16, 0.0) == 16.0
    with pytest.raises(ParameterError):
        sm.d_recursion(-1, 0, 9, 0.1)


def test_d_recursion_below_closed_bound_grid():
    for delta, big_r in ((3, 2), (3, 3), (4, 2), (4, 3)):
        eps = 1.0 / (8 * big_r * math.log(delta))
        dr = delta**big_r
        for k in range(0, 201, 25):
            for ell in range(0, dr + 1, max(1, dr // 7)):
                assert sm.d_recursion(k, ell, dr, eps) <= sm.d_closed_bound(ell, dr, eps) + 1e-9


def test_d_closed_bound_values():
    assert sm.d_closed_bound(0, 9, 0.3) == 9.0
    eps = 1.0 / (16 * math.log(3))
    assert sm.d_closed_bound(9, 9, eps) == pytest.approx(11.897, abs=1e-3)
    assert sm.coupling.harmonic(3) == pytest.approx(11 / 6)


def test_d_closed_bound_warns_outside_regime():
    with pytest.warns(UserWarning):
        sm.d_closed_bound(5, 9, 0.5, R=2, Delta=3)


def test_parameter_search_contract():
    r, k, girth = sm.parameter_search(1.0, 1.0, 0.9, 3)
    assert k > r >= 2 and girth == 2 * k + 2
    threshold = 1.0 / (8 * r * math.log(3))
    lhs = 2 * 1.0 * 0.1**k * 3**r + 1.0 * 0.1**r
    assert lhs <= threshold
    # monotone: increasing K keeps the inequality satisfied
    lhs2 = 2 * 1.0 * 0.1 ** (k + 1) * 3**r + 1.0 * 0.1**r
    assert lhs2 <= threshold
    # K is minimal for this R
    if k - 1 > r:
        bad = 2 * 1.0 * 0.1 ** (k - 1) * 3**r + 1.0 * 0.1**r
        assert bad > threshold
    with pytest.raises(SearchCapError):
        sm.parameter_search(10.0, 10.0, 1e-6, 3, r_cap=5, k_cap=10)


def test_parameter_search_with_harness_constants():
    rep = sm.certify_contraction("coloring", 6, 3, samples=2000, seed=0)
    consts = sm.coloring_regime_constants(6, 3, rep.delta_hat)
    r, k, girth = sm.parameter_search(consts.c_sm, consts.c_infl, rep.delta_hat, 3)
    assert girth == 2 * k + 2 and r >= 2
