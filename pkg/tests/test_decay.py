import math

import numpy as np
import pytest

import spinmix as sm
from spinmix.decay import _root_marginals_batch
from spinmix.errors import InsufficientDataError, ParameterError

from conftest import random_feasible_pinning


def test_fit_rate_exact_geometric():
    vals = [2.0 * 0.6**k for k in range(8)]
    rate, resid = sm.fit_rate(vals)
    assert rate == pytest.approx(0.6)
    assert resid <= 1e-12
    rate, _ = sm.fit_rate([3.0, 3.0, 3.0, 3.0])
    assert rate == pytest.approx(1.0)
    with pytest.raises(InsufficientDataError):
        sm.fit_rate([1.0, 0.0, 0.0])


def test_ssm_profile_small_tree_exact_matches_bruteforce(rng):
    # depth-1 exact boundary search vs direct enumeration of pinning pairs
    g = sm.dary_tree(2, 2)
    inst = sm.ColoringInstance.full(g, 4)
    prof = sm.ssm_profile(g, inst, depths=[1], strategy="exact")
    tree = sm.RootedTree.rooted(g, 0)
    sphere = tree.levels()[1]
    best = 0.0
    margs = []
    for c1 in range(4):
        for c2 in range(4):
            try:
                t = sm.exact_tree_marginals(inst, g, {sphere[0]: c1, sphere[1]: c2})
                margs.append(t[0])
            except sm.errors.InfeasiblePinningError:
                continue
    for i in range(len(margs)):
        for j in range(i):
            best = max(best, sm.tv_distance(margs[i], margs[j]))
    assert prof.values[0] == pytest.approx(best, abs=1e-12)


def test_ssm_profile_zero_beyond_height():
    g = sm.dary_tree(2, 3)
    inst = sm.ColoringInstance.full(g, 5)
    prof = sm.ssm_profile(g, inst, depths=[7])
    assert prof.values == [0.0]  # empty boundary


def test_ssm_profile_decreasing_binary_tree():
    g = sm.dary_tree(2, 6)
    inst = sm.ColoringInstance.full(g, 6)
    prof = sm.ssm_profile(g, inst, depths=list(range(1, 7)), seed=1)
    assert all(prof.values[i + 1] < prof.values[i] for i in range(5))
    assert 0 < prof.fitted_rate < 1


def test_wsm_profile_potts_cases():
    g = sm.dary_tree(2, 4)
    prof = sm.wsm_profile_potts(g, 7, 1.0, depths=[1, 2, 3])
    assert prof.values == [0.0, 0.0, 0.0]

    prof = sm.wsm_profile_potts(g, 7, 0.25, depths=[0, 1, 2], seed=0)
    assert prof.values[0] == pytest.approx(1.0)  # two point-pinnings of the root
    assert prof.values[2] < prof.values[1]


def test_wsm_beta_zero_matches_coloring_ssm_full_sphere():
    g = sm.dary_tree(2, 3)
    wsm = sm.wsm_profile_potts(g, 5, 0.0, depths=[1, 2], strategy="exact")
    inst = sm.ColoringInstance.full(g, 5)
    ssm = sm.ssm_profile(g, inst, depths=[1, 2], strategy="exact")
    assert np.allclose(wsm.values, ssm.values, atol=1e-12)


def test_tid_profile_examples():
    edge = sm.path_graph(2)
    inst = sm.ColoringInstance.full(edge, 3)
    prof = sm.tid_profile(edge, inst, 0, [1, 2])
    assert prof.values[0] == pytest.approx(0.5)
    assert prof.values[1] == 0.0

    c6 = sm.cycle_graph(6)
    prof = sm.tid_profile(c6, sm.ColoringInstance.full(c6, 4), 0, [1, 2, 3])
    assert all(v >= 0 for v in prof.values)


def test_root_marginals_batch_consistency(rng):
    g = sm.dary_tree(3, 3)
    tree = sm.RootedTree.rooted(g, 0)
    inst = sm.ColoringInstance.full(g, 5)
    sphere = tree.levels()[2]
    pins = rng.integers(0, 5, size=(9, len(sphere)))
    fast = _root_marginals_batch(tree, inst, 2, pins, 1.0)
    for k in range(9):
        up = sm.subtree_marginals(inst, tree, sm.Pinning({v: int(c) for v, c in zip(sphere, pins[k])}))
        assert np.abs(fast[k] - up[0]).max() <= 1e-12


def test_constants_report_collapse_case():
    regime = {"family": "coloring", "q": 6, "Delta": 3}
    report = sm.constants_report(regime, None, (0.2, 0.2), 0.5)
    assert report.c_sm == pytest.approx(math.sqrt(6) / 0.5)
    assert report.c_si == pytest.approx(1.0)
    assert report.c_infl == pytest.approx(math.sqrt(6))
    assert report.extras["root_factor"] == 17.0


def test_constants_report_validation():
    with pytest.raises(ParameterError):
        sm.constants_report({"family": "coloring", "q": 6}, None, (0.3, 0.2), 0.5)
    with pytest.raises(ParameterError):
        sm.constants_report({"family": "coloring", "q": 6}, None, (0.1, 0.2), 1.5)


def test_coloring_regime_constants_values():
    report = sm.coloring_regime_constants(6, 3, 0.4)
    assert report.regime["gamma_bounds"] == 3
    # lower* is the 8/162 floor
    assert sm.bound_lower(6, 3, 3) == pytest.approx(8 / 162)
    assert report.c_sm > 0 and report.c_infl > report.c_si
    assert "c_sm_root" in report.extras


def test_eps_regime_constants():
    report = sm.coloring_regime_constants(42, 28, 0.1)
    assert report.regime["eps"] == pytest.approx(0.5)
    assert report.extras["eps_rate"] == pytest.approx(math.exp(-0.125))
    assert report.extras["eps_c_sm"] > 0 and report.extras["eps_c_infl"] > 0


def test_potts_regime_constants():
    report = sm.potts_regime_constants(7, 0.25, 3, 0.3)
    assert report.c_sm > 0 and report.c_si > 0
    assert report.regime["beta"] == 0.25


def test_one_step_contraction_on_random_trees(rng):
    # exact subtree marginals under pinning pairs contract in the weighted norm
    q, delta_max, gamma = 6, 3, 4
    cert = sm.certify_contraction("coloring", q, delta_max, samples=4000, seed=0)
    rate = 1.0 - cert.delta_hat
    pot = sm.potential_coloring()
    scheme_keys = {}
    checked = 0
    trials = 0
    while checked < 150 and trials < 600:
        trials += 1
        n = int(rng.integers(6, 14))
        g = sm.random_tree(n, delta_max, rng)
        tree = sm.RootedTree.rooted(g, 0)
        inst = sm.ColoringInstance.full(g, q)
        candidates = [v for v in range(1, n) if tree.children[v] and tree.depth[v] >= 1]
        if not candidates:
            continue
        r = int(candidates[int(rng.integers(len(candidates)))])
        sub = tree.subtree(r)
        deep = [v for v in sub if tree.depth[v] >= tree.depth[r] + 2]
        if not deep:
            continue
        k = int(rng.integers(1, min(4, len(deep)) + 1))
        chosen = sorted(int(v) for v in rng.choice(deep, size=k, replace=False))
        tau = {v: int(rng.integers(q)) for v in chosen}
        tau2 = dict(tau)
        flip = chosen[int(rng.integers(len(chosen)))]
        tau2[flip] = int((tau2[flip] + 1 + rng.integers(q - 1)) % q)
        try:
            up1 = sm.subtree_marginals(inst, tree, tau)
            up2 = sm.subtree_marginals(inst, tree, tau2)
        except sm.errors.InfeasiblePinningError:
            continue
        kids = [v for v in tree.children[r] if v not in tau]
        if not kids:
            continue

        def weight(v):
            d_v = sum(1 for w in tree.children[v] if w not in tau)
            delta_v = len(tree.children[v])
            key = (d_v, delta_v)
            if key not in scheme_keys:
                q_v = q - (delta_v - d_v)
                zeta = sm.f_entropy(sm.xi(gamma, d_v, q_v) / (q_v - 1.0))
                scheme_keys[key] = (1.0 - zeta) ** -0.5
            return scheme_keys[key]

        lhs = weight(r) * np.linalg.norm(pot.phi(up1[r]) - pot.phi(up2[r]))
        rhs = max(weight(v) * np.linalg.norm(pot.phi(up1[v]) - pot.phi(up2[v])) for v in kids)
        checked += 1
        assert lhs <= rate * rhs + 1e-12, f"one-step contraction violated: {lhs} > {rate} * {rhs}"
    assert checked >= 100


def test_tid_dominated_by_constants_small_tree():
    q, delta_max = 6, 3
    cert = sm.certify_contraction("coloring", q, delta_max, samples=4000, seed=0)
    consts = sm.coloring_regime_constants(q, delta_max, cert.delta_hat)
    g = sm.dary_tree(2, 6)
    inst = sm.ColoringInstance.full(g, q)
    prof = sm.tid_profile(g, inst, 0, list(range(1, 7)))
    rate = 1.0 - cert.delta_hat
    for ell, val in zip(prof.distances, prof.values):
        assert val <= consts.c_infl * rate**ell + 1e-9
