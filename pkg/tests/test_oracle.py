import numpy as np
import pytest

import spinmix as sm
from spinmix.errors import CapExceededError, InfeasiblePinningError, InvalidInstanceError

from conftest import random_feasible_pinning


def test_enumerate_gibbs_examples():
    edge = sm.path_graph(2)
    t = sm.enumerate_gibbs(sm.ColoringInstance.full(edge, 3))
    assert t.support_size == 6
    assert np.allclose(t.probs, 1 / 6)

    potts = sm.PottsInstance(edge, 2, 0.5)
    t = sm.enumerate_gibbs(potts)
    mono = sum(p for row, p in zip(t.states, t.probs) if row[0] == row[1])
    assert mono == pytest.approx(1 / 3)

    tri = sm.complete_graph(3)
    t = sm.enumerate_gibbs(sm.ColoringInstance.full(tri, 3))
    assert t.support_size == 6
    assert np.allclose(t.probs, 1 / 6)


def test_enumerate_gibbs_caps_and_errors():
    g = sm.cycle_graph(12)
    with pytest.raises(CapExceededError):
        sm.enumerate_gibbs(sm.ColoringInstance.full(g, 6), state_cap=1000)
    with pytest.raises(InfeasiblePinningError):
        sm.enumerate_gibbs(sm.ColoringInstance.full(sm.path_graph(2), 2), {0: 0, 1: 0})


def test_tv_distance():
    assert sm.tv_distance([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert sm.tv_distance([0, 0.5, 0.5], [0.5, 0, 0.5]) == pytest.approx(0.5)
    a, b = np.array([0.2, 0.8]), np.array([0.7, 0.3])
    assert sm.tv_distance(a, b) == sm.tv_distance(b, a) <= 1.0


def test_influence_matrix_edge_example():
    edge = sm.path_graph(2)
    infl = sm.influence_matrix(sm.ColoringInstance.full(edge, 3))
    block = infl.block(0, 1, 3)
    expected = np.full((3, 3), 1 / 6) - np.eye(3) / 2
    assert np.abs(block - expected).max() <= 1e-12
    assert np.abs(infl.entries.sum(axis=1)).max() <= 1e-12


def test_influence_row_sums_and_factorization(rng):
    for _ in range(30):
        n = int(rng.integers(3, 8))
        g = sm.random_tree(n, 3, rng)
        q = int(rng.integers(3, 5))
        inst = sm.ColoringInstance.full(g, q)
        pin = random_feasible_pinning(inst, rng, max_pins=n - 3) if n > 3 else sm.Pinning()
        try:
            infl = sm.influence_matrix(inst, pin)
        except InvalidInstanceError:
            continue
        # per-target-vertex block rows sum to zero
        free = sorted({v for v, _ in infl.index})
        for u in free:
            for v in free:
                if u == v:
                    continue
                assert np.abs(infl.block(u, v, q).sum(axis=1)).max() <= 1e-12
        # factorization along paths through the tree
        dist = {u: g.distances_from(u) for u in free}
        for u in free:
            for w in free:
                if u == w or dist[u][w] != 2:
                    continue
                mids = [m for m in g.adj[u] if dist[w][m] == 1 and m in free]
                if not mids:
                    continue
                m = mids[0]
                lhs = infl.block(u, w, q)
                rhs = infl.block(u, m, q) @ infl.block(m, w, q)
                assert np.abs(lhs - rhs).max() <= 1e-12


def test_spectral_independence_edge_and_guard():
    edge = sm.path_graph(2)
    lam = sm.spectral_independence(sm.ColoringInstance.full(edge, 3))
    assert lam == pytest.approx(0.5, abs=1e-10)
    path3 = sm.path_graph(3)
    with pytest.raises(InvalidInstanceError):
        sm.spectral_independence(sm.ColoringInstance.full(path3, 3), {0: 0, 1: 1})


def test_spectral_independence_matches_char_poly(rng):
    for _ in range(5):
        g = sm.random_tree(4, 3, rng)
        inst = sm.ColoringInstance.full(g, 3)
        infl = sm.influence_matrix(inst)
        lam = sm.spectral_independence(inst)
        roots = np.roots(np.poly(infl.entries))
        # characteristic-polynomial roots are the less accurate route
        assert lam == pytest.approx(float(roots.real.max()), abs=1e-6)


def test_w1_edge_example_and_invariance():
    edge = sm.path_graph(2)
    inst = sm.ColoringInstance.full(edge, 3)
    ta = sm.enumerate_gibbs(inst, {0: 0})
    tb = sm.enumerate_gibbs(inst, {0: 1})
    exact, lower, upper = sm.w1_hamming(ta, tb)
    assert exact == pytest.approx(0.5)
    assert lower <= exact <= upper

    # identical tables -> 0
    exact, lower, upper = sm.w1_hamming(ta, ta)
    assert exact == pytest.approx(0.0, abs=1e-12)

    # consistent color relabeling leaves the distance unchanged
    perm = [2, 0, 1]
    inst_p = sm.ColoringInstance.full(edge, 3)
    ta_p = sm.enumerate_gibbs(inst_p, {0: perm[0]})
    tb_p = sm.enumerate_gibbs(inst_p, {0: perm[1]})
    exact_p, _, _ = sm.w1_hamming(ta_p, tb_p)
    assert exact_p == pytest.approx(0.5)


def test_w1_sandwich_random_instances(rng):
    for trial in range(30):
        n = int(rng.integers(3, 7))
        g = sm.random_tree(n, 3, rng) if trial % 2 else sm.cycle_graph(max(3, n))
        q = int(rng.integers(3, 5))
        inst = sm.ColoringInstance.full(g, q)
        u = int(rng.integers(g.n))
        ta = sm.enumerate_gibbs(inst, {u: 0})
        tb = sm.enumerate_gibbs(inst, {u: 1})
        exact, lower, upper = sm.w1_hamming(ta, tb)
        assert lower - 1e-9 <= exact <= upper + 1e-9


def test_influence_decay_at_R_examples():
    edge = sm.path_graph(2)
    inst = sm.ColoringInstance.full(edge, 3)
    assert sm.influence_decay_at_R(inst, {}, 0, 1) == pytest.approx(0.5)
    assert sm.influence_decay_at_R(inst, {}, 0, 5) == 0.0


def test_influence_decay_decreases_on_trees(rng):
    g = sm.dary_tree(2, 2)
    inst = sm.ColoringInstance.full(g, 6)
    vals = [sm.influence_decay_at_R(inst, {}, 0, r) for r in range(1, 3)]
    assert vals[1] < vals[0]
    # and the enumeration route agrees with the engine-backed decay profile
    prof = sm.tid_profile(g, inst, 0, [1, 2])
    assert np.abs(np.array(vals) - np.array(prof.values)).max() <= 1e-10


def test_w1_si_chain(rng):
    # lambda_max <= inf-norm of the influence matrix <= 2 max W1
    for _ in range(8):
        n = int(rng.integers(3, 6))
        g = sm.random_tree(n, 3, rng)
        inst = sm.ColoringInstance.full(g, 3)
        infl = sm.influence_matrix(inst)
        lam = sm.spectral_independence(inst)
        inf_norm = float(np.abs(infl.entries).sum(axis=1).max())
        assert lam <= inf_norm + 1e-10
        best_w1 = 0.0
        for u in range(g.n):
            for b in range(3):
                for c in range(b + 1, 3):
                    try:
                        ta = sm.enumerate_gibbs(inst, {u: b})
                        tb = sm.enumerate_gibbs(inst, {u: c})
                    except InfeasiblePinningError:
                        continue
                    exact, _, _ = sm.w1_hamming(ta, tb)
                    best_w1 = max(best_w1, exact)
        assert inf_norm <= 2 * best_w1 + 1e-9


def test_check_sum_infl_inequality_cases(rng):
    path4 = sm.path_graph(4)
    rep = sm.check_sum_infl_inequality(sm.ColoringInstance.full(path4, 3), {}, 0, 1, 2)
    assert rep.holds and rep.slack >= -1e-9

    c6 = sm.cycle_graph(6)
    rep = sm.check_sum_infl_inequality(sm.ColoringInstance.full(c6, 4), {}, 0, 1, 2)
    assert rep.holds
    assert rep.ball_is_tree is True  # radius-2 ball of a 6-cycle misses the antipode
    rep = sm.check_sum_infl_inequality(sm.ColoringInstance.full(c6, 4), {}, 0, 1, 3)
    assert rep.holds
    assert rep.ball_is_tree is False

    # empty distance-K shell: rhs reduces to the max term
    p3 = sm.path_graph(3)
    rep = sm.check_sum_infl_inequality(sm.ColoringInstance.full(p3, 3), {}, 0, 1, 5)
    assert rep.sphere_size >= 0 and rep.holds and rep.joint_tv == 0.0


def test_oracle_matches_tree_engine_potts(rng):
    for _ in range(10):
        g = sm.random_tree(int(rng.integers(3, 8)), 3, rng)
        inst = sm.PottsInstance(g, 3, float(rng.choice([0.0, 0.3, 1.0])))
        pin = random_feasible_pinning(inst, rng, max_pins=2)
        table = sm.exact_tree_marginals(inst, g, pin)
        gt = sm.enumerate_gibbs(inst, pin)
        for v in table.vertices():
            assert np.abs(table[v] - gt.marginal(v)).max() <= 1e-10
