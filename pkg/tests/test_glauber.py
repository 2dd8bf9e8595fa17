import numpy as np
import pytest

import spinmix as sm
from spinmix.errors import ErgodicityError

from conftest import random_feasible_pinning


def test_ergodicity_guard():
    tri = sm.complete_graph(3)
    with pytest.raises(ErgodicityError):
        sm.make_chain(sm.ColoringInstance.full(tri, 3))
    # potts at beta > 0 is always fine
    sm.make_chain(sm.PottsInstance(tri, 3, 0.5))


def test_glauber_step_single_free_vertex_is_exact_sample():
    edge = sm.path_graph(2)
    inst = sm.ColoringInstance.full(edge, 3)
    pin = sm.Pinning({0: 0})
    counts = np.zeros(3)
    state = sm.make_chain(inst, pin, seed=4)
    for _ in range(4000):
        state = sm.glauber_step(inst, pin, state)
        counts[state.coloring[1]] += 1
    freq = counts / counts.sum()
    # exact conditional is (0, 1/2, 1/2); binomial 3-sigma band
    sigma = 3 * np.sqrt(0.25 / 4000)
    assert freq[0] == 0.0
    assert abs(freq[1] - 0.5) <= sigma and abs(freq[2] - 0.5) <= sigma


def test_frozen_instance_state_unchanged():
    path3 = sm.path_graph(3)
    inst = sm.ColoringInstance.with_lists(path3, 3, [[0], [0, 1, 2], [2]])
    pin = sm.Pinning({0: 0, 2: 2})
    state = sm.make_chain(inst, pin, seed=1)
    first = state.coloring.copy()
    for _ in range(50):
        state = sm.glauber_step(inst, pin, state)
        # vertex 1 resamples uniformly from {1}: neighbors block 0 and 2
        assert state.coloring[1] == 1 or (state.coloring == first).all()


def test_determinism_of_trajectories():
    g = sm.cycle_graph(6)
    inst = sm.ColoringInstance.full(g, 5)
    s1, _ = sm.run_chain(inst, {}, 500, seed=9)
    s2, _ = sm.run_chain(inst, {}, 500, seed=9)
    assert (s1.coloring == s2.coloring).all()
    s3, _ = sm.run_chain(inst, {}, 500, seed=10)
    assert not (s1.coloring == s3.coloring).all()


def test_transition_matrix_stationarity(rng):
    for trial in range(6):
        n = int(rng.integers(3, 6))
        g = sm.random_tree(n, 3, rng) if trial % 2 else sm.cycle_graph(max(3, n))
        inst = (
            sm.ColoringInstance.full(g, int(rng.integers(4, 6)))
            if trial % 3
            else sm.PottsInstance(g, 3, 0.4)
        )
        p, table = sm.transition_matrix(inst)
        assert np.abs(p.sum(axis=1) - 1.0).max() <= 1e-12
        assert np.abs(table.probs @ p - table.probs).max() <= 1e-12
        gap = sm.glauber.spectral_gap(inst, state_cap=5000)
        assert gap > 0.0


def test_transition_matrix_edge_q3_laziness():
    edge = sm.path_graph(2)
    inst = sm.ColoringInstance.full(edge, 3)
    p, table = sm.transition_matrix(inst)
    assert p.shape == (6, 6)
    assert np.all(np.diag(p) > 0)  # resampling can keep the color


def test_exact_mixing_time_edges():
    edge = sm.path_graph(2)
    inst = sm.ColoringInstance.full(edge, 3)
    assert sm.exact_mixing_time(inst, eps=1.0) == 0
    single = sm.ColoringInstance.full(sm.path_graph(2), 3)
    pin = sm.Pinning({0: 0})
    assert sm.exact_mixing_time(single, pin, eps=0.9) == 1

    t1 = sm.exact_mixing_time(inst, eps=0.25)
    rep = sm.tv_decay_report(inst, horizon=4 * t1)
    # consistency between the two exact routes
    assert rep.values[t1 - 1] <= 0.25 + 1e-12
    if t1 > 1:
        assert rep.values[t1 - 2] > 0.25


def test_tv_decay_non_increasing():
    inst = sm.ColoringInstance.full(sm.cycle_graph(5), 4)
    rep = sm.tv_decay_report(inst, horizon=60)
    assert all(rep.values[i + 1] <= rep.values[i] + 1e-12 for i in range(len(rep.values) - 1))
    assert rep.kind == "exact_tv"


def test_mixing_monotone_in_colors():
    # recorded monotonicity trend: more colors should not mix slower
    g = sm.cycle_graph(5)
    t_small = sm.exact_mixing_time(sm.ColoringInstance.full(g, 4), eps=0.25)
    t_large = sm.exact_mixing_time(sm.ColoringInstance.full(g, 5), eps=0.25)
    assert t_large <= t_small


def test_coalescence_deterministic_and_geometric_single_vertex():
    edge = sm.path_graph(2)
    inst = sm.ColoringInstance.full(edge, 3)
    pin = sm.Pinning({0: 0})
    rep1 = sm.coalescence_estimate(inst, pin, trials=60, seed=5)
    rep2 = sm.coalescence_estimate(inst, pin, trials=60, seed=5)
    assert rep1.values == rep2.values
    # single free vertex: coalescence at the first selection, mean ~ 1
    assert rep1.summary["mean"] == pytest.approx(1.0, abs=0.35)
    assert rep1.summary["timeouts"] == 0


def test_chain_frequencies_match_oracle_chi_square(rng):
    # thinned single-chain frequencies vs the exact distribution
    for trial in range(4):
        g = sm.random_tree(4, 3, rng) if trial % 2 else sm.cycle_graph(4)
        inst = sm.ColoringInstance.full(g, 5)
        p, table = sm.transition_matrix(inst)
        eig = np.sort(np.linalg.eigvals(p).real)
        t_rel = 1.0 / max(1e-9, 1.0 - eig[-2])
        thin = max(1, int(np.ceil(2 * t_rel)))
        m = 2000
        _, snaps = sm.run_chain(inst, {}, 40 * thin + m * thin, seed=trial, record_every=thin)
        snaps = snaps[40:]
        index = {tuple(row): i for i, row in enumerate(table.states.tolist())}
        counts = np.zeros(table.support_size)
        for s in snaps:
            counts[index[tuple(int(c) for c in s[list(table.free)])]] += 1
        expected = table.probs * len(snaps)
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        df = table.support_size - 1
        assert chi2 <= df + 3 * np.sqrt(2 * df) * max(1.0, 2 * t_rel / thin)


def test_autocorrelation_report():
    inst = sm.ColoringInstance.full(sm.cycle_graph(6), 5)
    rep = sm.glauber.autocorrelation_estimate(inst, steps=4000, burnin=500, seed=0, max_lag=50)
    assert rep.kind == "autocorrelation"
    assert rep.summary["integrated_time"] >= 1.0
    assert len(rep.values) == 50
