"""Brute-force ground truth on small instances.

Full Gibbs tables by weighted enumeration, conditional marginals, influence
matrices and their top eigenvalue, total-variation and Hamming-Wasserstein
distances, and exact evaluation of the sphere-influence inequality. Everything
here is exact and cap-guarded; large-scale estimation belongs to the sampler
modules.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix

from .errors import (
    CapExceededError,
    InfeasiblePinningError,
    InvalidInstanceError,
    NotForestError,
)
from .graphs import Pinning, validate_pinning
from .tree import conditional_marginals_forest

DEFAULT_STATE_CAP = 10**6
DEFAULT_SUPPORT_CAP = 4_000_000  # joint cells for the exact transportation solve


# ---------------------------------------------------------------------------
# exact enumeration


@dataclass
class GibbsTable:
    """Exact distribution over extensions of a pinning.

    states holds one row per support configuration, columns following `free`;
    pinned vertices are recorded separately and re-inserted by full_state.
    """

    q: int
    free: tuple
    states: np.ndarray
    probs: np.ndarray
    pinned: dict = field(default_factory=dict)

    def __post_init__(self):
        s = self.probs.sum()
        if abs(s - 1.0) > 1e-9:
            raise InvalidInstanceError("Gibbs table probabilities must sum to 1")

    @property
    def support_size(self):
        return len(self.probs)

    def column(self, v):
        return self.states[:, self.free.index(v)]

    def marginal(self, v):
        if v in self.pinned:
            out = np.zeros(self.q)
            out[self.pinned[v]] = 1.0
            return out
        return np.bincount(self.column(v), weights=self.probs, minlength=self.q)

    def joint(self, vertices):
        """Joint distribution over a vertex subset as a dict keyed by color tuples."""
        cols = []
        for v in vertices:
            if v in self.pinned:
                cols.append(np.full(self.support_size, self.pinned[v]))
            else:
                cols.append(self.column(v))
        keys = np.stack(cols, axis=1) if cols else np.zeros((self.support_size, 0), dtype=int)
        out = {}
        for row, p in zip(map(tuple, keys.tolist()), self.probs):
            out[row] = out.get(row, 0.0) + float(p)
        return out

    def condition(self, v, c):
        """Table conditioned on v taking color c (renormalized)."""
        if v in self.pinned:
            if self.pinned[v] != c:
                raise InfeasiblePinningError("conditioning contradicts pinned color")
            return self
        i = self.free.index(v)
        keep = self.states[:, i] == c
        mass = self.probs[keep].sum()
        if mass <= 0.0:
            raise InfeasiblePinningError(f"conditioning {v}<-{c} has probability 0")
        new_free = tuple(u for u in self.free if u != v)
        cols = [j for j in range(len(self.free)) if j != i]
        pinned = dict(self.pinned)
        pinned[v] = c
        return GibbsTable(self.q, new_free, self.states[np.ix_(keep, cols)], self.probs[keep] / mass, pinned)

    def full_state(self, row_index, n):
        out = np.full(n, -1, dtype=int)
        for v, c in self.pinned.items():
            out[v] = c
        out[list(self.free)] = self.states[row_index]
        return out

    def sample(self, rng):
        idx = rng.choice(self.support_size, p=self.probs)
        return {v: int(self.states[idx, j]) for j, v in enumerate(self.free)}


def enumerate_gibbs(inst, pin=None, state_cap=DEFAULT_STATE_CAP):
    """Exact Gibbs distribution over extensions of a pinning by full enumeration."""
    pin = validate_pinning(inst, pin or {})
    g = inst.graph
    free = tuple(v for v in range(g.n) if v not in pin)
    lists = [np.array(inst.lists[v], dtype=np.int64) for v in free]
    total = 1
    for lst in lists:
        total *= len(lst)
        if total > state_cap:
            raise CapExceededError(f"{total}+ states exceed cap {state_cap}")
    if total == 0:
        raise InfeasiblePinningError("a free vertex has an empty list")

    if free:
        grids = np.meshgrid(*lists, indexing="ij")
        states = np.stack([grid.reshape(-1) for grid in grids], axis=1)
    else:
        states = np.zeros((1, 0), dtype=np.int64)

    index = {v: j for j, v in enumerate(free)}
    if inst.is_potts:
        mono = np.zeros(len(states))
        for (u, v) in g.edges:
            cu = states[:, index[u]] if u in index else pin.get(u)
            cv = states[:, index[v]] if v in index else pin.get(v)
            mono += (cu == cv)
        if inst.beta == 0.0:
            weights = (mono == 0).astype(float)
        else:
            weights = inst.beta ** mono
    else:
        ok = np.ones(len(states), dtype=bool)
        for (u, v) in g.edges:
            cu = states[:, index[u]] if u in index else pin.get(u)
            cv = states[:, index[v]] if v in index else pin.get(v)
            ok &= cu != cv
        weights = ok.astype(float)

    z = weights.sum()
    if z <= 0.0:
        pin.mark_feasible(False)
        raise InfeasiblePinningError("pinning admits no feasible extension")
    pin.mark_feasible(True)
    keep = weights > 0.0
    return GibbsTable(inst.q, free, states[keep], weights[keep] / z, dict(pin.items()))


def conditional_marginal_exact(inst, pin, v, state_cap=DEFAULT_STATE_CAP):
    """Exact conditional marginal of one vertex by the cheapest exact route.

    Uses the forest message-passing engine whenever the pinned vertices break
    all cycles, falling back to enumeration under the state cap.
    """
    pin = Pinning.of(pin)
    if v in pin:
        out = np.zeros(inst.q)
        out[pin.get(v)] = 1.0
        return out
    try:
        return conditional_marginals_forest(inst, pin)[v]
    except NotForestError:
        return enumerate_gibbs(inst, pin, state_cap).marginal(v)


def sample_exact(inst, pin, vertices, rng, state_cap=DEFAULT_STATE_CAP):
    """Exact joint sample of the listed free vertices by sequential conditionals."""
    current = Pinning.of(pin)
    out = {}
    for v in vertices:
        marg = conditional_marginal_exact(inst, current, v, state_cap)
        c = int(rng.choice(inst.q, p=marg))
        out[v] = c
        current = current.with_pin(v, c)
    return out


# ---------------------------------------------------------------------------
# distances


def tv_distance(a, b):
    """Total variation distance between two vectors on a common support."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise InvalidInstanceError("distributions live on different supports")
    return 0.5 * float(np.abs(a - b).sum())


def tv_distance_dict(a, b):
    keys = set(a) | set(b)
    return 0.5 * sum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys)


def maximal_coupling_sample(a, b, rng):
    """One draw (x, y) from the standard maximal coupling of two color vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    overlap = np.minimum(a, b)
    w = overlap.sum()
    if w >= 1.0 - 1e-15 or rng.random() < w:
        x = int(rng.choice(len(a), p=overlap / w))
        return x, x
    ra = np.clip(a - overlap, 0.0, None)
    rb = np.clip(b - overlap, 0.0, None)
    x = int(rng.choice(len(a), p=ra / ra.sum()))
    y = int(rng.choice(len(b), p=rb / rb.sum()))
    return x, y


def _hamming_matrix(sa, sb):
    return (sa[:, None, :] != sb[None, :, :]).sum(axis=2).astype(float)


def w1_hamming(table_a: GibbsTable, table_b: GibbsTable, support_cap=DEFAULT_SUPPORT_CAP):
    """Hamming 1-Wasserstein distance between two Gibbs tables.

    Returns (exact, lower, upper): exact optimal transport over the joint
    support (None when the support cap disables it), the sum-of-single-vertex
    TV lower bound, and the cost of a greedy maximal coupling as upper bound.
    """
    common = tuple(sorted(set(table_a.free) & set(table_b.free)))
    if not common:
        raise InvalidInstanceError("tables share no free vertices")
    idx_a = [table_a.free.index(v) for v in common]
    idx_b = [table_b.free.index(v) for v in common]
    sa, pa = _dedupe(table_a.states[:, idx_a], table_a.probs)
    sb, pb = _dedupe(table_b.states[:, idx_b], table_b.probs)

    lower = sum(tv_distance(table_a.marginal(v), table_b.marginal(v)) for v in common)

    cost = _hamming_matrix(sa, sb)
    upper = _greedy_coupling_cost(cost, pa.copy(), pb.copy())

    exact = None
    if len(pa) * len(pb) <= support_cap:
        exact = _transport(cost, pa, pb)
        tol = 1e-7 + 1e-7 * max(1.0, upper)
        if not (lower - tol <= exact <= upper + tol):
            raise InvalidInstanceError(
                f"W1 sandwich violated: lower={lower} exact={exact} upper={upper}"
            )
    return exact, lower, upper


def _dedupe(states, probs):
    uniq, inverse = np.unique(states, axis=0, return_inverse=True)
    agg = np.zeros(len(uniq))
    np.add.at(agg, inverse, probs)
    return uniq, agg


def _greedy_coupling_cost(cost, pa, pb):
    """Valid coupling built greedily in increasing Hamming cost order."""
    order = np.argsort(cost, axis=None, kind="stable")
    total = 0.0
    remaining_a = pa.sum()
    ncols = cost.shape[1]
    for flat in order:
        if remaining_a <= 1e-15:
            break
        i, j = divmod(int(flat), ncols)
        m = min(pa[i], pb[j])
        if m <= 0.0:
            continue
        total += m * cost[i, j]
        pa[i] -= m
        pb[j] -= m
        remaining_a -= m
    return float(total)


def _transport(cost, pa, pb):
    """Exact transportation LP (HiGHS) for the optimal coupling cost."""
    na, nb = cost.shape
    nvar = na * nb
    rows, cols, vals = [], [], []
    for i in range(na):
        rows.extend([i] * nb)
        cols.extend(range(i * nb, (i + 1) * nb))
        vals.extend([1.0] * nb)
    for j in range(nb):
        rows.extend([na + j] * na)
        cols.extend(range(j, nvar, nb))
        vals.extend([1.0] * na)
    a_eq = coo_matrix((vals, (rows, cols)), shape=(na + nb, nvar))
    b_eq = np.concatenate([pa, pb])
    res = linprog(cost.reshape(-1), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise InvalidInstanceError(f"transportation solve failed: {res.message}")
    return float(res.fun)


# ---------------------------------------------------------------------------
# influence matrices and spectral independence


@dataclass
class InfluenceMatrix:
    """Vertex-color pairwise influence matrix under a pinning."""

    index: tuple  # ordered (vertex, color) pairs
    entries: np.ndarray

    def block(self, u, v, q):
        """q x q influence block of u on v (rows: colors of u, cols: colors of v)."""
        out = np.zeros((q, q))
        pos = {pair: k for k, pair in enumerate(self.index)}
        for b in range(q):
            ku = pos.get((u, b))
            if ku is None:
                continue
            for c in range(q):
                kv = pos.get((v, c))
                if kv is not None:
                    out[b, c] = self.entries[ku, kv]
        return out


def _conditional_marginals_by_table(table: GibbsTable, u):
    """For each color b of u: dict of marginals of every other free vertex given u<-b."""
    out = {}
    mu_u = table.marginal(u)
    for b in range(table.q):
        if mu_u[b] <= 0.0:
            continue
        cond = table.condition(u, b)
        out[b] = {v: cond.marginal(v) for v in cond.free}
    return out


def influence_matrix(inst, pin=None, state_cap=DEFAULT_STATE_CAP):
    """Exact influence matrix entries mu_v^{tau,u<-b}(c) - mu_v^tau(c)."""
    table = enumerate_gibbs(inst, pin, state_cap)
    free = table.free
    if len(free) < 2:
        raise InvalidInstanceError("influence matrix needs at least 2 free vertices")
    base = {v: table.marginal(v) for v in free}
    index = []
    for v in free:
        for c in range(inst.q):
            if base[v][c] > 0.0:
                index.append((v, c))
    pos = {pair: k for k, pair in enumerate(index)}
    m = np.zeros((len(index), len(index)))
    for u in free:
        conds = _conditional_marginals_by_table(table, u)
        for b, margs in conds.items():
            ku = pos.get((u, b))
            if ku is None:
                continue
            for v in free:
                if v == u:
                    continue
                diff = margs[v] - base[v]
                for c in range(inst.q):
                    kv = pos.get((v, c))
                    if kv is not None:
                        m[ku, kv] = diff[c]
    return InfluenceMatrix(tuple(index), m)


def spectral_independence(inst, pin=None, state_cap=DEFAULT_STATE_CAP, imag_tol=1e-8):
    """Largest eigenvalue of the influence matrix.

    The spectrum is real for these models; any eigenvalue with imaginary part
    above imag_tol is reported as an error instead of silently dropped.
    """
    infl = influence_matrix(inst, pin, state_cap)
    eig = np.linalg.eigvals(infl.entries)
    worst = float(np.abs(eig.imag).max()) if len(eig) else 0.0
    if worst > imag_tol:
        raise InvalidInstanceError(f"influence spectrum not real: max |imag| = {worst}")
    return float(eig.real.max())


def influence_decay_at_R(inst, pin, u, R, state_cap=DEFAULT_STATE_CAP):
    """Summed TV influence of u on the sphere at distance exactly R.

    max over color pairs (b, c) of sum_{v in S(u,R) free} TV of the two
    conditional marginals. Enumerates one conditioning at a time so the cap
    applies to the conditioned state space.
    """
    pin = Pinning.of(pin)
    if u in pin:
        raise InvalidInstanceError("center vertex must be free")
    dist = inst.graph.distances_from(u)
    targets = [v for v in range(inst.graph.n) if v != u and v not in pin and dist[v] == R]
    if not targets:
        return 0.0
    margs = {}
    for b in inst.lists[u]:
        try:
            tb = enumerate_gibbs(inst, pin.with_pin(u, b), state_cap)
        except InfeasiblePinningError:
            continue
        margs[b] = {v: tb.marginal(v) for v in targets}
    feas = sorted(margs)
    best = 0.0
    for i, b in enumerate(feas):
        for c in feas[i + 1:]:
            s = sum(tv_distance(margs[b][v], margs[c][v]) for v in targets)
            best = max(best, s)
    return best


@dataclass
class SumInflReport:
    """Both sides of the sphere-influence inequality, with slack."""

    lhs: float
    joint_tv: float
    sphere_size: int
    max_term: float
    rhs: float
    slack: float
    holds: bool
    exact_max: bool
    ball_is_tree: bool


def check_sum_infl_inequality(inst, pin, u, R, K, state_cap=DEFAULT_STATE_CAP, pinning_cap=10**4, seed=0):
    """Exact evaluation of the distance-R influence bound through the distance-K shell.

    lhs  = max_{b,c} sum_{v in S(u,R)} TV(mu_v^{u<-b}, mu_v^{u<-c})
    rhs  = joint TV on S(u,K) * |S(u,R) free| + max over shell colorings sigma of
           the same influence sum conditioned on sigma.
    The sigma maximization is exact up to pinning_cap feasible shell colorings,
    and downgraded to a sample (exact_max=False) beyond that.
    """
    if not (K > R >= 1):
        raise InvalidInstanceError("need K > R >= 1")
    pin = Pinning.of(pin)
    table = enumerate_gibbs(inst, pin, state_cap)
    dist = inst.graph.distances_from(u)
    s_r = [v for v in table.free if v != u and dist[v] == R]
    s_k = [v for v in table.free if v != u and dist[v] == K]
    mu_u = table.marginal(u)
    feas = [b for b in range(inst.q) if mu_u[b] > 0.0]

    ball = sorted(v for v in range(inst.graph.n) if 0 <= dist[v] <= K)
    sub_edges = [e for e in inst.graph.edges if e[0] in ball and e[1] in ball]
    ball_is_tree = len(sub_edges) < len(ball)

    best = (0.0, None, None)
    for i, b in enumerate(feas):
        for c in feas[i + 1:]:
            tb, tc = table.condition(u, b), table.condition(u, c)
            s = sum(tv_distance(tb.marginal(v), tc.marginal(v)) for v in s_r)
            if s > best[0]:
                best = (s, b, c)
    lhs, b, c = best
    if b is None:
        return SumInflReport(0.0, 0.0, len(s_r), 0.0, 0.0, 0.0, True, True, ball_is_tree)

    tb, tc = table.condition(u, b), table.condition(u, c)
    joint_tv = tv_distance_dict(tb.joint(s_k), tc.joint(s_k)) if s_k else 0.0

    # max over feasible shell colorings, conditioning both sides on sigma
    sigmas = set(map(tuple, tb.states[:, [tb.free.index(v) for v in s_k]].tolist())) if s_k else {()}
    sigmas &= set(map(tuple, tc.states[:, [tc.free.index(v) for v in s_k]].tolist())) if s_k else {()}
    sigmas = sorted(sigmas)
    exact_max = len(sigmas) <= pinning_cap
    if not exact_max:
        rng = np.random.default_rng(seed)
        take = rng.choice(len(sigmas), size=pinning_cap, replace=False)
        sigmas = [sigmas[int(t)] for t in sorted(take)]
    max_term = 0.0
    for sig in sigmas:
        tbs, tcs = tb, tc
        try:
            for v, col in zip(s_k, sig):
                tbs = tbs.condition(v, col)
                tcs = tcs.condition(v, col)
        except InfeasiblePinningError:
            continue
        s = sum(tv_distance(tbs.marginal(v), tcs.marginal(v)) for v in s_r)
        max_term = max(max_term, s)

    rhs = joint_tv * len(s_r) + max_term
    slack = rhs - lhs
    return SumInflReport(lhs, joint_tv, len(s_r), max_term, rhs, slack, slack >= -1e-9, exact_max, ball_is_tree)
