"""Spatial-mixing decay profiles, decay-rate fits, and derived constants.

Profiles measure, per distance, the worst total-variation discrepancy a sphere
pinning pair can induce at a center vertex (SSM/WSM) or the summed influence
of the center on the sphere (TID). Exact tree marginals sit underneath every
value. Worst-case boundary search is exact when the sphere is small and
heuristic (monochromatic pairs, random pairs, greedy single-vertex flips)
otherwise; the profile records which mode ran.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapExceededError, InfeasiblePinningError, InsufficientDataError, ParameterError
from .graphs import ColoringInstance, Pinning, PottsInstance, RootedTree, make_rng
from .jacobian import Potential, WeightScheme, potential_coloring, potential_potts, weight_scheme_coloring, weight_scheme_potts
from .oracle import enumerate_gibbs, tv_distance
from .tree import (
    DENOM_EPS,
    bound_lower,
    bound_potts_two_level,
    bound_two_level_odds,
    conditional_marginals_forest,
    subtree_marginals,
)

ROOT_NORM_FACTOR = 17.0  # paper-asserted cap on the root-level weighted norm


# ---------------------------------------------------------------------------
# profiles


@dataclass
class DecayProfile:
    distances: list
    values: list
    fitted_rate: float
    fit_residual: float
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "distances": self.distances,
            "values": self.values,
            "fitted_rate": self.fitted_rate,
            "fit_residual": self.fit_residual,
            "meta": self.meta,
        }


def fit_rate(values, distances=None):
    """Least-squares exponential rate: exp(slope of log-values vs distance).

    Only strictly positive values enter the fit; needs at least 3 of them.
    """
    values = np.asarray(values, dtype=float)
    if distances is None:
        distances = np.arange(len(values), dtype=float)
    distances = np.asarray(distances, dtype=float)
    keep = values > 0.0
    if keep.sum() < 3:
        raise InsufficientDataError("rate fit needs at least 3 positive values")
    x = distances[keep]
    y = np.log(values[keep])
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((slope * x + intercept - y) ** 2)))
    return float(np.exp(slope)), resid


def _finish_profile(depths, values, meta):
    try:
        rate, resid = fit_rate(values, depths)
    except InsufficientDataError:
        rate, resid = 1.0, 0.0
        meta = dict(meta, fit="insufficient-data")
    return DecayProfile(list(depths), [float(v) for v in values], rate, resid, meta)


def _is_bfs_dary(tree: RootedTree):
    """True when every level is a contiguous index range with a uniform arity."""
    levels = tree.levels()
    for o in range(len(levels) - 1):
        lvl, nxt = levels[o], levels[o + 1]
        if nxt != list(range(nxt[0], nxt[0] + len(nxt))):
            return False
        if len(nxt) % len(lvl) != 0:
            return False
        d = len(nxt) // len(lvl)
        for i, v in enumerate(lvl):
            if tree.children[v] != tuple(range(nxt[0] + i * d, nxt[0] + (i + 1) * d)):
                return False
    return True


def _dary_chunk(levels, q, ell, pins, theta):
    b, m = pins.shape
    onehot = np.zeros((b, m, q))
    rows = np.repeat(np.arange(b), m)
    cols = np.tile(np.arange(m), b)
    onehot[rows, cols, pins.reshape(-1)] = 1.0
    msgs = 1.0 - theta * onehot
    alive = np.ones(b, dtype=bool)
    p = None
    for o in range(ell - 1, -1, -1):
        m_par = len(levels[o])
        d = msgs.shape[1] // m_par
        w = msgs.reshape(b, m_par, d, q).prod(axis=2)
        z = w.sum(axis=2, keepdims=True)
        alive &= (z[:, :, 0] > DENOM_EPS).all(axis=1)
        p = w / np.where(z <= DENOM_EPS, 1.0, z)
        msgs = 1.0 - theta * p
    out = p[:, 0, :]
    out[~alive] = np.nan
    return out


def _root_marginals_batch(tree, inst, ell, pins, theta):
    """Root marginal for a batch of full-sphere pinnings at depth ell.

    pins: (B, m) colors for the depth-ell vertices in sorted order. Returns a
    (B, q) array with nan rows for infeasible pinnings. Uses a level-
    vectorized pass on complete BFS-numbered trees and the generic engine
    otherwise.
    """
    q = inst.q
    levels = tree.levels()
    if ell >= len(levels):
        raise ParameterError("depth beyond tree height")
    sphere = levels[ell]
    b = pins.shape[0]
    if ell == 0:
        out = np.zeros((b, q))
        out[np.arange(b), pins[:, 0]] = 1.0
        return out

    full_lists = bool(inst.list_mask.all())
    if full_lists and _is_bfs_dary(tree):
        chunk = max(1, 2**21 // (len(sphere) * q))
        parts = []
        for s in range(0, b, chunk):
            parts.append(_dary_chunk(levels, q, ell, pins[s : s + chunk], theta))
        return np.concatenate(parts, axis=0)

    out = np.full((b, q), np.nan)
    for k in range(b):
        pin = Pinning({v: int(c) for v, c in zip(sphere, pins[k])})
        try:
            up = subtree_marginals(inst, tree, pin)
        except InfeasiblePinningError:
            continue
        out[k] = up[tree.root]
    return out


def _max_pairwise_tv(clean):
    if len(clean) < 2:
        return 0.0, None, None
    diffs = 0.5 * np.abs(clean[:, None, :] - clean[None, :, :]).sum(axis=2)
    i, j = np.unravel_index(np.argmax(diffs), diffs.shape)
    return float(diffs[i, j]), int(i), int(j)


def _sphere_candidates(inst, sphere, strategy, rng, n_random, exact_cap=1000):
    q = inst.q
    m = len(sphere)
    n_exact = q**m if m * math.log(q) < 40 else None
    if strategy == "exact" or (strategy == "auto" and n_exact is not None and n_exact <= exact_cap):
        if n_exact is None or n_exact > exact_cap:
            raise CapExceededError(f"exact boundary search infeasible on a sphere of size {m}")
        grids = np.meshgrid(*[np.arange(q)] * m, indexing="ij")
        cands = np.stack([g.reshape(-1) for g in grids], axis=1)
        return cands, "exact"
    mono = np.repeat(np.arange(q)[:, None], m, axis=1)
    rand = rng.integers(0, q, size=(n_random, m))
    return np.concatenate([mono, rand], axis=0), "heuristic"


def _boundary_search(tree, inst, ell, strategy, seed, n_random, flip_rounds, flip_budget, theta):
    levels = tree.levels()
    if ell >= len(levels):
        return 0.0, "empty"
    sphere = levels[ell]
    rng = make_rng(seed, 1000 + ell)
    cands, mode = _sphere_candidates(inst, sphere, strategy, rng, n_random)
    margs = _root_marginals_batch(tree, inst, ell, cands, theta)
    keep = ~np.isnan(margs).any(axis=1)
    cand_pool, marg_pool = cands[keep], margs[keep]
    best, i, j = _max_pairwise_tv(marg_pool)
    if mode == "exact" or i is None:
        return best, mode

    for _ in range(flip_rounds):
        flips = np.repeat(cand_pool[i][None, :], flip_budget, axis=0)
        pos = rng.integers(0, len(sphere), size=flip_budget)
        col = rng.integers(0, inst.q, size=flip_budget)
        flips[np.arange(flip_budget), pos] = col
        fm = _root_marginals_batch(tree, inst, ell, flips, theta)
        fkeep = ~np.isnan(fm).any(axis=1)
        cand_pool = np.concatenate([cand_pool, flips[fkeep]], axis=0)
        marg_pool = np.concatenate([marg_pool, fm[fkeep]], axis=0)
        new_best, i, j = _max_pairwise_tv(marg_pool)
        if new_best <= best + 1e-15:
            best = max(best, new_best)
            break
        best = new_best
    return best, mode


def ssm_profile(tree, inst, r=None, depths=None, strategy="auto", seed=0, n_random_pairs=200, flip_rounds=2, flip_budget=40):
    """Worst sphere-pinning-pair TV at the root, per depth, on a tree instance."""
    tree = tree if isinstance(tree, RootedTree) else RootedTree.rooted(tree, r or 0)
    if r is not None and tree.root != r:
        tree = RootedTree.rooted(tree.graph, r)
    if depths is None:
        depths = list(range(1, len(tree.levels())))
    values = []
    modes = set()
    for ell in depths:
        v, mode = _boundary_search(tree, inst, ell, strategy, seed, n_random_pairs, flip_rounds, flip_budget, inst.theta)
        values.append(v)
        modes.add(mode)
    return _finish_profile(depths, values, {"kind": "ssm", "search": sorted(modes)})


def wsm_profile_potts(tree, q, beta, r=None, depths=None, strategy="auto", seed=0, n_random_pairs=200, flip_rounds=2, flip_budget=40):
    """Potts weak-spatial-mixing profile: full-sphere pinning pairs, no closer pins."""
    tree = tree if isinstance(tree, RootedTree) else RootedTree.rooted(tree, r or 0)
    if r is not None and tree.root != r:
        tree = RootedTree.rooted(tree.graph, r)
    inst = PottsInstance(tree.graph, q, beta)
    if depths is None:
        depths = list(range(1, len(tree.levels())))
    values = []
    modes = set()
    for ell in depths:
        if beta == 1.0:
            values.append(0.0)
            modes.add("independent")
            continue
        v, mode = _boundary_search(tree, inst, ell, strategy, seed, n_random_pairs, flip_rounds, flip_budget, inst.theta)
        values.append(v)
        modes.add(mode)
    return _finish_profile(depths, values, {"kind": "wsm-potts", "beta": beta, "search": sorted(modes)})


def tid_profile(tree_or_graph, inst, u, depths, state_cap=10**6):
    """Total influence of u on each sphere: max_{b,c} sum_v TV of conditionals."""
    graph = tree_or_graph.graph if isinstance(tree_or_graph, RootedTree) else tree_or_graph
    dist = graph.distances_from(u)
    margs = {}
    if graph.is_forest():
        for b in inst.lists[u]:
            try:
                margs[b] = conditional_marginals_forest(inst, Pinning({u: b}))
            except InfeasiblePinningError:
                continue
    else:
        table = enumerate_gibbs(inst, None, state_cap)
        mu_u = table.marginal(u)
        for b in inst.lists[u]:
            if mu_u[b] > 0.0:
                cond = table.condition(u, b)
                margs[b] = {v: cond.marginal(v) for v in cond.free}
    colors = sorted(margs)
    values = []
    for ell in depths:
        targets = [v for v in range(graph.n) if v != u and dist[v] == ell]
        best = 0.0
        for i, b in enumerate(colors):
            for c in colors[i + 1:]:
                s = sum(tv_distance(margs[b][v], margs[c][v]) for v in targets)
                best = max(best, s)
        values.append(best)
    return _finish_profile(list(depths), values, {"kind": "tid"})


# ---------------------------------------------------------------------------
# derived constants


@dataclass
class ConstantsReport:
    c_sm: float
    c_si: float
    c_infl: float
    delta_used: float
    regime: dict
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.c_sm > 0 and self.c_si > 0 and self.c_infl > 0):
            raise ParameterError("constants must be positive")

    def to_dict(self):
        return {
            "c_sm": self.c_sm,
            "c_si": self.c_si,
            "c_infl": self.c_infl,
            "delta_used": self.delta_used,
            "regime": self.regime,
            "extras": self.extras,
        }


def constants_report(regime, weight_scheme, marginal_bounds, delta):
    """Spatial-mixing constants from a weight scheme and marginal bounds.

    regime carries at least family and q; marginal_bounds is (lower_star,
    upper_star). The root-level norm can exceed 1 by a bounded factor in the
    weighted coloring regime, so root-adjusted variants are reported in
    extras (the factor itself is taken on authority, not derived here).
    """
    if not (0.0 < delta < 1.0):
        raise ParameterError("delta must lie in (0,1)")
    lower_star, upper_star = marginal_bounds
    if not (0.0 < lower_star <= upper_star < 1.0):
        raise ParameterError("need 0 < lower* <= upper* < 1")
    q = regime["q"]
    family = regime.get("family", "coloring")
    pot = potential_potts(regime["beta"]) if family == "potts" else potential_coloring()
    if weight_scheme is None:
        w_max = w_min = 1.0
    else:
        w_max, w_min = weight_scheme.w_max, weight_scheme.w_min
    phi_l = pot.dphi(lower_star)
    phi_b = pot.dphi(upper_star)
    c_sm = math.sqrt(q) / (1.0 - delta) * (w_max * phi_l) / (w_min * phi_b)
    c_si = (w_max * upper_star * phi_l) / (w_min * lower_star * phi_b)
    c_infl = math.sqrt(q) * c_si

    extras = {}
    if family == "coloring":
        root = ROOT_NORM_FACTOR / (w_min * (1.0 - delta))
        extras["c_sm_root"] = c_sm * root
        extras["c_si_root"] = c_si * ROOT_NORM_FACTOR / (1.0 - delta)
        extras["c_infl_root"] = math.sqrt(q) * extras["c_si_root"]
        extras["root_factor"] = ROOT_NORM_FACTOR
    eps = regime.get("eps")
    if eps is not None:
        delta_cap = regime["Delta"]
        extras["eps_rate"] = math.exp(-eps / 4.0)
        extras["eps_c_sm"] = 2.0 * q * math.sqrt(1.0 / (eps * delta_cap)) * math.exp(1.0 / eps + eps / 4.0)
        extras["eps_c_infl"] = q**3 / ((delta_cap * eps) ** 1.5 * (q - 1.0)) * math.exp(3.0 / eps)
    return ConstantsReport(c_sm, c_si, c_infl, delta, dict(regime), extras)


def coloring_regime_constants(q, Delta, delta_hat, gamma_weights=4):
    """Standard assembly for list colorings: weights at gamma_weights over all
    child profiles, bounds at gamma = q - Delta over all degrees."""
    gamma_b = q - Delta
    if gamma_b < 2:
        raise ParameterError("needs q >= Delta + 2 for the two-level bounds")
    profiles = [(d, dd) for dd in range(Delta) for d in range(dd + 1)]
    q_map = {p: q - (p[1] - p[0]) for p in profiles}
    d_map = {p: p[0] for p in profiles}
    ok = {p for p in profiles if q_map[p] >= d_map[p] + gamma_weights}
    scheme = weight_scheme_coloring({p: q_map[p] for p in ok}, {p: d_map[p] for p in ok}, gamma_weights)
    lower = bound_lower(q, gamma_b, Delta)
    upper = max(bound_two_level_odds(q, d, gamma_b)[1] for d in range(Delta + 1))
    regime = {"family": "coloring", "q": q, "Delta": Delta, "gamma_weights": gamma_weights, "gamma_bounds": gamma_b}
    eps = q / Delta - 1.0
    if 0.0 < eps < 1.0 and Delta >= 7.0 / eps**2:
        regime["eps"] = eps
    return constants_report(regime, scheme, (lower, upper), delta_hat)


def potts_regime_constants(q, beta, Delta, delta_hat):
    """Standard assembly for the Potts model; the marginal floor beta^Delta / q
    comes from conditioning on a worst-case neighborhood."""
    if beta <= 0.0:
        raise ParameterError("use the coloring assembly at beta = 0")
    scheme = weight_scheme_potts(q, beta, {d: d for d in range(Delta + 1)})
    lower = beta**Delta / q
    upper = max(
        bound_potts_two_level(q, beta, dd, d) for dd in range(Delta + 1) for d in range(dd + 1)
    )
    regime = {"family": "potts", "q": q, "Delta": Delta, "beta": beta}
    return constants_report(regime, scheme, (lower, upper), delta_hat)
