"""Exact tree recursion, conditional marginals on forests, and closed-form marginal bounds.

The recursion maps children's subtree marginals to the parent marginal,

    g_c(p_1..p_d) = prod_i (1 - theta*p_i(c)) / sum_c' prod_i (1 - theta*p_i(c')),

with theta = 1 for proper list colorings and theta = 1 - beta for the
antiferromagnetic Potts model. Message passing on a forest computes every
conditional marginal exactly; the downward pass reuses upward messages so the
cost stays linear.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasiblePinningError, InvalidInstanceError, NotForestError, ParameterError
from .graphs import Graph, Pinning, RootedTree, validate_pinning

DENOM_EPS = 1e-300  # denominators below this are treated as infeasible


@dataclass(frozen=True)
class SubDistribution:
    """Capped subdistribution over the palette: entries in [0, cap], total mass <= 1."""

    values: np.ndarray
    cap: float = 1.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1:
            raise InvalidInstanceError("subdistribution must be a vector")
        if vals.min() < -1e-12 or vals.max() > self.cap + 1e-9:
            raise InvalidInstanceError("subdistribution entries outside [0, cap]")
        if vals.sum() > 1.0 + 1e-9:
            raise InvalidInstanceError("subdistribution mass exceeds 1")

    @classmethod
    def point_mass(cls, q, c):
        vals = np.zeros(q)
        vals[c] = 1.0
        return cls(vals)

    @classmethod
    def uniform(cls, q, colors=None):
        vals = np.zeros(q)
        cols = list(range(q)) if colors is None else list(colors)
        vals[cols] = 1.0 / len(cols)
        return cls(vals)

    def __len__(self):
        return len(self.values)


def _values(p):
    return p.values if isinstance(p, SubDistribution) else np.asarray(p, dtype=float)


def _list_to_mask(root_list, q):
    if isinstance(root_list, np.ndarray) and root_list.dtype == bool:
        return root_list
    mask = np.zeros(q, dtype=bool)
    mask[list(root_list)] = True
    return mask


# ---------------------------------------------------------------------------
# one recursion step


def recursion_step_coloring(root_list, children):
    """Parent marginal from children subtree marginals for list colorings."""
    kids = [_values(p) for p in children]
    q = len(kids[0]) if kids else len(_list_to_mask(root_list, 0))
    mask = _list_to_mask(root_list, q)
    num = mask.astype(float)
    for p in kids:
        num = num * (1.0 - p)
    num = np.where(mask, num, 0.0)
    z = num.sum()
    if z <= DENOM_EPS:
        raise InfeasiblePinningError("all root colors blocked in tree recursion")
    return SubDistribution(num / z)


def recursion_step_potts(q, beta, children):
    """Parent marginal from children subtree marginals for the Potts model."""
    theta = 1.0 - beta
    num = np.ones(q)
    for p in children:
        num = num * (1.0 - theta * _values(p))
    z = num.sum()
    if z <= DENOM_EPS:
        raise InfeasiblePinningError("tree recursion infeasible (possible only at beta = 0)")
    return SubDistribution(num / z)


# ---------------------------------------------------------------------------
# closed-form marginal bounds


def bound_one_level(gamma):
    """Universal cap 1/gamma on a marginal when q_r >= d_r + gamma."""
    if gamma <= 0:
        raise ParameterError("gamma must be positive")
    return 1.0 / gamma

def xi(gamma, d_v, q_v):
    """Amortization parameter (1 + 1/(gamma-1))^(gamma d_v / (q_v - 1))."""
    if gamma < 2 or q_v < 2:
        raise ParameterError("xi needs gamma >= 2 and q_v >= 2")
    return (1.0 + 1.0 / (gamma - 1.0)) ** (gamma * d_v / (q_v - 1.0))


def bound_two_level_odds(q_r, d_r, gamma):
    """Two-level cap: returns (odds_cap, prob_cap) with odds = p/(1-p).

    odds_cap = xi/(q_r - 1), prob_cap = xi/(q_r - 1 + xi).
    """
    if gamma < 2:
        raise ParameterError("two-level bound needs gamma >= 2")
    if q_r < d_r + gamma:
        raise ParameterError("two-level bound needs q_r >= d_r + gamma")
    x = xi(gamma, d_r, q_r)
    odds = x / (q_r - 1.0)
    return odds, x / (q_r - 1.0 + x)


def bound_lower(q, gamma, d_v):
    """Lower bound (1/q)(1 - 1/gamma)^d_v on the marginal of an available color."""
    if q < d_v + gamma:
        raise ParameterError("lower bound needs q >= d_v + gamma")
    return (1.0 / q) * (1.0 - 1.0 / gamma) ** d_v


def bound_potts_two_level(q, beta, Delta_r, d_r):
    """Potts two-level cap interpolating between fully pinned and fully free neighbors."""
    theta = 1.0 - beta
    if q <= theta * Delta_r:
        raise ParameterError("Potts bound needs q > (1 - beta) * Delta_r")
    if d_r > Delta_r:
        raise ParameterError("free neighbor count exceeds total neighbor count")
    base = ((q - 1.0) - theta * (Delta_r - d_r)) * (1.0 - theta / (q - 1.0)) ** d_r
    return 1.0 / (1.0 + base)


def potts_wsm_cap(q, beta, Delta_r):
    """The fully-free special case of the Potts two-level cap."""
    return bound_potts_two_level(q, beta, Delta_r, Delta_r)


# ---------------------------------------------------------------------------
# forest message passing

def _forest_structure(n, adj):
    """Roots, parent array, and topological order for an arbitrary forest."""
    parent = [-1] * n
    order = []
    seen = [False] * n
    roots = []
    for s in range(n):
        if seen[s]:
            continue
        roots.append(s)
        seen[s] = True
        queue = [s]
        qi = 0
        while qi < len(queue):
            x = queue[qi]
            qi += 1
            order.append(x)
            for y in adj[x]:
                if not seen[y]:
                    seen[y] = True
                    parent[y] = x
                    queue.append(y)
    return roots, parent, order


def _forest_pass(n, adj, potentials, theta, need_down=True):
    """Exact marginals on a forest given per-vertex potential rows.

    potentials[v, c] is the nonnegative weight of color c at v (0 on excluded
    colors). Returns (marginals, up) where up[v] is the marginal of v in its
    own subtree and marginals[v] conditions on the whole forest.
    """
    pot = np.asarray(potentials, dtype=float)
    q = pot.shape[1]
    if len(adj) != n or pot.shape[0] != n:
        raise InvalidInstanceError("potentials shape mismatch")
    roots, parent, order = _forest_structure(n, adj)
    children = [[] for _ in range(n)]
    for v in range(n):
        if parent[v] >= 0:
            children[parent[v]].append(v)

    up = np.zeros((n, q))
    up_msg = np.zeros((n, q))  # message (1 - theta*up) sent to the parent
    for v in reversed(order):
        w = pot[v].copy()
        for c in children[v]:
            w *= up_msg[c]
        z = w.sum()
        if z <= DENOM_EPS:
            raise InfeasiblePinningError(f"infeasible at vertex {v}")
        up[v] = w / z
        up_msg[v] = 1.0 - theta * up[v]

    if not need_down:
        return None, up

    marg = np.zeros((n, q))
    down_msg = np.ones((n, q))  # message from the parent side into v
    for v in order:
        w = pot[v] * down_msg[v]
        kids = children[v]
        if kids:
            # prefix/suffix products avoid dividing by zero message entries
            k = len(kids)
            msgs = np.stack([up_msg[c] for c in kids])
            prefix = np.ones((k + 1, q))
            for i in range(k):
                prefix[i + 1] = prefix[i] * msgs[i]
            suffix = np.ones((k + 1, q))
            for i in range(k - 1, -1, -1):
                suffix[i] = suffix[i + 1] * msgs[i]
            w_all = w * prefix[k]
            for i, c in enumerate(kids):
                rest = w * prefix[i] * suffix[i + 1]
                z = rest.sum()
                if z <= DENOM_EPS:
                    raise InfeasiblePinningError(f"infeasible at vertex {v}")
                down_msg[c] = 1.0 - theta * (rest / z)
            w = w_all
        z = w.sum()
        if z <= DENOM_EPS:
            raise InfeasiblePinningError(f"infeasible at vertex {v}")
        marg[v] = w / z
    return marg, up


def pinning_potentials(inst, pin):
    """Potential rows encoding lists and a pinning (hard lists, soft Potts fields)."""
    pin = validate_pinning(inst, pin)
    pot = inst.list_mask.astype(float).copy()
    for v, c in pin.items():
        row = np.zeros(inst.q)
        row[c] = 1.0
        pot[v] = row
    return pot, pin


def forest_feasible(inst, pin):
    """Exact feasibility of a pinning on a forest via the upward pass."""
    if not inst.graph.is_forest():
        raise NotForestError("feasibility-by-recursion requires a forest")
    pot, _ = pinning_potentials(inst, pin)
    try:
        _forest_pass(inst.graph.n, inst.graph.adj, pot, inst.theta, need_down=False)
    except InfeasiblePinningError:
        return False
    return True


@dataclass
class MarginalTable:
    """Exact conditional marginals, one row per free vertex."""

    q: int
    marginals: dict

    def __getitem__(self, v):
        return self.marginals[v]

    def __contains__(self, v):
        return v in self.marginals

    def vertices(self):
        return sorted(self.marginals)


def exact_tree_marginals(inst, tree, pin=None):
    """Exact conditional marginal of every free vertex of a tree.

    Upward messages followed by a downward re-rooting pass; exact on trees
    (and forests). Raises InfeasiblePinningError when the pinning does not
    extend.
    """
    if isinstance(tree, RootedTree):
        graph = tree.graph
    elif isinstance(tree, Graph):
        graph = tree
    else:
        raise InvalidInstanceError("tree must be a Graph or RootedTree")
    if graph is not inst.graph and graph != inst.graph:
        raise InvalidInstanceError("tree does not match the instance graph")
    if not graph.is_forest():
        raise NotForestError("exact_tree_marginals requires a forest")
    pot, pin = pinning_potentials(inst, pin or {})
    marg, _ = _forest_pass(graph.n, graph.adj, pot, inst.theta)
    pin.mark_feasible(True)
    table = {v: marg[v] for v in range(graph.n) if v not in pin}
    return MarginalTable(inst.q, table)


def subtree_marginals(inst, tree: RootedTree, pin=None):
    """Upward-pass marginals: row v is the marginal of v within its subtree T_v."""
    pot, _ = pinning_potentials(inst, pin or {})
    # respect the rooted orientation rather than the generic forest order
    q = inst.q
    theta = inst.theta
    up = np.zeros((tree.graph.n, q))
    up_msg = np.zeros((tree.graph.n, q))
    for v in tree.post_order():
        w = pot[v].copy()
        for c in tree.children[v]:
            w *= up_msg[c]
        z = w.sum()
        if z <= DENOM_EPS:
            raise InfeasiblePinningError(f"infeasible at vertex {v}")
        up[v] = w / z
        up_msg[v] = 1.0 - theta * up[v]
    return up


def reduce_by_pinning(inst, pin):
    """Project out pinned vertices.

    Returns (free, adj_free, potentials) where free maps new indices to
    original vertices, adj_free is the induced adjacency on free vertices,
    and potentials fold each pinned neighbor's edge factor into the row of
    its free neighbors (color removal for colorings, a beta field for Potts).
    """
    pin = validate_pinning(inst, pin)
    g = inst.graph
    free = [v for v in range(g.n) if v not in pin]
    index = {v: i for i, v in enumerate(free)}
    pot = inst.list_mask[free].astype(float).copy()
    beta = inst.beta if inst.is_potts else 0.0
    for u, cu in pin.items():
        for w in g.adj[u]:
            if w in pin:
                if pin.get(w) == cu and beta == 0.0:
                    raise InfeasiblePinningError(f"pinned vertices {u},{w} share color {cu}")
                continue
            pot[index[w], cu] *= beta
    adj_free = [tuple(index[w] for w in g.adj[v] if w not in pin) for v in free]
    return free, adj_free, pot


def conditional_marginals_forest(inst, pin):
    """Marginals of all free vertices when the reduced free graph is a forest.

    Works on any instance whose pinned vertices break all cycles. Raises
    NotForestError otherwise so callers can fall back to enumeration.
    """
    free, adj_free, pot = reduce_by_pinning(inst, pin)
    nf = len(free)
    edge_count = sum(len(a) for a in adj_free) // 2
    if edge_count >= nf and nf > 0:
        raise NotForestError("reduced free graph is not a forest")
    marg, _ = _forest_pass(nf, adj_free, pot, inst.theta)
    return {v: marg[i] for i, v in enumerate(free)}


def verify_marginal_caps(inst, tree: RootedTree, pin, gamma):
    """Check the two-level cap at every level of the upward pass.

    Returns None when every free vertex obeys its cap, otherwise the first
    violating vertex (in post-order) with the offending value and cap.
    """
    pin = validate_pinning(inst, pin)
    up = subtree_marginals(inst, tree, pin)
    for v in tree.post_order():
        if v in pin:
            continue
        kids = tree.children[v]
        d_v = sum(1 for c in kids if c not in pin)
        pinned_cols = {pin.get(c) for c in kids if c in pin}
        q_v = len([c for c in inst.lists[v] if c not in pinned_cols])
        if q_v < d_v + gamma:
            continue  # cap hypothesis does not apply at this vertex
        _, cap = bound_two_level_odds(q_v, d_v, gamma)
        val = up[v].max()
        if val > cap + 1e-12:
            return v, val, cap
    return None
