"""Potential functions, analytic Jacobian blocks, operator norms, weights, and
the numerical contraction certifier.

The message recursion g^phi = phi o g o phi^(-1) has per-child Jacobian blocks
that factor into a row scaling, a rank-one-projection core, and the diagonal
diag(sqrt(g (.) p_i)). The certifier scans degree configurations, samples the
capped subdistribution polytope (interior points, corner points, and the
adversarial near-tight profile), and reports the max certified operator norm
next to the closed-form bound of the matching proposition, never conflating
the two.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InfeasiblePinningError, InvalidInstanceError, ParameterError
from .graphs import make_rng
from .tree import (
    DENOM_EPS,
    _list_to_mask,
    _values,
    bound_potts_two_level,
    bound_two_level_odds,
    potts_wsm_cap,
    xi,
)

# ---------------------------------------------------------------------------
# potential functions


@dataclass(frozen=True)
class Potential:
    """Monotone reparameterization of marginals, phi'(x) = 1/(sqrt(x)(1 - theta x)).

    theta = 1 is the coloring potential 2*arctanh(sqrt(x)); theta = 1 - beta
    covers the Potts model, degenerating to 2*sqrt(x) at theta = 0.
    """

    kind: str
    theta: float

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        t = self.theta
        if np.any(x < 0):
            raise DomainError("phi needs x >= 0")
        if t == 1.0 and np.any(x >= 1.0):
            raise DomainError("coloring potential diverges at x = 1")
        if np.any(t * x >= 1.0):
            raise DomainError("potential diverges when theta*x >= 1")
        if t == 0.0:
            out = 2.0 * np.sqrt(x)
        else:
            out = (2.0 / math.sqrt(t)) * np.arctanh(np.sqrt(t * x))
        return out if out.ndim else float(out)

    def phi_inv(self, y):
        y = np.asarray(y, dtype=float)
        t = self.theta
        if np.any(y < 0):
            raise DomainError("phi_inv needs y >= 0")
        if t == 0.0:
            out = (y / 2.0) ** 2
        else:
            out = np.tanh(math.sqrt(t) * y / 2.0) ** 2 / t
        return out if out.ndim else float(out)

    def dphi(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            out = 1.0 / (np.sqrt(x) * (1.0 - self.theta * x))
        return out if out.ndim else float(out)

    def concavity_limit(self):
        """phi is concave on [0, limit]; caps beyond it lose the MVT argument."""
        return 1.0 / 3.0 if self.theta == 1.0 else (np.inf if self.theta == 0.0 else 1.0 / (3.0 * self.theta))


def potential_coloring():
    return Potential("coloring", 1.0)


def potential_potts(beta):
    if not (0.0 <= beta <= 1.0):
        raise ParameterError("beta must lie in [0,1]")
    return Potential("potts", 1.0 - beta)


def phi_eval(pot: Potential, x):
    return pot.phi(x)


# ---------------------------------------------------------------------------
# analytic Jacobian blocks


@dataclass
class JacobianBlocks:
    """Per-free-child q x q Jacobian blocks; entry (c, b) differentiates output
    color c by input color b of that child. Pinned children contribute zero
    blocks and are omitted."""

    blocks: np.ndarray  # (d, q, q)
    root_list: np.ndarray  # bool mask
    meta: dict = field(default_factory=dict)

    @property
    def d(self):
        return self.blocks.shape[0]

    @property
    def q(self):
        return self.blocks.shape[1]


def _recursion_value(children, mask, theta):
    num = mask.astype(float)
    for p in children:
        num = num * (1.0 - theta * p)
    num = np.where(mask, num, 0.0)
    z = num.sum()
    if z <= DENOM_EPS:
        raise InfeasiblePinningError("recursion denominator vanished")
    return num / z


def jacobian_plain(children, root_list, theta=1.0):
    """Blocks of the raw recursion: theta*(g g^T - diag g) diag(1 - theta p_i)^(-1)."""
    kids = [_values(p) for p in children]
    if not kids:
        raise InvalidInstanceError("need at least one child")
    q = len(kids[0])
    mask = _list_to_mask(root_list, q)
    g = _recursion_value(kids, mask, theta)
    core = np.outer(g, g) - np.diag(g)
    blocks = np.zeros((len(kids), q, q))
    for i, p in enumerate(kids):
        denom = 1.0 - theta * p
        if np.any(mask & (denom <= 0.0)):
            raise DomainError("singular column: child mass 1 on an active color")
        col = np.where(mask, 1.0 / np.where(denom <= 0.0, 1.0, denom), 0.0)
        blocks[i] = theta * core * col[None, :]
    return JacobianBlocks(blocks, mask, {"theta": theta})


def jacobian_phi(pot: Potential, children, root_list):
    """Blocks of the message recursion, in the factored form that is finite at
    zero child entries: theta * diag(1-theta g)^(-1) (sqrt g sqrt g^T - I) diag(sqrt(g (.) p_i))."""
    kids = [_values(p) for p in children]
    if not kids:
        raise InvalidInstanceError("need at least one child")
    q = len(kids[0])
    mask = _list_to_mask(root_list, q)
    theta = pot.theta
    g = _recursion_value(kids, mask, theta)
    sg = np.sqrt(g)
    core = np.outer(sg, sg) - np.eye(q)
    row = 1.0 / (1.0 - theta * g)
    blocks = np.zeros((len(kids), q, q))
    for i, p in enumerate(kids):
        col = np.sqrt(np.clip(g * p, 0.0, None))
        blocks[i] = theta * row[:, None] * core * col[None, :]
    blocks[:, ~mask, :] = 0.0
    blocks[:, :, ~mask] = 0.0
    return JacobianBlocks(blocks, mask, {"theta": theta, "g": g})


# ---------------------------------------------------------------------------
# operator norms


def power_iteration(s, tol=1e-10, maxiter=10**4, seed=0):
    """Rayleigh estimate of the top eigenvalue of a symmetric PSD matrix.

    Kept as an independent cross-check; the library's certified bounds use
    the LAPACK symmetric eigensolver, which is exact to machine precision,
    because a Rayleigh quotient only ever lower-bounds the top eigenvalue.
    """
    rng = make_rng(seed, 7)
    q = s.shape[0]
    v = rng.standard_normal(q)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(maxiter):
        w = s @ v
        nw = np.linalg.norm(w)
        if nw <= 0.0:
            return 0.0
        v = w / nw
        new = float(v @ s @ v)
        if abs(new - lam) <= tol * max(1.0, abs(new)):
            return new
        lam = new
    return lam


def _gram_sum(blocks):
    return np.einsum("dij,dkj->ik", blocks, blocks)


def l2_norm_sq(blocks):
    """Squared spectral norm of the concatenated (q x dq) Jacobian."""
    b = blocks.blocks if isinstance(blocks, JacobianBlocks) else np.asarray(blocks)
    if b.shape[0] == 0:
        return 0.0
    return float(np.linalg.eigvalsh(_gram_sum(b))[-1])


def _ascent_lower(b, seed=0, restarts=20, iters=300, tol=1e-13):
    d, q, _ = b.shape
    rng = make_rng(seed, 11)
    best = 0.0
    for r in range(restarts):
        y = rng.standard_normal(q)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            continue
        y /= ny
        prev = 0.0
        for _ in range(iters):
            jty = np.einsum("dcb,c->db", b, y)
            norms = np.linalg.norm(jty, axis=1)
            val = float(norms.sum())
            if val <= prev * (1.0 + tol) and val <= prev + tol:
                break
            prev = val
            x = jty / np.maximum(norms[:, None], 1e-300)
            z = np.einsum("dcb,db->c", b, x)
            nz = np.linalg.norm(z)
            if nz <= 0.0:
                break
            y = z / nz
        best = max(best, prev)
    return best


def norm_star_star(blocks, seed=0):
    """Certified interval for the star-star operator norm.

    upper: sqrt(d * lambda_max(sum_i J_i J_i^T)), the Cauchy-Schwarz bound.
    lower: alternating ascent over unit output directions with random restarts.
    """
    b = blocks.blocks if isinstance(blocks, JacobianBlocks) else np.asarray(blocks, dtype=float)
    if b.ndim != 3:
        raise InvalidInstanceError("blocks must be a (d, q, q) stack")
    d = b.shape[0]
    if d == 0:
        return 0.0, 0.0
    upper = math.sqrt(d * max(0.0, float(np.linalg.eigvalsh(_gram_sum(b))[-1])))
    lower = min(_ascent_lower(b, seed=seed), upper)
    return lower, upper


def norm_weighted(blocks, w_root, w_children, seed=0):
    """Weighted norm via exact rescaling: block i scales by w_root / w_i."""
    b = blocks.blocks if isinstance(blocks, JacobianBlocks) else np.asarray(blocks, dtype=float)
    w_children = np.asarray(w_children, dtype=float)
    if np.any(w_children <= 0.0) or w_root <= 0.0:
        raise ParameterError("weights must be positive")
    scaled = b * (w_root / w_children)[:, None, None]
    return norm_star_star(scaled, seed=seed)


# ---------------------------------------------------------------------------
# entropy-like functions and weight schemes


def f_entropy(x):
    """(1/x + 1) ln(1+x) - 1, the quantity bounded by 1 - e^(-x/2) on (0, 3/2)."""
    x = np.asarray(x, dtype=float)
    out = np.where(x > 0.0, (1.0 / np.where(x > 0.0, x, 1.0) + 1.0) * np.log1p(x) - 1.0, 0.0)
    return out if out.ndim else float(out)


def s_entropy(x):
    """(1/x) ln(1/(1-x)) - 1 with the continuous extension s(0) = 0."""
    x = np.asarray(x, dtype=float)
    safe = np.where((x > 0.0) & (x < 1.0), x, 0.5)
    out = np.where(x == 0.0, 0.0, -np.log1p(-safe) / safe - 1.0)
    if np.any(x >= 1.0) or np.any(x < 0.0):
        raise DomainError("s is defined on [0, 1)")
    return out if out.ndim else float(out)


@dataclass
class WeightScheme:
    """Per-vertex weights w = (1 - zeta)^(-1/2) with their cap parameters."""

    kind: str
    gamma: float | None
    xi: dict
    zeta: dict
    w: dict

    @property
    def w_max(self):
        return max(self.w.values())

    @property
    def w_min(self):
        return min(self.w.values())

    def weight(self, key):
        return self.w[key]


def weight_scheme_coloring(q_map, d_map, gamma):
    """Coloring weights from the amortized two-level caps.

    q_map and d_map share keys (vertices or (d, Delta) profiles); for each key
    zeta = ((q-1)/xi + 1) ln(1 + xi/(q-1)) - 1 and w = (1 - zeta)^(-1/2).
    """
    if gamma < 2:
        raise ParameterError("weights need gamma >= 2")
    xis, zetas, ws = {}, {}, {}
    for key in q_map:
        q_v, d_v = q_map[key], d_map[key]
        if q_v < d_v + gamma:
            raise ParameterError(f"q_v >= d_v + gamma violated at {key}")
        x = xi(gamma, d_v, q_v)
        zeta = f_entropy(x / (q_v - 1.0))
        if not (0.0 < zeta < 1.0):
            raise ParameterError(f"zeta out of (0,1) at {key}: {zeta}")
        xis[key] = x
        zetas[key] = zeta
        ws[key] = (1.0 - zeta) ** -0.5
    return WeightScheme("coloring", gamma, xis, zetas, ws)


def weight_scheme_potts(q, beta, Delta_map):
    """Potts weights zeta_v = s(theta * wsm_cap(Delta_v)); exact 1 at beta = 1."""
    theta = 1.0 - beta
    xis, zetas, ws = {}, {}, {}
    for key, d_v in Delta_map.items():
        cap = potts_wsm_cap(q, beta, d_v)
        x = theta * cap
        if x >= 3.0 / 5.0:
            raise DomainError(f"theta * cap = {x} >= 3/5 at {key}; outside the weight domain")
        zeta = 0.0 if theta == 0.0 else s_entropy(x)
        xis[key] = x
        zetas[key] = zeta
        ws[key] = (1.0 - zeta) ** -0.5
    return WeightScheme("potts", None, xis, zetas, ws)


# ---------------------------------------------------------------------------
# closed-form inequality bounds


def tech1_bound(q, gamma):
    """Cap on g_c(p) * sum_i p_i(c) when q = d + gamma and children obey 1/gamma."""
    if gamma < 2:
        raise ParameterError("bound needs gamma >= 2")
    return (1.0 / q) * math.exp(-gamma / q + 1.0 / (gamma - 1.0))


def amortized_bound(children_params, q, gamma):
    """Amortized cap (1/(e q)) exp((1/q) sum_i (zeta_i + 1)) from per-child (q_i, d_i)."""
    acc = 0.0
    for q_i, d_i in children_params:
        x = xi(gamma, d_i, q_i)
        acc += ((q_i - 1.0) / x + 1.0) * math.log1p(x / (q_i - 1.0))
    return (1.0 / (math.e * q)) * math.exp(acc / q)


def l2_bound_formula(q_r, gamma, xi_root, children_zetas):
    """Closed-form cap on the squared L2 norm of the message-Jacobian blocks."""
    zsum = float(np.sum(children_zetas))
    return (1.0 / q_r) * math.exp(2.0 * xi_root / (q_r - 1.0) - gamma / q_r) * math.exp(zsum / q_r)


def weighted_closed_form_sq(q_r, gamma, d_r):
    """Final display of the weighted coloring contraction proof (squared norm)."""
    x = xi(gamma, d_r, q_r)
    return math.exp(5.0 * x / (2.0 * (q_r - 1.0)) - 2.0 * gamma / q_r)


def unweighted_closed_form_sq(q_r, gamma_loc):
    """Squared star-star bound exp(-2 gamma/q + 3/(gamma-1)) at one configuration."""
    if gamma_loc <= 1:
        raise ParameterError("closed form needs gamma > 1")
    return math.exp(-2.0 * gamma_loc / q_r + 3.0 / (gamma_loc - 1.0))


def potts_closed_form_sq(q, beta, Delta_r):
    """Squared weighted-norm bound exp(5 tB/(2(1-tB)) + 2 t Delta_r / q - 2)."""
    theta = 1.0 - beta
    if theta == 0.0:
        return 0.0
    cap = potts_wsm_cap(q, beta, Delta_r)
    x = theta * cap
    return math.exp(5.0 * x / (2.0 * (1.0 - x)) + 2.0 * theta * Delta_r / q - 2.0)


# ---------------------------------------------------------------------------
# contraction certifier


@dataclass
class ContractionReport:
    """Sampled maximum certified norm next to the closed-form bound; never conflated."""

    regime: dict
    mode: str
    sample_count: int
    sampled_max_norm: float
    analytic_bound: float | None
    delta_hat: float
    worst_input: dict
    per_config: list

    def to_dict(self):
        return {
            "regime": self.regime,
            "mode": self.mode,
            "samples": self.sample_count,
            "sampled_max_norm": self.sampled_max_norm,
            "analytic_bound": self.analytic_bound,
            "delta_hat": self.delta_hat,
            "worst_input": self.worst_input,
            "per_config": self.per_config,
        }


def _interior_batch(rng, n, d, q, caps):
    raw = rng.dirichlet(np.ones(q + 1), size=(n, d))[..., :q]
    scale = rng.uniform(0.3, 1.0, size=(n, d, 1))
    raw = np.minimum(raw * (1.0 + scale), caps[..., None])  # push mass toward the caps
    total = raw.sum(axis=-1, keepdims=True)
    return raw / np.maximum(total, 1.0)  # keep the subdistribution mass constraint


def _corner_batch(rng, n, d, q, caps):
    """Polytope corner points: entries in {0, cap} plus one fractional remainder."""
    kmax = np.minimum(q, np.floor(1.0 / np.maximum(caps, 1e-12)).astype(int))
    k = (rng.random((n, d)) * (kmax + 1)).astype(int)
    inv = np.argsort(np.argsort(rng.random((n, d, q)), axis=-1), axis=-1)
    p = np.where(inv < k[..., None], caps[..., None], 0.0)
    rem = np.minimum(np.clip(1.0 - k * caps, 0.0, None), caps)
    return np.where(inv == k[..., None], rem[..., None], p)


def _adversarial_batch(d, q, caps, spread_colors):
    """Near-tight profile: a shared heavy color plus uniform mass on a few others."""
    spread = max(1, min(q - 1, int(round(spread_colors))))
    p = np.zeros((1, d, q))
    p[0, :, 0] = 1.0 / (d + 1.0)
    for i in range(d):
        cols = [1 + ((i * spread + j) % (q - 1)) for j in range(spread)]
        p[0, i, cols] = (1.0 - 1.0 / (d + 1.0)) / spread
    return np.minimum(p, caps[..., None])


def _batched_norm_sq(children, theta, w_ratio, pinned_colors=None):
    """Certified squared weighted norms d * lambda_max for a batch of inputs.

    children: (B, d, q); w_ratio: (B, d) entries w_root / w_i; pinned_colors:
    optional (B, n_pin) point-mass children entering g but carrying no block.
    """
    b, d, q = children.shape
    num = np.prod(1.0 - theta * children, axis=1)
    if pinned_colors is not None and pinned_colors.shape[1] > 0:
        rows = np.arange(b)
        for j in range(pinned_colors.shape[1]):
            num[rows, pinned_colors[:, j]] *= 1.0 - theta
    z = num.sum(axis=1, keepdims=True)
    ok = z[:, 0] > DENOM_EPS
    g = np.where(ok[:, None], num / np.where(z <= DENOM_EPS, 1.0, z), 0.0)
    sg = np.sqrt(g)
    core = sg[:, :, None] * sg[:, None, :] - np.eye(q)[None]
    row = 1.0 / (1.0 - theta * g)
    col = np.sqrt(np.clip(g[:, None, :] * children, 0.0, None))
    blocks = theta * row[:, None, :, None] * core[:, None, :, :] * col[:, :, None, :]
    blocks = blocks * w_ratio[:, :, None, None]
    gram = np.einsum("bdij,bdkj->bik", blocks, blocks)
    lam = np.linalg.eigvalsh(gram)[:, -1]
    out = d * np.clip(lam, 0.0, None)
    out[~ok] = np.nan
    return out, g


def _coloring_child_profile_tables(q, Delta, gamma):
    """caps and weights for every child profile (d_i <= Delta_i <= Delta-1)."""
    caps, ws = {}, {}
    for delta_i in range(Delta):
        for d_i in range(delta_i + 1):
            q_i = q - (delta_i - d_i)
            if q_i < d_i + gamma:
                continue
            _, cap = bound_two_level_odds(q_i, d_i, gamma)
            zeta = f_entropy(xi(gamma, d_i, q_i) / (q_i - 1.0))
            caps[(d_i, delta_i)] = cap
            ws[(d_i, delta_i)] = (1.0 - zeta) ** -0.5
    return caps, ws


def _sample_profiles(rng, n, d, table_keys):
    """Pick (d_i, Delta_i) per child uniformly among valid profiles; row 0 extreme."""
    keys = sorted(table_keys)
    idx = rng.integers(0, len(keys), size=(n, d))
    if n > 0:
        extreme = max(keys, key=lambda k: k[1] * 100 + k[0])
        idx[0] = keys.index(extreme)
    return [[keys[idx[a, i]] for i in range(d)] for a in range(n)]


def certify_contraction(family, q, Delta, beta=None, mode="strong", samples=10**4, seed=0):
    """Scan degree configurations and sampled capped inputs for norm violations.

    family: "coloring" (weighted two-level caps), "coloring_unweighted"
    (one-level caps, unit weights), or "potts" (WSM caps and weights).
    mode "weak" restricts to fully free roots. Pinned children at the root are
    folded in exactly: palette reduction for colorings, explicit point masses
    for Potts. Norms >= 1 are reported via delta_hat <= 0 rather than raised.
    """
    rng = make_rng(seed)
    regime = {"family": family, "q": int(q), "Delta": int(Delta)}
    warn = []
    gamma = None

    if family == "potts":
        if beta is None:
            raise ParameterError("potts regime needs beta")
        regime["beta"] = beta
        theta = 1.0 - beta
        if q < (1.0 - beta) * (Delta + 4) + 1:
            warn.append("outside q >= (1-beta)(Delta+4)+1")
        if mode != "weak":
            warn.append("strong mode for Potts has no closed-form bound in the weak-condition regime")
        configs = [
            (d_r, delta_r)
            for delta_r in range(1, Delta + 1)
            for d_r in ([delta_r] if mode == "weak" else range(1, delta_r + 1))
        ]
        child_caps, child_ws = {}, {}
        for delta_i in range(Delta):
            for d_i in range(delta_i + 1) if mode != "weak" else [delta_i]:
                child_caps[(d_i, delta_i)] = bound_potts_two_level(q, beta, delta_i, d_i)
                child_ws[(d_i, delta_i)] = weight_scheme_potts(q, beta, {0: delta_i}).w[0]
    elif family in ("coloring", "coloring_unweighted"):
        theta = 1.0
        weighted = family == "coloring"
        if weighted:
            gamma = 4 if q >= Delta + 3 else max(2, q - Delta)
            regime["gamma"] = gamma
            if q < Delta + 3:
                warn.append("outside q >= Delta + 3")
            child_caps, child_ws = _coloring_child_profile_tables(q, Delta, gamma)
        else:
            if q < Delta + 3 * math.sqrt(Delta):
                warn.append("outside q >= Delta + 3*sqrt(Delta)")
            child_caps, child_ws = None, None
        max_root = Delta - 1 if weighted else Delta
        configs = [
            (d_r, delta_r)
            for delta_r in range(1, max_root + 1)
            for d_r in ([delta_r] if mode == "weak" else range(1, delta_r + 1))
        ]
    else:
        raise ParameterError(f"unknown family {family!r}")

    per_config = []
    total = 0
    worst = {"norm": -1.0}
    analytic_sq = 0.0
    analytic_ok = True
    n_cfg = max(4, samples // max(1, len(configs)))

    for d_r, delta_r in configs:
        n_int = max(1, int(0.7 * n_cfg))
        n_cor = max(1, n_cfg - n_int)
        n_rows = n_int + n_cor
        pinned = None

        if family == "potts":
            q_r = q
            root_cap = potts_wsm_cap(q, beta, delta_r)
            w_r = weight_scheme_potts(q, beta, {0: delta_r}).w[0]
            closed_sq = potts_closed_form_sq(q, beta, delta_r) if mode == "weak" else None
            profiles = _sample_profiles(rng, n_rows, d_r, child_caps.keys())
            caps = np.array([[child_caps[p] for p in row] for row in profiles])
            ws = np.array([[child_ws[p] for p in row] for row in profiles])
            n_pin = delta_r - d_r
            if n_pin:
                pinned = rng.integers(0, q, size=(n_rows, n_pin))
            spread = (q - 1.0) / theta - delta_r if theta > 0 else q - 1
        else:
            q_r = q - (delta_r - d_r)
            if weighted:
                if q_r < d_r + gamma:
                    continue
                _, root_cap = bound_two_level_odds(q_r, d_r, gamma)
                zeta_r = f_entropy(xi(gamma, d_r, q_r) / (q_r - 1.0))
                w_r = (1.0 - zeta_r) ** -0.5
                closed_sq = weighted_closed_form_sq(q_r, gamma, d_r)
                profiles = _sample_profiles(rng, n_rows, d_r, child_caps.keys())
                caps = np.array([[child_caps[p] for p in row] for row in profiles])
                ws = np.array([[child_ws[p] for p in row] for row in profiles])
                spread = gamma
            else:
                gamma_loc = q_r - d_r
                if gamma_loc <= 1:
                    continue
                root_cap = 1.0 / gamma_loc
                w_r = 1.0
                closed_sq = unweighted_closed_form_sq(q_r, gamma_loc)
                caps = np.full((n_rows, d_r), 1.0 / gamma_loc)
                ws = np.ones((n_rows, d_r))
                spread = gamma_loc

        if closed_sq is None:
            analytic_ok = False

        pot = Potential("coloring" if theta == 1.0 else "potts", theta)
        if max(float(np.max(caps)), root_cap) > pot.concavity_limit() + 1e-12:
            warn.append("a marginal cap exceeds the potential concavity domain")

        batch = np.concatenate(
            [
                _interior_batch(rng, n_int, d_r, q_r, caps[:n_int]),
                _corner_batch(rng, n_cor, d_r, q_r, caps[n_int:n_rows]),
                _adversarial_batch(d_r, q_r, caps[:1], spread),
            ],
            axis=0,
        )
        wb = np.concatenate([ws, ws[:1]], axis=0)
        pin_b = None
        if pinned is not None:
            pin_b = np.concatenate([pinned, pinned[:1]], axis=0)
        norms_sq, _ = _batched_norm_sq(batch, theta, w_r / wb, pinned_colors=pin_b)
        valid = ~np.isnan(norms_sq)
        total += int(valid.sum())
        cfg_max_sq = float(np.nanmax(norms_sq)) if valid.any() else 0.0
        per_config.append(
            {
                "d_r": int(d_r),
                "Delta_r": int(delta_r),
                "q_r": int(q_r),
                "samples": int(valid.sum()),
                "max_norm_sq": cfg_max_sq,
                "closed_form_sq": closed_sq,
            }
        )
        if closed_sq is not None:
            analytic_sq = max(analytic_sq, closed_sq)
        if math.sqrt(max(cfg_max_sq, 0.0)) > worst["norm"]:
            k = int(np.nanargmax(norms_sq))
            worst = {
                "norm": math.sqrt(max(cfg_max_sq, 0.0)),
                "d_r": int(d_r),
                "Delta_r": int(delta_r),
                "q_r": int(q_r),
                "children": np.round(batch[k], 6).tolist(),
            }

    if family in ("coloring", "coloring_unweighted") and q > Delta:
        eps = q / Delta - 1.0
        if 0.0 < eps < 1.0 and Delta >= 7.0 / eps**2:
            regime["eps"] = eps
            regime["eps_regime_bound"] = math.exp(-eps / 4.0)
    if warn:
        regime["warnings"] = sorted(set(warn))
        for w in sorted(set(warn)):
            warnings.warn(w, stacklevel=2)

    sampled_max = max(worst["norm"], 0.0)
    return ContractionReport(
        regime=regime,
        mode=mode,
        sample_count=total,
        sampled_max_norm=sampled_max,
        analytic_bound=math.sqrt(analytic_sq) if analytic_ok and analytic_sq > 0 else None,
        delta_hat=1.0 - sampled_max,
        worst_input=worst,
        per_config=per_config,
    )
