"""The local coupling procedure, its disagreement recursion, and parameter search.

A trial couples the two conditional distributions that pin a center vertex to
two different colors. Free vertices on the radius-R sphere are optimally
coupled one at a time in random order; once the sphere is exhausted the ball
interior is sampled independently under each conditioning and the exterior is
shared (exact, because the fully pinned sphere separates). A failed sphere
coupling restarts two sub-couplings, one per discrepancy, glued through the
shared middle conditioning.

The glue runs the two sub-couplings independently and pairs the left coupling's
X with the right coupling's Y. Both output marginals are exact, so the mean
Hamming distance remains a valid Wasserstein upper bound; the trace records the
per-branch disagreement counts for diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DepthCapError, InvalidInstanceError, ParameterError, SearchCapError
from .graphs import Pinning, make_rng, validate_pinning
from .oracle import (
    conditional_marginal_exact,
    maximal_coupling_sample,
    sample_exact,
)

DEFAULT_DEPTH_CAP = 40


@dataclass
class CouplingOutcome:
    """A coupled pair of configurations on the free vertices, with its trace."""

    x: dict
    y: dict
    hamming: int
    trace: list = field(default_factory=list)


def algorithm1_couple(inst, pin, u, b, c, R, seed=0, stream=0, depth_cap=DEFAULT_DEPTH_CAP, state_cap=10**6):
    """One run of the local coupling between mu^{pin, u<-b} and mu^{pin, u<-c}.

    Raises DepthCapError when the restart recursion exceeds depth_cap; trial
    drivers record and discard such runs.
    """
    pin = validate_pinning(inst, pin or {})
    if u in pin:
        raise InvalidInstanceError("center vertex must be free")
    rng = make_rng(seed, stream)
    trace = []
    x, y = _couple(inst, pin, u, b, c, R, rng, trace, 0, depth_cap, state_cap)
    free = [v for v in range(inst.graph.n) if v not in pin and v != u]
    ham = sum(1 for v in free if x[v] != y[v])
    return CouplingOutcome(x, y, ham, trace)


def _couple(inst, pin, u, b, c, R, rng, trace, depth, depth_cap, state_cap):
    if depth > depth_cap:
        raise DepthCapError(f"coupling recursion exceeded depth {depth_cap}")
    free_others = [v for v in range(inst.graph.n) if v not in pin and v != u]

    if b == c:
        x = sample_exact(inst, pin.with_pin(u, b), free_others, rng, state_cap)
        trace.append({"event": "identical", "depth": depth})
        return x, dict(x)

    dist = inst.graph.distances_from(u)
    sphere_free = [v for v in free_others if dist[v] == R]
    if not sphere_free:
        interior = [v for v in free_others if 0 <= dist[v] <= R]
        exterior = [v for v in free_others if dist[v] > R or dist[v] < 0]
        pin_b = pin.with_pin(u, b)
        pin_c = pin.with_pin(u, c)
        z = sample_exact(inst, pin_b, exterior, rng, state_cap)
        pin_bz, pin_cz = pin_b, pin_c
        for v, col in z.items():
            pin_bz = pin_bz.with_pin(v, col)
            pin_cz = pin_cz.with_pin(v, col)
        x_in = sample_exact(inst, pin_bz, interior, rng, state_cap)
        y_in = sample_exact(inst, pin_cz, interior, rng, state_cap)
        trace.append({"event": "ball_sample", "depth": depth, "interior": len(interior)})
        x = dict(z)
        x.update(x_in)
        y = dict(z)
        y.update(y_in)
        return x, y

    v = sphere_free[int(rng.integers(len(sphere_free)))]
    marg_b = conditional_marginal_exact(inst, pin.with_pin(u, b), v, state_cap)
    marg_c = conditional_marginal_exact(inst, pin.with_pin(u, c), v, state_cap)
    vb, vc = maximal_coupling_sample(marg_b, marg_c, rng)
    trace.append({"event": "sphere_couple", "v": v, "xb": vb, "yc": vc, "agreed": vb == vc, "depth": depth})

    if vb == vc:
        x, y = _couple(inst, pin.with_pin(v, vb), u, b, c, R, rng, trace, depth + 1, depth_cap, state_cap)
        x[v] = vb
        y[v] = vc
        return x, y

    # restart: u-discrepancy with v fixed, then v-discrepancy under u <- c
    trace.append({"event": "restart", "at": v, "depth": depth})
    x1, _y1 = _couple(inst, pin.with_pin(v, vb), u, b, c, R, rng, trace, depth + 1, depth_cap, state_cap)
    _x2, y2 = _couple(inst, pin.with_pin(u, c), v, vb, vc, R, rng, trace, depth + 1, depth_cap, state_cap)
    d1 = sum(1 for k in x1 if x1[k] != _y1[k])
    d2 = sum(1 for k in y2 if _x2[k] != y2[k])
    trace.append({"event": "glue", "at": v, "left_hamming": d1, "right_hamming": d2, "depth": depth})
    # the right coupling pins u <- c and couples the remaining vertices, so
    # x1 and y2 both cover free_others minus v
    x = dict(x1)
    x[v] = vb
    y = dict(y2)
    y[v] = vc
    return x, y


def run_coupling_trials(inst, pin, u, b, c, R, trials, seed=0, depth_cap=DEFAULT_DEPTH_CAP, state_cap=10**6, threads=1):
    """Independent trials; depth-cap failures are discarded with a recorded flag."""
    outcomes = []
    discarded = 0

    def one(t):
        try:
            return algorithm1_couple(
                inst, pin, u, b, c, R, seed=seed, stream=t + 1, depth_cap=depth_cap, state_cap=state_cap
            )
        except DepthCapError:
            return None

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(trials)))
    else:
        results = [one(t) for t in range(trials)]
    for r in results:
        if r is None:
            discarded += 1
        else:
            outcomes.append(r)
    mean = float(np.mean([o.hamming for o in outcomes])) if outcomes else math.nan
    return {
        "outcomes": outcomes,
        "mean_hamming": mean,
        "completed": len(outcomes),
        "discarded": discarded,
    }


# ---------------------------------------------------------------------------
# disagreement recursion


def d_recursion(k, ell, delta_r, eps):
    """Memoized iteration of the disagreement recursion.

    D(k, 0) = delta_r (the ball size bound Delta^R) for all k, D(0, .) = delta_r,
    and D(k, l) = D(k-1, l-1) + (eps/l) (max_{m <= delta_r} D(k-1, m) + 1).
    delta_r is the integer Delta^R.
    """
    if k < 0 or ell < 0 or eps < 0:
        raise ParameterError("need k, ell >= 0 and eps >= 0")
    width = max(int(delta_r), ell)
    row = np.full(width + 1, float(delta_r))
    for _ in range(1, k + 1):
        prev_max = row[: int(delta_r) + 1].max()
        new = np.empty_like(row)
        new[0] = delta_r
        ls = np.arange(1, width + 1, dtype=float)
        new[1:] = row[:-1] + (eps / ls) * (prev_max + 1.0)
        row = new
    return float(row[ell])


def harmonic(n):
    return float(np.sum(1.0 / np.arange(1, n + 1))) if n >= 1 else 0.0


def d_closed_bound(ell, delta_r, eps, R=None, Delta=None):
    """Closed-form bound (1 + 2 eps H(ell)) * delta_r on the disagreement recursion."""
    if R is not None and Delta is not None:
        limit = 1.0 / (8.0 * R * math.log(Delta))
        if eps > limit:
            import warnings

            warnings.warn(f"eps = {eps} outside the regime eps <= {limit}", stacklevel=2)
    return (1.0 + 2.0 * eps * harmonic(ell)) * delta_r


# ---------------------------------------------------------------------------
# parameter search


def parameter_search(c_sm, c_infl, delta, Delta, r_cap=100_000, k_cap=1_000_000):
    """Smallest (R, K) with 2 C_sm (1-delta)^K Delta^R + C_infl (1-delta)^R
    below the influence-decay threshold 1/(8 R ln Delta); girth = 2K + 2.

    K additionally satisfies K >= ceil(ln(C_sm)/delta), required for the
    sphere-TV bound the left-hand term comes from.
    """
    if not (0.0 < delta < 1.0) or c_sm <= 0 or c_infl <= 0:
        raise ParameterError("need delta in (0,1) and positive constants")
    if Delta < 2:
        raise ParameterError("Delta must be at least 2")
    log_decay = math.log1p(-delta)
    k_floor = max(0, math.ceil(math.log(c_sm) / delta)) if c_sm > 1.0 else 0
    for r in range(2, r_cap + 1):
        threshold = 1.0 / (8.0 * r * math.log(Delta))
        tail = c_infl * math.exp(r * log_decay)
        if tail >= threshold:
            continue
        # solve for the smallest K: 2 C_sm (1-delta)^K Delta^R <= threshold - tail
        budget = threshold - tail
        k_min = math.log(budget / (2.0 * c_sm * Delta**r)) / log_decay
        k = max(r + 1, k_floor, math.ceil(k_min))
        while k <= k_cap:
            lhs = 2.0 * c_sm * math.exp(k * log_decay) * Delta**r + tail
            if lhs <= threshold:
                return r, k, 2 * k + 2
            k += 1
        raise SearchCapError("no K within cap for the first admissible R")
    raise SearchCapError("no (R, K) within caps satisfies the influence-decay threshold")
