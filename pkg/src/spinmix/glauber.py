"""Single-site heat-bath dynamics with exact small-instance diagnostics.

One step picks a uniformly random free vertex and resamples its color from the
conditional distribution given every other current color (including its own
current color, i.e. standard heat-bath). Exact diagnostics build the full
transition matrix; empirical diagnostics (coalescence, autocorrelation) scale
past enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapExceededError, ErgodicityError, GenerationError, InvalidInstanceError
from .graphs import Pinning, make_rng, validate_pinning
from .oracle import enumerate_gibbs, tv_distance


@dataclass
class ChainState:
    """Current coloring, step counter, and the chain's own random stream."""

    coloring: np.ndarray
    step: int
    rng: np.random.Generator
    free: tuple


@dataclass
class MixingReport:
    """Diagnostic series: exact TV decay, coalescence times, or autocorrelation."""

    kind: str
    values: list
    summary: dict

    def to_dict(self):
        return {"kind": self.kind, "values": self.values, "summary": self.summary}


def _greedy_coloring(inst, pin):
    colors = np.full(inst.graph.n, -1, dtype=np.int64)
    for v, c in pin.items():
        colors[v] = c
    for v in range(inst.graph.n):
        if colors[v] >= 0:
            continue
        used = {colors[w] for w in inst.graph.adj[v] if colors[w] >= 0}
        options = [c for c in inst.lists[v] if c not in used]
        if options:
            colors[v] = options[0]
        elif inst.is_potts and inst.beta > 0.0:
            colors[v] = inst.lists[v][0]
        else:
            raise GenerationError(f"greedy initial coloring failed at vertex {v}")
    return colors


def check_ergodicity(inst, pin):
    """Colorings need |effective list| >= free degree + 2 at every free vertex.

    A free vertex with no free neighbors is exempt: its update is an exact
    conditional sample regardless of how many colors remain.
    """
    if inst.is_potts and inst.beta > 0.0:
        return
    for v in range(inst.graph.n):
        if v in pin:
            continue
        pinned_cols = {pin.get(w) for w in inst.graph.adj[v] if w in pin}
        eff = [c for c in inst.lists[v] if c not in pinned_cols]
        free_deg = sum(1 for w in inst.graph.adj[v] if w not in pin)
        if free_deg == 0 and eff:
            continue
        if len(eff) < free_deg + 2:
            raise ErgodicityError(
                f"vertex {v}: effective list size {len(eff)} < free degree {free_deg} + 2"
            )


def make_chain(inst, pin=None, seed=0, stream=0):
    """Construct a chain state; the ergodicity precondition is checked here once."""
    pin = validate_pinning(inst, pin or {})
    check_ergodicity(inst, pin)
    colors = _greedy_coloring(inst, pin)
    free = tuple(v for v in range(inst.graph.n) if v not in pin)
    if not free:
        raise InvalidInstanceError("no free vertices to update")
    return ChainState(colors, 0, make_rng(seed, stream), free)


def conditional_distribution(inst, v, colors):
    """Heat-bath conditional of vertex v given all other current colors."""
    if inst.is_potts:
        same = np.zeros(inst.q)
        for w in inst.graph.adj[v]:
            same[colors[w]] += 1.0
        weights = np.where(same > 0, inst.beta**same, 1.0) if inst.beta > 0.0 else (same == 0).astype(float)
    else:
        weights = np.zeros(inst.q)
        weights[list(inst.lists[v])] = 1.0
        for w in inst.graph.adj[v]:
            weights[colors[w]] = 0.0
    z = weights.sum()
    if z <= 0.0:
        raise InvalidInstanceError(f"vertex {v} has no available color")
    return weights / z


def glauber_step(inst, pin, state: ChainState):
    """One heat-bath update; returns a new state, advancing the chain's stream."""
    v = state.free[int(state.rng.integers(len(state.free)))]
    probs = conditional_distribution(inst, v, state.coloring)
    new_colors = state.coloring.copy()
    new_colors[v] = _sample_inverse_cdf(probs, float(state.rng.random()))
    return ChainState(new_colors, state.step + 1, state.rng, state.free)


def _sample_inverse_cdf(probs, u):
    cdf = np.cumsum(probs)
    return int(np.searchsorted(cdf, u * cdf[-1], side="right").clip(0, len(probs) - 1))


def run_chain(inst, pin, steps, seed=0, stream=0, record_every=0):
    """Run a chain in place for speed; trajectory is identical to repeated glauber_step."""
    pin = validate_pinning(inst, pin or {})
    state = make_chain(inst, pin, seed, stream)
    colors = state.coloring
    rng = state.rng
    snapshots = []
    for t in range(steps):
        v = state.free[int(rng.integers(len(state.free)))]
        probs = conditional_distribution(inst, v, colors)
        colors[v] = _sample_inverse_cdf(probs, float(rng.random()))
        if record_every and (t + 1) % record_every == 0:
            snapshots.append(colors.copy())
    return ChainState(colors, steps, rng, state.free), snapshots


# ---------------------------------------------------------------------------
# exact diagnostics


def transition_matrix(inst, pin=None, state_cap=5000):
    """Exact heat-bath transition matrix over the feasible states.

    Returns (P, table) where row order follows the enumeration order of the
    Gibbs table; rows sum to 1 and pi P = pi holds exactly (reversibility).
    """
    table = enumerate_gibbs(inst, pin, state_cap)
    if table.support_size > state_cap:
        raise CapExceededError("state space exceeds transition-matrix cap")
    states = table.states
    free = table.free
    nfree = len(free)
    index = {tuple(row): i for i, row in enumerate(states.tolist())}
    n_states = len(states)
    p = np.zeros((n_states, n_states))
    colors_full = np.full(inst.graph.n, -1, dtype=np.int64)
    for v, c in table.pinned.items():
        colors_full[v] = c
    for i, row in enumerate(states):
        colors_full[list(free)] = row
        for j, v in enumerate(free):
            probs = conditional_distribution(inst, v, colors_full)
            for c in np.nonzero(probs > 0.0)[0]:
                key = list(row)
                key[j] = int(c)
                k = index.get(tuple(key))
                if k is None:
                    continue  # zero-probability target under hard constraints
                p[i, k] += probs[c] / nfree
    return p, table


def stationarity_gap(inst, pin=None, state_cap=5000):
    """max |pi P - pi|: an exactness check of the dynamics against the oracle."""
    p, table = transition_matrix(inst, pin, state_cap)
    pi = table.probs
    return float(np.abs(pi @ p - pi).max())


def exact_mixing_time(inst, pin=None, eps=0.25, state_cap=5000):
    """Smallest t with worst-start TV(P^t(x, .), pi) <= eps, by matrix powering."""
    if eps >= 1.0:
        return 0
    p, table = transition_matrix(inst, pin, state_cap)
    pi = table.probs

    def dist(mat):
        return float(0.5 * np.abs(mat - pi[None, :]).sum(axis=1).max())

    # bracket by repeated squaring, then binary search with cached powers
    powers = [p]
    t = 1
    while dist(powers[-1]) > eps:
        powers.append(powers[-1] @ powers[-1])
        t *= 2
        if t > 2**40:
            raise CapExceededError("mixing time exceeds 2^40 steps")
    if t == 1:
        return 1

    lo, hi = t // 2, t  # dist(lo) > eps >= dist(hi)

    def power_of(n):
        out = None
        bit = 0
        while n:
            if n & 1:
                out = powers[bit] if out is None else out @ powers[bit]
            n >>= 1
            bit += 1
        return out

    while hi - lo > 1:
        mid = (lo + hi) // 2
        if dist(power_of(mid)) <= eps:
            hi = mid
        else:
            lo = mid
    return hi


def tv_decay_report(inst, pin=None, horizon=200, state_cap=2000):
    """Exact worst-start TV distance to stationarity at 1..horizon steps."""
    p, table = transition_matrix(inst, pin, state_cap)
    pi = table.probs
    values = []
    mat = np.eye(len(pi))
    for _ in range(horizon):
        mat = mat @ p
        values.append(float(0.5 * np.abs(mat - pi[None, :]).sum(axis=1).max()))
    t_mix = next((t + 1 for t, v in enumerate(values) if v <= 0.25), None)
    return MixingReport("exact_tv", values, {"t_mix_quarter": t_mix, "horizon": horizon})


def spectral_gap(inst, pin=None, state_cap=2000):
    p, _ = transition_matrix(inst, pin, state_cap)
    eig = np.sort(np.linalg.eigvals(p).real)
    return float(1.0 - eig[-2]) if len(eig) > 1 else 1.0


# ---------------------------------------------------------------------------
# empirical diagnostics


def coalescence_estimate(inst, pin=None, trials=100, seed=0, max_steps=10**6):
    """Coalescence times of identity-coupled chains from a maximal-disagreement pair.

    Both chains share the random vertex choice and the uniform used by the
    inverse-CDF update, so once equal they stay equal. Trials hitting the step
    cap are reported in the summary instead of being silently dropped.
    """
    pin = validate_pinning(inst, pin or {})
    check_ergodicity(inst, pin)
    free = tuple(v for v in range(inst.graph.n) if v not in pin)
    base = _greedy_coloring(inst, pin)
    other = _greedy_disagreeing(inst, pin, base)
    times = []
    timeouts = 0
    for trial in range(trials):
        rng = make_rng(seed, trial + 1)
        x = base.copy()
        y = other.copy()
        t = 0
        while not np.array_equal(x, y):
            t += 1
            if t > max_steps:
                timeouts += 1
                t = None
                break
            v = free[int(rng.integers(len(free)))]
            u = float(rng.random())
            x[v] = _sample_inverse_cdf(conditional_distribution(inst, v, x), u)
            y[v] = _sample_inverse_cdf(conditional_distribution(inst, v, y), u)
        if t is not None:
            times.append(t)
    summary = {
        "trials": trials,
        "timeouts": timeouts,
        "mean": float(np.mean(times)) if times else None,
        "median": float(np.median(times)) if times else None,
        "initial_disagreements": int((base[list(free)] != other[list(free)]).sum()),
    }
    return MixingReport("coalescence", times, summary)


def _greedy_disagreeing(inst, pin, base):
    """A feasible start disagreeing with `base` at as many free vertices as possible."""
    colors = np.full(inst.graph.n, -1, dtype=np.int64)
    for v, c in pin.items():
        colors[v] = c
    for v in range(inst.graph.n):
        if colors[v] >= 0:
            continue
        used = {colors[w] for w in inst.graph.adj[v] if colors[w] >= 0}
        options = [c for c in inst.lists[v] if c not in used and c != base[v]]
        if options:
            colors[v] = options[-1]
        else:
            fallback = [c for c in inst.lists[v] if c not in used]
            if fallback:
                colors[v] = fallback[-1]
            elif inst.is_potts and inst.beta > 0.0:
                colors[v] = inst.lists[v][-1]
            else:
                raise GenerationError(f"no feasible disagreeing start at vertex {v}")
    return colors


def autocorrelation_estimate(inst, pin=None, steps=20000, burnin=2000, seed=0, max_lag=200):
    """Autocorrelation of the indicator that vertex 0's color equals its start.

    A raw trend diagnostic for scales beyond enumeration; no constant is
    asserted against it.
    """
    pin = validate_pinning(inst, pin or {})
    state, _ = run_chain(inst, pin, burnin, seed, stream=0)
    v0 = state.free[0]
    ref = int(state.coloring[v0])
    series = np.empty(steps)
    colors = state.coloring
    rng = state.rng
    for t in range(steps):
        v = state.free[int(rng.integers(len(state.free)))]
        probs = conditional_distribution(inst, v, colors)
        colors[v] = _sample_inverse_cdf(probs, float(rng.random()))
        series[t] = 1.0 if colors[v0] == ref else 0.0
    series -= series.mean()
    denom = float(series @ series)
    values = []
    for lag in range(1, max_lag + 1):
        if denom <= 0:
            values.append(0.0)
        else:
            values.append(float(series[:-lag] @ series[lag:]) / denom)
    tau = 1.0 + 2.0 * float(np.sum(np.clip(values, 0.0, None)))
    return MixingReport("autocorrelation", values, {"integrated_time": tau, "steps": steps})
