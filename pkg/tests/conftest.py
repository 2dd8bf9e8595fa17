import numpy as np
import pytest

import spinmix as sm


def random_feasible_pinning(inst, rng, max_pins=None, tries=60):
    """A feasible pinning drawn uniformly-ish; falls back to the empty pinning."""
    n = inst.graph.n
    cap = n - 1 if max_pins is None else min(max_pins, n - 1)
    for _ in range(tries):
        k = int(rng.integers(0, cap + 1))
        verts = sorted(int(v) for v in rng.choice(n, size=k, replace=False)) if k else []
        assign = {}
        for v in verts:
            lst = inst.lists[v]
            assign[v] = int(lst[int(rng.integers(len(lst)))])
        pin = sm.Pinning(assign)
        try:
            if sm.check_pinning_feasible(inst, pin):
                return pin
        except sm.errors.CapExceededError:
            continue
    return sm.Pinning({})


def random_lists(q, n, rng, min_size=2):
    out = []
    for _ in range(n):
        size = int(rng.integers(min_size, q + 1))
        out.append(sorted(int(c) for c in rng.choice(q, size=size, replace=False)))
    return out


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
