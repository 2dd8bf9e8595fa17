"""Graphs, rooted trees, spin-system instances, pinnings, and their file formats.

Vertices are integers 0..n-1 and colors are integers 0..q-1. All iteration
orders (adjacency, edge lists, enumeration) are deterministic so that seeded
experiments reproduce bit for bit.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    CapExceededError,
    GenerationError,
    InvalidInstanceError,
)

INFINITE = math.inf


def make_rng(seed, stream=0):
    """Counter-based generator; distinct (seed, stream) pairs give independent streams."""
    return np.random.Generator(np.random.Philox(key=[int(seed) & (2**64 - 1), int(stream) & (2**64 - 1)]))


# ---------------------------------------------------------------------------
# graphs


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph with sorted adjacency lists."""

    n: int
    edges: tuple

    def __post_init__(self):
        seen = set()
        for u, v in self.edges:
            if u == v:
                raise InvalidInstanceError(f"self-loop at vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise InvalidInstanceError(f"edge ({u},{v}) out of range")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise InvalidInstanceError(f"duplicate edge {key}")
            seen.add(key)

    @classmethod
    def from_edges(cls, n, edges):
        canon = sorted({(min(u, v), max(u, v)) for u, v in edges})
        return cls(n, tuple(canon))

    @cached_property
    def adj(self):
        nbrs = [[] for _ in range(self.n)]
        for u, v in self.edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
        return tuple(tuple(sorted(a)) for a in nbrs)

    def neighbors(self, v):
        return self.adj[v]

    def degree(self, v):
        return len(self.adj[v])

    @cached_property
    def degrees(self):
        return tuple(len(a) for a in self.adj)

    def max_degree(self):
        return max(self.degrees) if self.n else 0

    def distances_from(self, u):
        """BFS distances; -1 marks unreachable vertices."""
        dist = np.full(self.n, -1, dtype=np.int64)
        dist[u] = 0
        queue = deque([u])
        while queue:
            x = queue.popleft()
            for y in self.adj[x]:
                if dist[y] < 0:
                    dist[y] = dist[x] + 1
                    queue.append(y)
        return dist

    def is_forest(self):
        if len(self.edges) >= self.n and self.n > 0:
            return False
        seen = [False] * self.n
        for s in range(self.n):
            if seen[s]:
                continue
            seen[s] = True
            stack = [(s, -1)]
            while stack:
                x, par = stack.pop()
                for y in self.adj[x]:
                    if y == par:
                        par = -2  # consume one back-edge to the parent only
                        continue
                    if seen[y]:
                        return False
                    seen[y] = True
                    stack.append((y, x))
        return True

    def is_connected(self):
        if self.n <= 1:
            return True
        return int((self.distances_from(0) >= 0).sum()) == self.n


def sphere(g: Graph, u, r):
    """Vertices at graph distance exactly r from u."""
    if r < 0:
        raise InvalidInstanceError("sphere radius must be nonnegative")
    dist = g.distances_from(u)
    return set(np.nonzero(dist == r)[0].tolist())


def ball(g: Graph, u, r):
    """Vertices at graph distance at most r from u."""
    dist = g.distances_from(u)
    return set(np.nonzero((dist >= 0) & (dist <= r))[0].tolist())


def girth(g: Graph):
    """Length of a shortest cycle; INFINITE for forests.

    BFS from every vertex; a non-tree edge between BFS levels d(x), d(y)
    witnesses a cycle through the root of length d(x) + d(y) + 1.
    """
    best = INFINITE
    for s in range(g.n):
        dist = np.full(g.n, -1, dtype=np.int64)
        parent = np.full(g.n, -1, dtype=np.int64)
        dist[s] = 0
        queue = deque([s])
        while queue:
            x = queue.popleft()
            if 2 * dist[x] >= best:
                break
            for y in g.adj[x]:
                if dist[y] < 0:
                    dist[y] = dist[x] + 1
                    parent[y] = x
                    queue.append(y)
                elif y != parent[x] and (dist[y] == dist[x] or dist[y] == dist[x] + 1):
                    # dist equal: odd cycle; dist+1: even cycle through s
                    best = min(best, int(dist[x] + dist[y] + 1))
    return best


# ---------------------------------------------------------------------------
# rooted trees


@dataclass(frozen=True)
class RootedTree:
    """A connected acyclic graph with a distinguished root and child order."""

    graph: Graph
    root: int
    parent: tuple
    children: tuple
    order: tuple  # topological, parents before children
    depth: tuple

    @classmethod
    def rooted(cls, graph: Graph, root=0):
        if not graph.is_forest() or not graph.is_connected():
            raise InvalidInstanceError("rooted tree requires a connected acyclic graph")
        parent = [-1] * graph.n
        depth = [0] * graph.n
        order = [root]
        seen = [False] * graph.n
        seen[root] = True
        queue = deque([root])
        while queue:
            x = queue.popleft()
            for y in graph.adj[x]:
                if not seen[y]:
                    seen[y] = True
                    parent[y] = x
                    depth[y] = depth[x] + 1
                    order.append(y)
                    queue.append(y)
        children = [[] for _ in range(graph.n)]
        for v in range(graph.n):
            if parent[v] >= 0:
                children[parent[v]].append(v)
        return cls(
            graph,
            root,
            tuple(parent),
            tuple(tuple(sorted(c)) for c in children),
            tuple(order),
            tuple(depth),
        )

    def post_order(self):
        return tuple(reversed(self.order))

    def levels(self):
        height = max(self.depth) if self.depth else 0
        out = [[] for _ in range(height + 1)]
        for v in self.order:
            out[self.depth[v]].append(v)
        return out

    def subtree(self, v):
        """Vertices of the subtree rooted at v, in topological order."""
        out = [v]
        i = 0
        while i < len(out):
            out.extend(self.children[out[i]])
            i += 1
        return out


# ---------------------------------------------------------------------------
# constructors


def path_graph(n):
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n):
    if n < 3:
        raise InvalidInstanceError("a cycle needs at least 3 vertices")
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n):
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def dary_tree(branching, height):
    """Complete braching^height tree with BFS vertex numbering (root 0).

    Children of vertex v occupy a contiguous index range, which the decay
    harness exploits for level-vectorized message passing.
    """
    if branching < 1:
        raise InvalidInstanceError("branching factor must be >= 1")
    edges = []
    level_start = 0
    level_size = 1
    nxt = 1
    for _ in range(height):
        for v in range(level_start, level_start + level_size):
            for _ in range(branching):
                edges.append((v, nxt))
                nxt += 1
        level_start += level_size
        level_size *= branching
    return Graph.from_edges(nxt, edges)


def random_tree(n, max_degree, rng):
    """Uniform-attachment random tree respecting a degree cap."""
    if n <= 0:
        raise InvalidInstanceError("need at least one vertex")
    edges = []
    deg = [0] * n
    for v in range(1, n):
        options = [u for u in range(v) if deg[u] < max_degree]
        if not options:
            raise GenerationError("degree cap too small for a spanning tree")
        u = options[int(rng.integers(len(options)))]
        edges.append((u, v))
        deg[u] += 1
        deg[v] += 1
    return Graph.from_edges(n, edges)


def generate_girth_graph(n, max_degree, min_girth, seed, target_edges=None, attempts=None):
    """Random graph with max degree <= max_degree and girth >= min_girth.

    Incremental random edge insertion; a candidate edge is rejected when it
    would close a cycle shorter than min_girth (current-distance BFS check)
    or violate the degree cap. Deterministic for a fixed seed.
    """
    rng = make_rng(seed)
    if attempts is None:
        attempts = 60 * n * max(1, max_degree)
    adj = [set() for _ in range(n)]
    edges = []

    def dist(u, v):
        if u == v:
            return 0
        seen = {u: 0}
        queue = deque([u])
        while queue:
            x = queue.popleft()
            for y in adj[x]:
                if y not in seen:
                    seen[y] = seen[x] + 1
                    if y == v:
                        return seen[y]
                    queue.append(y)
        return INFINITE

    for _ in range(attempts):
        if target_edges is not None and len(edges) >= target_edges:
            break
        u = int(rng.integers(n))
        v = int(rng.integers(n))
        if u == v:
            continue
        a, b = min(u, v), max(u, v)
        if b in adj[a] or len(adj[a]) >= max_degree or len(adj[b]) >= max_degree:
            continue
        if min_girth > 3 and dist(a, b) + 1 < min_girth:
            continue
        adj[a].add(b)
        adj[b].add(a)
        edges.append((a, b))
    if target_edges is not None and len(edges) < target_edges:
        raise GenerationError(
            f"could not reach {target_edges} edges after {attempts} attempts (got {len(edges)})"
        )
    return Graph.from_edges(n, edges)


def parse_graph_spec(spec):
    """Built-in constructors: bintree:h, dary:d:h, path:n, cycle:n, complete:n."""
    parts = spec.split(":")
    kind = parts[0]
    try:
        if kind == "bintree":
            return dary_tree(2, int(parts[1]))
        if kind == "dary":
            return dary_tree(int(parts[1]), int(parts[2]))
        if kind == "path":
            return path_graph(int(parts[1]))
        if kind == "cycle":
            return cycle_graph(int(parts[1]))
        if kind == "complete":
            return complete_graph(int(parts[1]))
    except (IndexError, ValueError) as exc:
        raise InvalidInstanceError(f"bad graph spec {spec!r}") from exc
    raise InvalidInstanceError(f"unknown graph spec {spec!r}")


# ---------------------------------------------------------------------------
# spin-system instances


@dataclass(frozen=True)
class ColoringInstance:
    """List-coloring instance: per-vertex color lists inside a palette of q colors."""

    graph: Graph
    q: int
    lists: tuple

    def __post_init__(self):
        if len(self.lists) != self.graph.n:
            raise InvalidInstanceError("one color list per vertex required")
        for v, lst in enumerate(self.lists):
            if len(lst) == 0:
                raise InvalidInstanceError(f"empty list at vertex {v}")
            if len(set(lst)) != len(lst):
                raise InvalidInstanceError(f"duplicate colors in list at vertex {v}")
            if min(lst) < 0 or max(lst) >= self.q:
                raise InvalidInstanceError(f"color out of palette at vertex {v}")

    @classmethod
    def full(cls, graph, q):
        lst = tuple(range(q))
        return cls(graph, q, tuple(lst for _ in range(graph.n)))

    @classmethod
    def with_lists(cls, graph, q, lists):
        return cls(graph, q, tuple(tuple(sorted(l)) for l in lists))

    @cached_property
    def list_mask(self):
        mask = np.zeros((self.graph.n, self.q), dtype=bool)
        for v, lst in enumerate(self.lists):
            mask[v, list(lst)] = True
        mask.setflags(write=False)
        return mask

    @property
    def beta(self):
        return 0.0

    @property
    def theta(self):
        return 1.0

    @property
    def is_potts(self):
        return False


@dataclass(frozen=True)
class PottsInstance:
    """Antiferromagnetic Potts model: global palette [q], monochromatic-edge weight beta."""

    graph: Graph
    q: int
    beta: float

    def __post_init__(self):
        if self.q < 2:
            raise InvalidInstanceError("Potts model needs q >= 2")
        if not (0.0 <= self.beta <= 1.0):
            raise InvalidInstanceError("inverse temperature must lie in [0,1]")

    @property
    def lists(self):
        lst = tuple(range(self.q))
        return tuple(lst for _ in range(self.graph.n))

    @cached_property
    def list_mask(self):
        mask = np.ones((self.graph.n, self.q), dtype=bool)
        mask.setflags(write=False)
        return mask

    @property
    def theta(self):
        return 1.0 - self.beta

    @property
    def is_potts(self):
        return True


def edge_weight(inst, a, b):
    """Boltzmann factor of an edge whose endpoints take colors a and b."""
    if a != b:
        return 1.0
    return inst.beta if inst.is_potts else 0.0


# ---------------------------------------------------------------------------
# pinnings


class Pinning:
    """A partial assignment of colors to vertices.

    The feasibility flag is unset until an extendability check records it.
    """

    __slots__ = ("assignments", "_feasible")

    def __init__(self, assignments=None):
        self.assignments = dict(sorted((assignments or {}).items()))
        self._feasible = None

    @classmethod
    def of(cls, mapping=None):
        if isinstance(mapping, Pinning):
            return mapping
        return cls(mapping)

    @property
    def feasible(self):
        return self._feasible

    def mark_feasible(self, flag):
        self._feasible = bool(flag)

    def items(self):
        return self.assignments.items()

    def get(self, v, default=None):
        return self.assignments.get(v, default)

    def vertices(self):
        return set(self.assignments)

    def with_pin(self, v, c):
        new = dict(self.assignments)
        new[v] = c
        return Pinning(new)

    def __contains__(self, v):
        return v in self.assignments

    def __len__(self):
        return len(self.assignments)

    def __iter__(self):
        return iter(self.assignments)

    def __eq__(self, other):
        return isinstance(other, Pinning) and self.assignments == other.assignments

    def __repr__(self):
        return f"Pinning({self.assignments})"


def validate_pinning(inst, pin):
    pin = Pinning.of(pin)
    for v, c in pin.items():
        if not (0 <= v < inst.graph.n):
            raise InvalidInstanceError(f"pinned vertex {v} out of range")
        if c not in inst.lists[v]:
            raise InvalidInstanceError(f"pinned color {c} not in list of vertex {v}")
    return pin


def check_pinning_feasible(inst, pin, state_cap=10**6):
    """True iff some full proper configuration extends the pinning.

    Exact on forests via the tree recursion; backtracking search with a
    node-expansion cap on general graphs. Potts with beta > 0 is always
    feasible once list membership holds.
    """
    pin = validate_pinning(inst, pin)
    if inst.is_potts and inst.beta > 0.0:
        pin.mark_feasible(True)
        return True
    g = inst.graph
    if g.is_forest():
        from .tree import forest_feasible

        ok = forest_feasible(inst, pin)
        pin.mark_feasible(ok)
        return ok

    # hard-constraint backtracking on the free vertices
    free = [v for v in range(g.n) if v not in pin]
    free.sort(key=lambda v: -g.degree(v))
    assigned = dict(pin.items())
    for u, cu in pin.items():
        for w in g.adj[u]:
            if w in pin and pin.get(w) == cu:
                pin.mark_feasible(False)
                return False

    expansions = 0

    def allowed(v):
        used = {assigned[w] for w in g.adj[v] if w in assigned}
        return [c for c in inst.lists[v] if c not in used]

    def backtrack(i):
        nonlocal expansions
        if i == len(free):
            return True
        v = free[i]
        for c in allowed(v):
            expansions += 1
            if expansions > state_cap:
                raise CapExceededError(f"feasibility search exceeded cap {state_cap}")
            assigned[v] = c
            if backtrack(i + 1):
                return True
            del assigned[v]
        return False

    ok = backtrack(0)
    pin.mark_feasible(ok)
    return ok


# ---------------------------------------------------------------------------
# file formats


def write_graph(g: Graph, path):
    lines = [f"{g.n} {len(g.edges)}"]
    lines += [f"{u} {v}" for u, v in g.edges]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_graph(path):
    with open(path) as fh:
        tokens = fh.read().split()
    if len(tokens) < 2:
        raise InvalidInstanceError("graph file must start with 'n m'")
    n, m = int(tokens[0]), int(tokens[1])
    nums = tokens[2:]
    if len(nums) < 2 * m:
        raise InvalidInstanceError("graph file truncated")
    edges = [(int(nums[2 * i]), int(nums[2 * i + 1])) for i in range(m)]
    return Graph.from_edges(n, edges)


def write_instance(inst, path):
    payload = {"q": inst.q, "lists": [list(l) for l in inst.lists]}
    if inst.is_potts:
        payload["beta"] = inst.beta
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def read_instance(path, graph):
    with open(path) as fh:
        payload = json.load(fh)
    q = int(payload["q"])
    lists = payload.get("lists")
    if payload.get("beta") is not None:
        return PottsInstance(graph, q, float(payload["beta"]))
    if lists is None:
        return ColoringInstance.full(graph, q)
    return ColoringInstance.with_lists(graph, q, lists)


def write_pinning(pin, path):
    pin = Pinning.of(pin)
    with open(path, "w") as fh:
        json.dump({str(v): c for v, c in pin.items()}, fh, sort_keys=True)
        fh.write("\n")


def read_pinning(path):
    with open(path) as fh:
        payload = json.load(fh)
    return Pinning({int(v): int(c) for v, c in payload.items()})
