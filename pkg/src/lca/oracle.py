"""Query-counting adjacency-list oracles and composable virtual views.

The oracle is the only read path to a graph.  Answers are pure functions of
the underlying (graph, alive predicates); the counters are the only mutable
state.  Virtual views (induced subgraph, line graph) stack on a base oracle
and never materialize anything -- every view answer is assembled from base
queries, which accrue to the base counters.
"""

from __future__ import annotations

from .errors import UsageError
from .graph import GraphStore

BOTTOM = None  # the sentinel "no such neighbor" answer


class Counters:
    __slots__ = ("neighbor_queries", "degree_queries")

    def __init__(self):
        self.neighbor_queries = 0
        self.degree_queries = 0

    def snapshot(self) -> tuple[int, int]:
        return (self.neighbor_queries, self.degree_queries)

    def total(self) -> int:
        return self.neighbor_queries + self.degree_queries

    def delta(self, before: tuple[int, int]) -> tuple[int, int]:
        return (self.neighbor_queries - before[0], self.degree_queries - before[1])

    def normalized_total(self, d: int) -> int:
        """Total with a degree query costed as ceil(log2(d+1)) neighbor probes."""
        from .prand import ceil_log2

        return self.neighbor_queries + self.degree_queries * max(1, ceil_log2(d + 1))


class BaseOracle:
    """Adjacency-list oracle over a GraphStore."""

    def __init__(self, store: GraphStore):
        self.store = store
        self.n_ids = store.n
        self.degree_bound = store.d
        self.counters = Counters()

    @property
    def base(self) -> "BaseOracle":
        return self

    def is_vertex(self, v: int) -> bool:
        return 1 <= v <= self.store.n

    def degree(self, v: int) -> int:
        if not self.is_vertex(v):
            raise UsageError(f"vertex {v} out of range [1, {self.store.n}]")
        self.counters.degree_queries += 1
        return len(self.store.neighbors(v))

    def neighbor(self, v: int, i: int):
        """i-th neighbor of v in ascending-ID order, or BOTTOM if i > deg(v)."""
        if not self.is_vertex(v):
            raise UsageError(f"vertex {v} out of range [1, {self.store.n}]")
        if not 1 <= i <= self.degree_bound:
            raise UsageError(f"neighbor index {i} out of range [1, {self.degree_bound}]")
        self.counters.neighbor_queries += 1
        nbrs = self.store.neighbors(v)
        return nbrs[i - 1] if i <= len(nbrs) else BOTTOM

    def neighbors_list(self, v: int) -> list[int]:
        """All neighbors of v (one degree query + deg neighbor queries)."""
        deg = self.degree(v)
        return [self.neighbor(v, i) for i in range(1, deg + 1)]

    def vertices(self):
        return range(1, self.store.n + 1)


class InducedView:
    """Oracle for the subgraph induced by an alive predicate.

    Neighbor order preserves the parent's canonical order restricted to
    alive vertices.  The predicate must be deterministic for the lifetime
    of the view; each answer may evaluate it on up to deg+1 vertices.
    """

    def __init__(self, parent, alive):
        self.parent = parent
        self.alive = alive
        self.n_ids = parent.n_ids
        self.degree_bound = parent.degree_bound

    @property
    def base(self) -> BaseOracle:
        return self.parent.base

    def is_vertex(self, v: int) -> bool:
        return self.parent.is_vertex(v) and self.alive(v)

    def _require(self, v: int):
        if not self.parent.is_vertex(v):
            raise UsageError(f"vertex {v} invalid in parent oracle")
        if not self.alive(v):
            raise UsageError(f"vertex {v} is not alive in this induced view")

    def neighbors_list(self, v: int) -> list[int]:
        self._require(v)
        return [u for u in self.parent.neighbors_list(v) if self.alive(u)]

    def degree(self, v: int) -> int:
        return len(self.neighbors_list(v))

    def neighbor(self, v: int, i: int):
        if not 1 <= i <= self.degree_bound:
            raise UsageError(f"neighbor index {i} out of range [1, {self.degree_bound}]")
        nbrs = self.neighbors_list(v)
        return nbrs[i - 1] if i <= len(nbrs) else BOTTOM

    def vertices(self):
        return (v for v in self.parent.vertices() if self.alive(v))


def edge_key(u: int, v: int) -> tuple[int, int]:
    """Canonical EdgeId: the pair with the smaller endpoint first."""
    if u == v:
        raise UsageError(f"degenerate edge ({u},{v})")
    return (u, v) if u < v else (v, u)


def encode_edge(u: int, v: int, n: int) -> int:
    """Injective EdgeId -> int in [1, n^2]; order matches (u,v) lex order."""
    u, v = edge_key(u, v)
    return (u - 1) * n + v


def decode_edge(e: int, n: int) -> tuple[int, int]:
    u, r = divmod(e - 1, n)
    return (u + 1, r + 1)


class LineGraphView:
    """Oracle for the line graph: vertices are edge encodings of the parent.

    Two encoded edges are adjacent iff they share an endpoint; neighbor
    lists are canonical in (u,v) lexicographic order.  Degree bound is
    2(d-1) for parent bound d.
    """

    def __init__(self, parent):
        self.parent = parent
        self.n_ids = parent.n_ids ** 2
        self.degree_bound = max(0, 2 * (parent.degree_bound - 1))

    @property
    def base(self) -> BaseOracle:
        return self.parent.base

    def is_vertex(self, e: int) -> bool:
        if not 1 <= e <= self.n_ids:
            return False
        u, v = decode_edge(e, self.parent.n_ids)
        if not (u < v and self.parent.is_vertex(u) and self.parent.is_vertex(v)):
            return False
        return v in self.parent.neighbors_list(u)

    def _require(self, e: int) -> tuple[int, int]:
        u, v = decode_edge(e, self.parent.n_ids)
        if not (u < v and self.parent.is_vertex(u) and self.parent.is_vertex(v)
                and v in self.parent.neighbors_list(u)):
            raise UsageError(f"id {e} does not encode an edge of the parent graph")
        return u, v

    def neighbors_list(self, e: int) -> list[int]:
        u, v = self._require(e)
        n = self.parent.n_ids
        out = set()
        for w in self.parent.neighbors_list(u):
            if w != v:
                out.add(encode_edge(u, w, n))
        for w in self.parent.neighbors_list(v):
            if w != u:
                out.add(encode_edge(v, w, n))
        return sorted(out)

    def degree(self, e: int) -> int:
        return len(self.neighbors_list(e))

    def neighbor(self, e: int, i: int):
        if not 1 <= i <= max(1, self.degree_bound):
            raise UsageError(f"neighbor index {i} out of range")
        nbrs = self.neighbors_list(e)
        return nbrs[i - 1] if i <= len(nbrs) else BOTTOM

    def vertices(self):
        n = self.parent.n_ids
        for u in self.parent.vertices():
            for w in self.parent.neighbors_list(u):
                if w > u:
                    yield encode_edge(u, w, n)


def materialize(oracle) -> tuple[list[int], dict[int, list[int]]]:
    """Eagerly read an oracle into (vertex list, adjacency dict).

    Reference/testing helper: views are meant to be queried lazily, and
    this walks everything through the counting path.
    """
    verts = list(oracle.vertices())
    return verts, {v: oracle.neighbors_list(v) for v in verts}
