"""Graph storage, text format, and generators.

Vertices are 1..n.  The canonical neighbor order is ascending vertex ID,
which pins down every oracle answer and makes runs reproducible.
"""

from __future__ import annotations

import numpy as np

from .errors import GraphLoadError, UsageError


class GraphStore:
    """Immutable simple undirected graph with a degree bound d.

    Invariants checked on construction: vertex IDs are exactly 1..n, no
    self-loops or duplicate edges, adjacency is symmetric, deg(v) <= d.
    """

    __slots__ = ("n", "d", "_adj", "m")

    def __init__(self, n: int, d: int, edges):
        if n < 0:
            raise GraphLoadError(f"vertex count must be >= 0, got {n}")
        if d < 0:
            raise GraphLoadError(f"degree bound must be >= 0, got {d}")
        adj = [[] for _ in range(n + 1)]
        seen = set()
        for (u, v) in edges:
            if not (1 <= u <= n and 1 <= v <= n):
                raise GraphLoadError(f"edge ({u},{v}) has endpoint outside [1,{n}]")
            if u == v:
                raise GraphLoadError(f"self-loop at vertex {u}")
            key = (u, v) if u < v else (v, u)
            if key in seen:
                raise GraphLoadError(f"duplicate edge ({key[0]},{key[1]})")
            seen.add(key)
            adj[u].append(v)
            adj[v].append(u)
        for v in range(1, n + 1):
            adj[v].sort()
            if len(adj[v]) > d:
                raise GraphLoadError(
                    f"vertex {v} has degree {len(adj[v])} > bound {d}")
        self.n = n
        self.d = d
        self._adj = [tuple(a) for a in adj]
        self.m = len(seen)

    def neighbors(self, v: int) -> tuple[int, ...]:
        if not 1 <= v <= self.n:
            raise UsageError(f"vertex {v} out of range [1, {self.n}]")
        return self._adj[v]

    def degree(self, v: int) -> int:
        return len(self.neighbors(v))

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(1, self.n + 1) for v in self._adj[u] if u < v]

    def avg_degree(self) -> float:
        return 2.0 * self.m / self.n if self.n else 0.0

    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(indptr, targets, sources) arrays over 0-based vertex indices."""
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        for v in range(1, self.n + 1):
            indptr[v] = indptr[v - 1] + len(self._adj[v])
        targets = np.empty(indptr[-1], dtype=np.int64)
        sources = np.empty(indptr[-1], dtype=np.int64)
        pos = 0
        for v in range(1, self.n + 1):
            for u in self._adj[v]:
                targets[pos] = u - 1
                sources[pos] = v - 1
                pos += 1
        return indptr, targets, sources

    def __eq__(self, other):
        return (isinstance(other, GraphStore) and self.n == other.n
                and self.d == other.d and self._adj == other._adj)

    def __repr__(self):
        return f"GraphStore(n={self.n}, d={self.d}, m={self.m})"


def load_graph(text: str) -> GraphStore:
    """Parse the graph text format.

    First line "n d"; each following non-empty line "u v" with
    1 <= u < v <= n, one edge per line; '#' lines are comments.
    """
    header = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if header is None:
            if len(parts) != 2:
                raise GraphLoadError(f"expected header 'n d', got {line!r}", lineno)
            try:
                header = (int(parts[0]), int(parts[1]))
            except ValueError:
                raise GraphLoadError(f"non-integer header {line!r}", lineno)
            continue
        if len(parts) != 2:
            raise GraphLoadError(f"expected edge 'u v', got {line!r}", lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphLoadError(f"non-integer edge {line!r}", lineno)
        if u == v:
            raise GraphLoadError(f"self-loop at vertex {u}", lineno)
        if not u < v:
            raise GraphLoadError(f"edge must satisfy u < v, got ({u},{v})", lineno)
        n = header[0]
        if not (1 <= u and v <= n):
            raise GraphLoadError(f"edge ({u},{v}) outside [1,{n}]", lineno)
        edges.append((u, v))
    if header is None:
        raise GraphLoadError("empty graph text: missing 'n d' header")
    try:
        return GraphStore(header[0], header[1], edges)
    except GraphLoadError:
        raise
    except UsageError as exc:
        raise GraphLoadError(str(exc))


def save_graph(g: GraphStore) -> str:
    """Inverse of load_graph; round-trips bit-exactly."""
    lines = [f"{g.n} {g.d}"]
    lines.extend(f"{u} {v}" for u, v in g.edges())
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Generators.  All deterministic in gen_seed.


def _gen_gnp_capped(n: int, d: int, p: float, rng: np.random.Generator) -> GraphStore:
    """G(n,p), then delete random incident edges at over-degree vertices."""
    adj = {v: set() for v in range(1, n + 1)}
    for u in range(1, n):
        hits = np.nonzero(rng.random(n - u) < p)[0]
        for off in hits:
            v = u + 1 + int(off)
            adj[u].add(v)
            adj[v].add(u)
    # cap: repeatedly pick the smallest over-degree vertex, drop a random edge
    over = sorted(v for v in adj if len(adj[v]) > d)
    while over:
        v = over[0]
        nbrs = sorted(adj[v])
        u = nbrs[int(rng.integers(0, len(nbrs)))]
        adj[v].discard(u)
        adj[u].discard(v)
        over = sorted(w for w in adj if len(adj[w]) > d)
    edges = [(u, v) for u in adj for v in adj[u] if u < v]
    return GraphStore(n, d, edges)


def _gen_regular(n: int, d: int, rng: np.random.Generator) -> GraphStore:
    import networkx as nx

    if n * d % 2 != 0:
        raise UsageError(f"random {d}-regular graph needs n*d even, got n={n}")
    if d >= n:
        raise UsageError(f"random {d}-regular graph needs d < n")
    g = nx.random_regular_graph(d, n, seed=int(rng.integers(0, 2 ** 31)))
    edges = [(min(u, v) + 1, max(u, v) + 1) for u, v in g.edges()]
    return GraphStore(n, d, edges)


def _grid_edges(rows: int, cols: int):
    def vid(r, c):
        return r * cols + c + 1

    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                yield (vid(r, c), vid(r, c + 1))
            if r + 1 < rows:
                yield (vid(r, c), vid(r + 1, c))


def gen_graph(kind: str, n: int, d: int | None = None, p: float | None = None,
              gen_seed: int = 0, rows: int | None = None, cols: int | None = None) -> GraphStore:
    """Generate a named test graph, deterministic in gen_seed.

    Kinds: gnp-capped (needs p and d), random-d-regular (needs d), path,
    cycle, grid (rows x cols), star.
    """
    rng = np.random.default_rng(gen_seed)
    if kind == "gnp-capped":
        if p is None or d is None:
            raise UsageError("gnp-capped needs both p and d")
        return _gen_gnp_capped(n, d, p, rng)
    if kind == "random-d-regular":
        if d is None:
            raise UsageError("random-d-regular needs d")
        return _gen_regular(n, d, rng)
    if kind == "path":
        return GraphStore(n, d if d is not None else 2,
                          [(i, i + 1) for i in range(1, n)])
    if kind == "cycle":
        if n < 3:
            raise UsageError("cycle needs n >= 3")
        edges = [(i, i + 1) for i in range(1, n)] + [(1, n)]
        return GraphStore(n, d if d is not None else 2, edges)
    if kind == "grid":
        r = rows if rows is not None else int(np.sqrt(n))
        c = cols if cols is not None else r
        if r * c <= 0:
            raise UsageError("grid needs positive rows*cols")
        return GraphStore(r * c, d if d is not None else 4, list(_grid_edges(r, c)))
    if kind == "star":
        if n < 1:
            raise UsageError("star needs n >= 1")
        return GraphStore(n, d if d is not None else max(1, n - 1),
                          [(1, v) for v in range(2, n + 1)])
    raise UsageError(f"unknown graph kind {kind!r}")
