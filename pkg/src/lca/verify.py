"""Independent brute-force reference oracles.

These checkers only read GraphStore adjacency directly; they share no code
with the LCA modules they are used to validate.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .errors import UsageError
from .graph import GraphStore


@dataclass
class Verdict:
    ok: bool
    witness: object = None
    reason: str = ""

    def __bool__(self):
        return self.ok


def verify_mis(g: GraphStore, chosen) -> Verdict:
    """Pass iff chosen is an independent set of g and is maximal."""
    inset = set(chosen)
    for v in inset:
        if not 1 <= v <= g.n:
            return Verdict(False, v, f"vertex {v} outside [1,{g.n}]")
    for v in inset:
        for u in g.neighbors(v):
            if u in inset and u > v:
                return Verdict(False, (v, u), f"edge ({v},{u}) inside the set")
    for v in range(1, g.n + 1):
        if v not in inset and not any(u in inset for u in g.neighbors(v)):
            return Verdict(False, v, f"vertex {v} could still be added")
    return Verdict(True)


def greedy_mis_global(g: GraphStore, ordering) -> set[int]:
    """Lexicographically-first MIS w.r.t. the ordering (greedy insertion).

    ordering may be a sequence of vertices or an object with as_permutation().
    """
    if hasattr(ordering, "as_permutation"):
        order = ordering.as_permutation()
    else:
        order = list(ordering)
    chosen: set[int] = set()
    for v in order:
        if not any(u in chosen for u in g.neighbors(v)):
            chosen.add(v)
    return chosen


def verify_matching(g: GraphStore, edges, maximal: bool = False) -> Verdict:
    """Pass iff edges form a matching (and a maximal one, if flagged)."""
    chosen = []
    for (u, v) in edges:
        a, b = (u, v) if u < v else (v, u)
        if not (1 <= a <= g.n and 1 <= b <= g.n) or b not in g.neighbors(a):
            return Verdict(False, (u, v), f"({u},{v}) is not an edge of the graph")
        chosen.append((a, b))
    used: dict[int, tuple[int, int]] = {}
    for e in chosen:
        for v in e:
            if v in used:
                return Verdict(False, v, f"vertex {v} covered twice")
            used[v] = e
    if maximal:
        for (u, v) in g.edges():
            if u not in used and v not in used:
                return Verdict(False, (u, v), f"edge ({u},{v}) could still be added")
    return Verdict(True)


def components(g: GraphStore, alive) -> dict[int, int]:
    """Histogram {component size: count} over the alive-induced subgraph."""
    alive_set = set(alive)
    seen: set[int] = set()
    hist: dict[int, int] = {}
    for s in sorted(alive_set):
        if s in seen:
            continue
        size = 0
        queue = deque([s])
        seen.add(s)
        while queue:
            v = queue.popleft()
            size += 1
            for u in g.neighbors(v):
                if u in alive_set and u not in seen:
                    seen.add(u)
                    queue.append(u)
        hist[size] = hist.get(size, 0) + 1
    return hist


def max_component(g: GraphStore, alive) -> int:
    hist = components(g, alive)
    return max(hist) if hist else 0


MAX_MATCHING_GUARD = 64


def max_matching_exact(g: GraphStore) -> tuple[int, list[tuple[int, int]]]:
    """Exact maximum matching by branch and bound (guarded to n <= 64).

    Branches on the lowest-ID vertex that still has an unmatched neighbor:
    either leave it free or match it to each candidate in turn.  Prunes with
    the trivial bound matched + floor(remaining coverable / 2).
    """
    if g.n > MAX_MATCHING_GUARD:
        raise UsageError(f"max_matching_exact is guarded to n <= {MAX_MATCHING_GUARD}")
    adj = {v: list(g.neighbors(v)) for v in range(1, g.n + 1)}
    best_size = 0
    best: list[tuple[int, int]] = []
    matched = [False] * (g.n + 1)
    current: list[tuple[int, int]] = []

    def free_degree(v):
        return sum(1 for u in adj[v] if not matched[u])

    def upper_bound():
        active = sum(1 for v in range(1, g.n + 1) if not matched[v] and free_degree(v) > 0)
        return len(current) + active // 2

    def solve(lo):
        nonlocal best_size, best
        v = lo
        while v <= g.n and (matched[v] or free_degree(v) == 0):
            v += 1
        if v > g.n:
            if len(current) > best_size:
                best_size = len(current)
                best = list(current)
            return
        if upper_bound() <= best_size:
            return
        for u in adj[v]:
            if matched[u]:
                continue
            matched[v] = matched[u] = True
            current.append((v, u) if v < u else (u, v))
            solve(v + 1)
            current.pop()
            matched[v] = matched[u] = False
        # leave v unmatched
        matched[v] = True
        solve(v + 1)
        matched[v] = False

    solve(1)
    return best_size, sorted(best)


def max_matching_exhaustive(g: GraphStore) -> int:
    """Meta-oracle: try all edge subsets (m <= 16)."""
    edges = g.edges()
    if len(edges) > 16:
        raise UsageError("exhaustive matching search is guarded to m <= 16")
    best = 0
    for mask in range(1 << len(edges)):
        used = set()
        ok = True
        size = 0
        for t, (u, v) in enumerate(edges):
            if mask >> t & 1:
                if u in used or v in used:
                    ok = False
                    break
                used.add(u)
                used.add(v)
                size += 1
        if ok and size > best:
            best = size
    return best


def find_augmenting_path_up_to(g: GraphStore, matching, max_len: int):
    """Search for an augmenting path w.r.t. matching with <= max_len edges.

    Exhaustive DFS over alternating simple paths from each free vertex;
    returns one such path as a vertex list, or None.  Small instances only.
    """
    partner: dict[int, int] = {}
    for (u, v) in matching:
        partner[u] = v
        partner[v] = u

    def dfs(path, need_matched):
        v = path[-1]
        for u in g.neighbors(v):
            if u in path:
                continue
            edge_matched = partner.get(v) == u
            if edge_matched != need_matched:
                continue
            new = path + [u]
            if not need_matched and u not in partner:
                return new  # odd length, both endpoints free: augmenting
            if len(new) - 1 < max_len:
                got = dfs(new, not need_matched)
                if got:
                    return got
        return None

    for s in range(1, g.n + 1):
        if s in partner:
            continue
        got = dfs([s], need_matched=False)
        if got:
            return got
    return None
