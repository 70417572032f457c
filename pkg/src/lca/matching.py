"""Maximal-matching LCAs.

Two routes:

* ``mm_via_line_graph`` -- run the MIS LCA on the line-graph view; the YES
  edges are a maximal matching.
* the head-to-head variant of Israeli-Itai's algorithm: each round, every
  unmatched vertex points at a uniformly random unmatched neighbor, each
  target keeps only its highest-ID suitor, and a coin flip per endpoint
  orients who proposes and who accepts.  Matched vertices leave the graph.
  Residual components stay small (cap c_m * d^4 * log2 n), so a Phase-2
  greedy finishes the job.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ComponentTooLargeError, UsageError
from .graph import GraphStore
from .oracle import BaseOracle, InducedView, LineGraphView, decode_edge, edge_key, encode_edge
from .prand import BlockTape, SeedBundle, ceil_log2
from .weak_mis import (
    BOT,
    NO,
    YES,
    MisParams,
    MisRunContext,
    SelectionTape,
    default_bit_independence,
    global_weak_mis_oracle,
)


@dataclass(frozen=True)
class MmParams:
    n: int
    d: int
    c2: float
    c_m: float
    iterations: int
    component_cap: int

    @classmethod
    def from_graph(cls, n: int, d: int, c2: float = 4.0, c_m: float = 1.0,
                   cap_scale: float = 1.0) -> "MmParams":
        if n < 0 or d < 0:
            raise UsageError("n and d must be non-negative")
        log_d = math.log2(d) if d >= 2 else 0.0
        iterations = max(1, math.ceil(c2 * log_d))
        log_n = math.log2(n) if n >= 2 else 0.0
        cap = max(1, math.ceil(cap_scale * c_m * (d ** 4) * log_n))
        return cls(n=n, d=d, c2=c2, c_m=c_m, iterations=iterations, component_cap=cap)


class MmTape:
    """Randomness for the Israeli-Itai rounds: one block per (vertex, iteration).

    A block holds choice_width+1 k-wise bits: the first choice_width form the
    neighbor-choice value (used modulo the live degree; bias <= 2^-16), the
    last bit is the orientation coin b(v).
    """

    def __init__(self, bundle: SeedBundle, n_ids: int, params: MmParams,
                 k: int, tag: str = "mm-bits"):
        self.n_ids = n_ids
        self.params = params
        self.choice_width = ceil_log2(max(2, params.d + 1)) + 16
        self.tape = BlockTape(n_ids * params.iterations, self.choice_width + 1, k,
                              bundle.stream(tag), bundle, label=tag)

    def slot(self, v: int, i: int) -> int:
        if not (1 <= v <= self.n_ids and 1 <= i <= self.params.iterations):
            raise UsageError(f"bad matching slot (v={v}, i={i})")
        return (i - 1) * self.n_ids + v

    def _full(self, v: int, i: int) -> int:
        return self.tape.value(self.slot(v, i), self.choice_width + 1)

    def choice_value(self, v: int, i: int) -> int:
        return self._full(v, i) >> 1

    def coin(self, v: int, i: int) -> int:
        return self._full(v, i) & 1

    def full_batch(self, ids: np.ndarray, i: int) -> np.ndarray:
        slots = np.asarray(ids, dtype=np.uint64) + np.uint64((i - 1) * self.n_ids)
        return self.tape.values_batch(slots, self.choice_width + 1)


@dataclass
class MmTrace:
    """partner_after[i][v]: matched partner after iteration i (0 = unmatched)."""

    n: int
    iterations: int
    partner_after: np.ndarray  # (iterations+1, n+1) int64

    def final_partner(self, v: int) -> int:
        return int(self.partner_after[self.iterations][v])

    def matching(self) -> set[tuple[int, int]]:
        out = set()
        for v in range(1, self.n + 1):
            p = self.final_partner(v)
            if p and v < p:
                out.add((v, p))
        return out

    def residual_unmatched(self) -> list[int]:
        return [v for v in range(1, self.n + 1) if self.final_partner(v) == 0]


def _iteration_matches(alive_adj: dict[int, list[int]], vals: dict[int, int]
                       ) -> dict[int, int]:
    """One Israeli-Itai round over the live graph; returns v -> partner."""
    choice: dict[int, int] = {}
    for s, nbrs in alive_adj.items():
        if nbrs:
            choice[s] = nbrs[(vals[s] >> 1) % len(nbrs)]
    f2_in: dict[int, int] = {}
    for s, t in choice.items():
        if f2_in.get(t, 0) < s:
            f2_in[t] = s

    def has_out(v: int) -> bool:
        t = choice.get(v)
        return t is not None and f2_in.get(t) == v

    def b(v: int) -> int:
        out, inn = has_out(v), v in f2_in
        if out and not inn:
            return 0
        if inn and not out:
            return 1
        return vals[v] & 1

    matched: dict[int, int] = {}
    for t, s in f2_in.items():
        if b(s) == 0 and b(t) == 1:
            matched[s] = t
            matched[t] = s
    return matched


def global_mm_phase1(store: GraphStore, params: MmParams, tape: MmTape) -> MmTrace:
    """Full trace of the distributed partial-matching rounds."""
    n = store.n
    partner = np.zeros((params.iterations + 1, n + 1), dtype=np.int64)
    cur = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, params.iterations + 1):
        alive = [v for v in range(1, n + 1) if cur[v] == 0]
        alive_set = set(alive)
        ids = np.array(alive, dtype=np.uint64)
        raw = tape.full_batch(ids, i) if len(ids) else np.zeros(0, dtype=np.uint64)
        vals = {v: int(x) for v, x in zip(alive, raw)}
        alive_adj = {v: [u for u in store.neighbors(v) if u in alive_set] for v in alive}
        matched = _iteration_matches(alive_adj, vals)
        for v, p in matched.items():
            cur[v] = p
        partner[i] = cur
    return MmTrace(n=n, iterations=params.iterations, partner_after=partner)


class MmRunContext:
    """Local per-query machinery for the Israeli-Itai matching LCA."""

    def __init__(self, oracle, params: MmParams, tape: MmTape,
                 shared_memo: bool = False):
        self.oracle = oracle
        self.params = params
        self.tape = tape
        self.shared_memo = shared_memo
        self._state_memo: dict[tuple[int, int], int] = {}
        self._choice_memo: dict[tuple[int, int], int | None] = {}
        self._f2in_memo: dict[tuple[int, int], int | None] = {}
        self._component_cache: dict[int, tuple[list[int], set[tuple[int, int]]]] = {}

    # --- phase 1 ------------------------------------------------------------

    def _alive(self, v: int, i: int) -> bool:
        return self.lc_mm_state(v, i - 1) == 0

    def _alive_nbrs(self, v: int, i: int) -> list[int]:
        return [u for u in self.oracle.neighbors_list(v) if self._alive(u, i)]

    def _choice(self, v: int, i: int):
        key = (v, i)
        if key in self._choice_memo:
            return self._choice_memo[key]
        nbrs = self._alive_nbrs(v, i)
        got = nbrs[self.tape.choice_value(v, i) % len(nbrs)] if nbrs else None
        self._choice_memo[key] = got
        return got

    def _f2_in(self, t: int, i: int):
        """Highest-ID live neighbor of t that chose t this round, if any."""
        key = (t, i)
        if key in self._f2in_memo:
            return self._f2in_memo[key]
        best = None
        for s in self._alive_nbrs(t, i):
            if self._choice(s, i) == t and (best is None or s > best):
                best = s
        self._f2in_memo[key] = best
        return best

    def _has_out(self, v: int, i: int) -> bool:
        t = self._choice(v, i)
        return t is not None and self._f2_in(t, i) == v

    def _b(self, v: int, i: int) -> int:
        out, inn = self._has_out(v, i), self._f2_in(v, i) is not None
        if out and not inn:
            return 0
        if inn and not out:
            return 1
        return self.tape.coin(v, i)

    def lc_mm_state(self, v: int, i: int) -> int:
        """Partner of v after iteration i, 0 when unmatched."""
        if i == 0:
            return 0
        key = (v, i)
        got = self._state_memo.get(key)
        if got is not None:
            return got
        prev = self.lc_mm_state(v, i - 1)
        if prev != 0:
            result = prev
        else:
            result = 0
            s = self._f2_in(v, i)
            if s is not None and self._b(s, i) == 0 and self._b(v, i) == 1:
                result = s
            else:
                t = self._choice(v, i)
                if (t is not None and self._f2_in(t, i) == v
                        and self._b(v, i) == 0 and self._b(t, i) == 1):
                    result = t
        self._state_memo[key] = result
        return result

    def lc_mm_phase1(self, v: int) -> int:
        return self.lc_mm_state(v, self.params.iterations)

    # --- phase 2 ------------------------------------------------------------

    def _residual_view(self) -> InducedView:
        last = self.params.iterations
        return InducedView(self.oracle, lambda u: self.lc_mm_state(u, last) == 0)

    def _explore_component(self, v: int) -> tuple[list[int], set[tuple[int, int]]]:
        got = self._component_cache.get(v)
        if got is not None:
            return got
        cap = self.params.component_cap
        view = self._residual_view()
        seen = {v}
        order = []
        queue = [v]
        adj: dict[int, list[int]] = {}
        while queue:
            u = queue.pop(0)
            order.append(u)
            adj[u] = view.neighbors_list(u)
            for w in adj[u]:
                if w not in seen:
                    if len(seen) + 1 > cap:
                        raise ComponentTooLargeError(len(seen) + 1, cap)
                    seen.add(w)
                    queue.append(w)
        edges = sorted({edge_key(a, b) for a in adj for b in adj[a]})
        used: set[int] = set()
        chosen: set[tuple[int, int]] = set()
        for (a, b) in edges:
            if a not in used and b not in used:
                chosen.add((a, b))
                used.add(a)
                used.add(b)
        result = (order, chosen)
        for u in order:
            self._component_cache[u] = result
        return result

    def lc_mm(self, u: int, v: int) -> int:
        """YES iff edge (u,v) is in the maximal matching defined by this run."""
        u, v = edge_key(u, v)
        pu = self.lc_mm_phase1(u)
        if pu == v:
            return YES
        pv = self.lc_mm_phase1(v)
        if pu != 0 or pv != 0:
            return NO
        _, chosen = self._explore_component(u)
        return YES if (u, v) in chosen else NO

    def query(self, u: int, v: int) -> int:
        if not self.shared_memo:
            self._state_memo.clear()
            self._choice_memo.clear()
            self._f2in_memo.clear()
            self._component_cache.clear()
        return self.lc_mm(u, v)


@dataclass
class MmRunResult:
    matching: set[tuple[int, int]]
    trace: MmTrace
    residual: list[int]
    component_hist: dict[int, int] = field(default_factory=dict)
    max_component: int = 0


def mm_full_run(store: GraphStore, params: MmParams, tape: MmTape) -> MmRunResult:
    """All answers of the Israeli-Itai matching LCA (global pass + phase 2)."""
    trace = global_mm_phase1(store, params, tape)
    matching = trace.matching()
    residual = trace.residual_unmatched()
    alive = set(residual)
    seen: set[int] = set()
    hist: dict[int, int] = {}
    max_comp = 0
    for s in residual:
        if s in seen:
            continue
        comp = [s]
        seen.add(s)
        queue = [s]
        while queue:
            u = queue.pop(0)
            for w in store.neighbors(u):
                if w in alive and w not in seen:
                    seen.add(w)
                    comp.append(w)
                    queue.append(w)
        size = len(comp)
        hist[size] = hist.get(size, 0) + 1
        max_comp = max(max_comp, size)
        if size > params.component_cap:
            raise ComponentTooLargeError(size, params.component_cap)
        edges = sorted({edge_key(a, b) for a in comp for b in store.neighbors(a)
                        if b in alive})
        used: set[int] = set()
        for (a, b) in edges:
            if a not in used and b not in used:
                matching.add((a, b))
                used.add(a)
                used.add(b)
    return MmRunResult(matching=matching, trace=trace, residual=residual,
                       component_hist=hist, max_component=max_comp)


def make_mm_run(store: GraphStore, bundle: SeedBundle, d: int | None = None,
                c2: float = 4.0, c_m: float = 1.0, cap_scale: float = 1.0,
                bit_k: int | None = None) -> tuple[MmParams, MmTape]:
    dd = store.d if d is None else d
    params = MmParams.from_graph(store.n, dd, c2=c2, c_m=c_m, cap_scale=cap_scale)
    k = bit_k if bit_k is not None else default_bit_independence(dd)
    tape = MmTape(bundle, store.n, params, k)
    return params, tape


# ---------------------------------------------------------------------------
# Maximal matching through the line graph.


def line_mis_setup(store: GraphStore, bundle: SeedBundle, c1: float = 4.0,
                   cap_scale: float = 1.0, bit_k: int | None = None):
    """(line view, MisParams, SelectionTape) for MIS over L(G).

    The line graph has degree bound 2(d-1); its id space is the edge
    encoding domain [n^2], which is what the component cap's log term uses.
    """
    base = BaseOracle(store)
    line = LineGraphView(base)
    d_line = line.degree_bound
    params = MisParams.from_graph(line.n_ids, d_line, c1=c1, cap_scale=cap_scale)
    k = bit_k if bit_k is not None else default_bit_independence(d_line)
    tape = SelectionTape(bundle, line.n_ids, params, k)
    return line, params, tape


def mm_via_line_graph_query(store: GraphStore, bundle: SeedBundle, u: int, v: int,
                            **kwargs) -> int:
    """Single-edge query: the MIS LCA answer for vertex (u,v) of L(G)."""
    line, params, tape = line_mis_setup(store, bundle, **kwargs)
    ctx = MisRunContext(line, params, tape)
    return ctx.lc_mis(encode_edge(u, v, store.n))


def mm_via_line_graph_all(store: GraphStore, bundle: SeedBundle, **kwargs
                          ) -> set[tuple[int, int]]:
    """Answers for every edge of G: a maximal matching of G."""
    line, params, tape = line_mis_setup(store, bundle, **kwargs)
    trace = global_weak_mis_oracle(line, params, tape)
    yes_ids = {e for e in line.vertices() if trace.iter_state[params.iterations][e] == YES}
    residual = [e for e in line.vertices()
                if trace.iter_state[params.iterations][e] == BOT]
    alive = set(residual)
    seen: set[int] = set()
    for s in residual:
        if s in seen:
            continue
        comp = [s]
        seen.add(s)
        queue = [s]
        adj: dict[int, list[int]] = {}
        while queue:
            e = queue.pop(0)
            adj[e] = [x for x in line.neighbors_list(e) if x in alive]
            for x in adj[e]:
                if x not in seen:
                    if len(seen) + 1 > params.component_cap:
                        raise ComponentTooLargeError(len(seen) + 1, params.component_cap)
                    seen.add(x)
                    comp.append(x)
                    queue.append(x)
        chosen: set[int] = set()
        for e in sorted(comp):
            if not any(x in chosen for x in adj[e]):
                chosen.add(e)
        yes_ids |= chosen
    return {decode_edge(e, store.n) for e in yes_ids}
