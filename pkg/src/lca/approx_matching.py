"""(1-eps)-approximate maximum matching via phased augmenting paths.

The global algorithm starts from an empty matching and, for levels
i = 1..k, augments along a maximal vertex-disjoint set A_i of length-(2i-1)
augmenting paths: M_i = M_{i-1} symmetric-difference A_i.  A_i is the
greedy MIS of the path-intersection graph H_i under a per-level ordering,
realised here by ranking canonical path encodings with one k-wise value
generator spanning all levels.

The local route answers "is e in M_k?" by the same recursion an LCA would
run: membership at level i is membership at i-1 XOR lying on an A_i path,
where A_i membership is LS-MIS over H_i discovered lazily through path
enumeration around the queried edge.  H_i is never materialized.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass

import numpy as np

from .errors import PhaseOneError, UsageError
from .graph import GraphStore
from .oracle import BaseOracle, edge_key
from .prand import KWiseValues, SeedBundle, ordering_width
from .weak_mis import NO, YES

DEFAULT_PATH_INDEPENDENCE = 64


def canonical_path(seq) -> tuple[int, ...]:
    """Vertex sequence with the smaller endpoint first."""
    seq = tuple(seq)
    return seq if seq[0] < seq[-1] else tuple(reversed(seq))


def path_edges(seq) -> list[tuple[int, int]]:
    return [edge_key(seq[t], seq[t + 1]) for t in range(len(seq) - 1)]


class PathOrdering:
    """Single rank function over canonical path encodings across all levels.

    A level-i path (2i vertices) encodes as the base-(n+1) fold of its
    sequence prefixed by i, which is injective across levels; restricting
    the rank order to one level gives that level's permutation.  Ties on
    raw rank break by encoding, so comparisons are total.
    """

    def __init__(self, n: int, levels: int, k_ind: int,
                 stream, bundle: SeedBundle | None = None,
                 rank_map: dict | None = None):
        self.n = n
        self.levels = levels
        self.base = n + 1
        self.domain = (levels + 1) * self.base ** (2 * levels)
        self.k_ind = k_ind
        self._rank_map = rank_map
        if rank_map is None:
            self.width = ordering_width(self.domain)
            self._gen = KWiseValues(k_ind, self.domain, self.width, stream)
            self.seed_bits = self._gen.seed_bits
            if bundle is not None:
                bundle.audit.record(f"path-ordering levels={levels} k={k_ind}",
                                    self.seed_bits)
        else:
            self.width = 0
            self._gen = None
            self.seed_bits = 0
        self._cache: dict[tuple[int, ...], tuple[int, int]] = {}

    @classmethod
    def from_rank_map(cls, n: int, levels: int, rank_map: dict) -> "PathOrdering":
        """Explicit path -> rank mapping (tests)."""
        return cls(n, levels, 1, None, rank_map=rank_map)

    def encode(self, seq) -> int:
        level = len(seq) // 2
        if not 1 <= level <= self.levels or len(seq) != 2 * level:
            raise UsageError(f"sequence of length {len(seq)} is not a level path")
        acc = level
        for v in seq:
            if not 1 <= v <= self.n:
                raise UsageError(f"vertex {v} outside [1, {self.n}]")
            acc = acc * self.base + v
        return acc

    def rank(self, seq) -> tuple[int, int]:
        seq = canonical_path(seq)
        got = self._cache.get(seq)
        if got is None:
            enc = self.encode(seq)
            if self._rank_map is not None:
                got = (self._rank_map[seq], enc)
            else:
                got = (self._gen.value(enc), enc)
            self._cache[seq] = got
        return got

    def precedes(self, p, q) -> bool:
        return self.rank(p) < self.rank(q)


@dataclass(frozen=True)
class AmmParams:
    """Derived constants for the approximate-matching LCA.

    The theoretical budget shape t = d^(6k^2) * k^(O(k)) is recorded for
    reporting only; the working default ell is 200*(1+d)^(2k) with the
    doubling schedule, since the measured truncation fraction is what the
    approximation argument consumes.
    """

    n: int
    m: int
    d: int
    eps: float
    delta: float
    k: int
    gamma: float
    ell0: int
    trials: int
    sample_size: int
    threshold: float
    doubling_rounds: int
    k_ind: int
    theory_t_shape: str

    @classmethod
    def derive(cls, n: int, m: int, d: int, eps: float, delta: float = 0.1,
               k: int | None = None, ell: int | None = None,
               doubling_rounds: int | None = None,
               k_ind: int | None = None) -> "AmmParams":
        if not 0 < eps < 1:
            raise UsageError(f"eps must be in (0,1), got {eps}")
        if not 0 < delta < 1:
            raise UsageError(f"delta must be in (0,1), got {delta}")
        if d < 1:
            raise UsageError("approximate matching needs degree bound d >= 1")
        kk = k if k is not None else math.ceil(2 / eps)
        gamma = eps / (2 * d)
        ell0 = ell if ell is not None else 200 * (1 + d) ** (2 * kk)
        trials = max(1, math.ceil(4 * math.log2(1 / delta)))
        sample_size = math.ceil(32 * math.log(4 * trials / delta) / gamma ** 2)
        rounds = doubling_rounds if doubling_rounds is not None else max(
            1, math.ceil(math.log2(max(2, n))))
        ki = k_ind if k_ind is not None else min(ell0, DEFAULT_PATH_INDEPENDENCE)
        return cls(n=n, m=m, d=d, eps=eps, delta=delta, k=kk, gamma=gamma,
                   ell0=ell0, trials=trials, sample_size=sample_size,
                   threshold=3 * gamma / 4, doubling_rounds=rounds,
                   k_ind=max(2, ki), theory_t_shape=f"d^(6*{kk}^2) * {kk}^O({kk})")


class _Truncation(Exception):
    pass


class AmmContext:
    """One top-level approximate-matching query (memoized, budgeted).

    The budget counts logical recursive calls of in_matching and path_in_A
    (memo hits included), mirroring the R convention of the greedy-MIS
    simulation; oracle traffic is visible on the oracle's own counters.
    """

    def __init__(self, oracle, ordering: PathOrdering, levels: int,
                 budget_cap: int | None = None):
        self.oracle = oracle
        self.ordering = ordering
        self.levels = levels
        self.cap = budget_cap
        self.calls = 0
        self._match_memo: dict[tuple[tuple[int, int], int], bool] = {}
        self._in_a_memo: dict[tuple[tuple[int, ...], int], bool] = {}
        self._paths_memo: dict[tuple[int, int], list[tuple[int, ...]]] = {}
        self._partner_memo: dict[tuple[int, int], int | None] = {}
        self._nbrs: dict[int, list[int]] = {}
        if sys.getrecursionlimit() < 20000:
            sys.setrecursionlimit(20000)

    def _charge(self):
        self.calls += 1
        if self.cap is not None and self.calls > self.cap:
            raise _Truncation()

    def _neighbors(self, v: int) -> list[int]:
        got = self._nbrs.get(v)
        if got is None:
            got = self.oracle.neighbors_list(v)
            self._nbrs[v] = got
        return got

    # --- matching recursion ---------------------------------------------------

    def in_matching(self, e: tuple[int, int], i: int) -> bool:
        """Is edge e in M_i?  M_0 is empty; M_i = M_{i-1} XOR (edges of A_i)."""
        self._charge()
        if i == 0:
            return False
        key = (e, i)
        got = self._match_memo.get(key)
        if got is not None:
            return got
        prev = self.in_matching(e, i - 1)
        on_path = False
        for p in self.paths_through_vertex(e[0], i):
            if e in path_edges(p) and self.path_in_A(p, i):
                on_path = True
                break  # A_i paths are vertex-disjoint: at most one hits e[0]
        result = prev != on_path
        self._match_memo[key] = result
        return result

    def partner(self, v: int, i: int) -> int | None:
        """The M_i partner of v, or None when v is M_i-free."""
        key = (v, i)
        if key in self._partner_memo:
            return self._partner_memo[key]
        got = None
        for u in self._neighbors(v):
            if self.in_matching(edge_key(v, u), i):
                got = u
                break
        self._partner_memo[key] = got
        return got

    # --- augmenting-path enumeration -------------------------------------------

    def paths_through_vertex(self, anchor: int, i: int) -> list[tuple[int, ...]]:
        """All level-i augmenting paths containing the anchor vertex,
        canonical, in ascending encoding order.

        A level-i path has 2i vertices; edge t (0-based) is matched in
        M_{i-1} iff t is odd, and both endpoints are M_{i-1}-free.
        """
        key = (anchor, i)
        got = self._paths_memo.get(key)
        if got is not None:
            return got
        length = 2 * i
        found: set[tuple[int, ...]] = set()

        def grow(seq: list[int], lo: int, hi: int):
            # seq covers positions lo..hi (anchor fixed inside)
            if lo == 0 and hi == length - 1:
                if (self.partner(seq[0], i - 1) is None
                        and self.partner(seq[-1], i - 1) is None):
                    found.add(canonical_path(seq))
                return
            if lo > 0:
                v = seq[0]
                t = lo - 1  # edge between positions t and t+1
                for w in self._steps(v, t, i):
                    if w not in seq:
                        grow([w] + seq, lo - 1, hi)
            else:
                v = seq[-1]
                t = hi
                for w in self._steps(v, t, i):
                    if w not in seq:
                        grow(seq + [w], lo, hi + 1)

        for pos in range(length):
            grow([anchor], pos, pos)
        got = sorted(found, key=self.ordering.encode)
        self._paths_memo[key] = got
        return got

    def _steps(self, v: int, t: int, i: int) -> list[int]:
        """Continuations across edge slot t: the unique matched partner for
        odd t, every unmatched neighbor for even t."""
        if t % 2 == 1:
            p = self.partner(v, i - 1)
            return [p] if p is not None else []
        p = self.partner(v, i - 1)
        return [w for w in self._neighbors(v) if w != p]

    def paths_through_edge(self, e: tuple[int, int], i: int) -> list[tuple[int, ...]]:
        e = edge_key(*e)
        return [p for p in self.paths_through_vertex(e[0], i) if e in path_edges(p)]

    # --- A_i membership (LS-MIS over H_i) ---------------------------------------

    def path_in_A(self, seq: tuple[int, ...], i: int) -> bool:
        """Greedy-MIS membership of the path in H_i: YES iff no earlier
        intersecting path is in A_i."""
        self._charge()
        seq = canonical_path(seq)
        key = (seq, i)
        got = self._in_a_memo.get(key)
        if got is not None:
            return got
        my_rank = self.ordering.rank(seq)
        nbrs: set[tuple[int, ...]] = set()
        for w in seq:
            nbrs.update(self.paths_through_vertex(w, i))
        nbrs.discard(seq)
        earlier = sorted((q for q in nbrs if self.ordering.rank(q) < my_rank),
                         key=self.ordering.rank)
        result = True
        for q in earlier:
            if self.path_in_A(q, i):
                result = False
                break
        self._in_a_memo[key] = result
        return result


TRUNCATED_AMM = "TRUNCATED"


def lc_amm(oracle, ordering: PathOrdering, params: AmmParams, u: int, v: int,
           ell: int | None = None) -> int:
    """Phase-2 answer for one edge; truncation maps to NO."""
    ctx = AmmContext(oracle, ordering, params.k, budget_cap=ell)
    try:
        return YES if ctx.in_matching(edge_key(u, v), params.k) else NO
    except _Truncation:
        return NO


def amm_query_cost(oracle, ordering: PathOrdering, params: AmmParams,
                   u: int, v: int, ell: int | None) -> tuple[str | int, int]:
    """(answer or TRUNCATED, logical call count) for one fresh edge query."""
    ctx = AmmContext(oracle, ordering, params.k, budget_cap=ell)
    try:
        ans = YES if ctx.in_matching(edge_key(u, v), params.k) else NO
        return ans, ctx.calls
    except _Truncation:
        return TRUNCATED_AMM, ctx.calls


# ---------------------------------------------------------------------------
# Eager global reference.


def enumerate_level_paths(store: GraphStore, matching: set[tuple[int, int]],
                          i: int) -> list[tuple[int, ...]]:
    """All level-i augmenting paths w.r.t. the given matching (exhaustive)."""
    partner: dict[int, int] = {}
    for (a, b) in matching:
        partner[a] = b
        partner[b] = a
    length = 2 * i
    found: set[tuple[int, ...]] = set()

    def extend(seq: list[int]):
        if len(seq) == length:
            if seq[-1] not in partner:
                found.add(canonical_path(seq))
            return
        v = seq[-1]
        t = len(seq) - 1
        if t % 2 == 1:
            w = partner.get(v)
            if w is not None and w not in seq:
                extend(seq + [w])
        else:
            for w in store.neighbors(v):
                if w != partner.get(v) and w not in seq:
                    extend(seq + [w])

    for s in range(1, store.n + 1):
        if s not in partner:
            extend([s])
    return sorted(found)


def global_amm(store: GraphStore, ordering: PathOrdering, k: int
               ) -> list[set[tuple[int, int]]]:
    """The phase algorithm run eagerly; returns [M_0, M_1, ..., M_k]."""
    matchings = [set()]
    current: set[tuple[int, int]] = set()
    for i in range(1, k + 1):
        paths = enumerate_level_paths(store, current, i)
        paths.sort(key=ordering.rank)
        used: set[int] = set()
        chosen: list[tuple[int, ...]] = []
        for p in paths:
            if not any(v in used for v in p):
                chosen.append(p)
                used.update(p)
        flipped: set[tuple[int, int]] = set()
        for p in chosen:
            flipped.update(path_edges(p))
        current = current ^ flipped
        matchings.append(set(current))
    return matchings


# ---------------------------------------------------------------------------
# Phase 1: good ordering vector.


@dataclass
class GoodPathOrdering:
    ordering: PathOrdering
    draw_index: int
    ell: int
    p_tilde: float
    round_index: int
    tested: int


def find_good_ordering_vector(store: GraphStore, params: AmmParams,
                              bundle: SeedBundle) -> GoodPathOrdering:
    """Accept the first ordering draw whose sampled fraction of truncated
    edge queries is below 3*gamma/4, doubling ell between rounds."""
    edges = store.edges()
    if not edges:
        ordering = PathOrdering(store.n, params.k, params.k_ind,
                                bundle.stream("ordering:1"), bundle=bundle)
        return GoodPathOrdering(ordering, 1, params.ell0, 0.0, 0, 1)
    rng = bundle.numpy_rng("sample")
    sample = rng.integers(0, len(edges), size=params.sample_size)
    counts = np.bincount(sample, minlength=len(edges))
    distinct = np.nonzero(counts)[0]
    base = BaseOracle(store)
    ell = params.ell0
    draw = 0
    for round_index in range(params.doubling_rounds + 1):
        for _ in range(params.trials):
            draw += 1
            ordering = PathOrdering(store.n, params.k, params.k_ind,
                                    bundle.stream(f"ordering:{draw}"), bundle=bundle)
            bad = 0
            for idx in distinct:
                u, v = edges[int(idx)]
                ans, _ = amm_query_cost(base, ordering, params, u, v, ell)
                if ans == TRUNCATED_AMM:
                    bad += int(counts[idx])
            p_tilde = bad / params.sample_size
            if p_tilde < params.threshold:
                return GoodPathOrdering(ordering=ordering, draw_index=draw,
                                        ell=ell, p_tilde=p_tilde,
                                        round_index=round_index, tested=draw)
        ell *= 2
    raise PhaseOneError(
        f"no ordering vector passed after {draw} draws (final ell {ell // 2})")


@dataclass
class AmmRunResult:
    good: GoodPathOrdering
    yes_edges: set[tuple[int, int]]
    truncated_edges: int
    params: AmmParams


def amm_full_run(store: GraphStore, params: AmmParams, bundle: SeedBundle
                 ) -> AmmRunResult:
    """Phase 1 plus a fresh budgeted query per edge."""
    good = find_good_ordering_vector(store, params, bundle)
    base = BaseOracle(store)
    yes: set[tuple[int, int]] = set()
    truncated = 0
    for (u, v) in store.edges():
        ans, _ = amm_query_cost(base, good.ordering, params, u, v, good.ell)
        if ans == YES:
            yes.add((u, v))
        elif ans == TRUNCATED_AMM:
            truncated += 1
    return AmmRunResult(good=good, yes_edges=yes, truncated_edges=truncated,
                        params=params)
