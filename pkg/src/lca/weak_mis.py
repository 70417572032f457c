"""Weak-MIS and the two-phase MIS LCA.

The global routine repeatedly lets active vertices select themselves with
stage probabilities p_j = 1/(d/2^{j-1} + 1); lone selectors join the
independent set, their closed neighborhoods go inactive, and high-degree
survivors are removed from the working graph so the maximum degree halves
every stage.  After enough iterations the residual active subgraph has only
small components (cap d^4 log2 n), which Phase 2 explores and solves
greedily.

The local functions compute, for one queried vertex, exactly the state the
global routine would assign it, by recursing on (vertex, iteration, stage)
through induced-subgraph oracle views.  Equality of the two is the master
correctness test.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ComponentTooLargeError, UsageError
from .graph import GraphStore
from .oracle import BaseOracle, InducedView
from .prand import (
    BlockTape,
    SeedBundle,
    biased_threshold,
    biased_width,
    ceil_log2,
    ceil_log2_ratio,
)

# TriState codes (int8-friendly).  N/A marks entries a trace never defines.
BOT = 0
YES = 1
NO = 2
NA = -1

TRI_NAMES = {BOT: "BOT", YES: "YES", NO: "NO", NA: "NA"}


@dataclass(frozen=True)
class MisParams:
    """Derived Weak-MIS parameters for an (n, d, c1) run."""

    n: int
    d: int
    c1: float
    iterations: int
    stages: int
    component_cap: int

    @classmethod
    def from_graph(cls, n: int, d: int, c1: float = 4.0, cap_scale: float = 1.0) -> "MisParams":
        if n < 0 or d < 0:
            raise UsageError("n and d must be non-negative")
        log_d = math.log2(d) if d >= 2 else 0.0
        iterations = max(1, math.ceil(c1 * log_d))
        stages = max(1, math.ceil(log_d))
        log_n = math.log2(n) if n >= 2 else 0.0
        component_cap = max(1, math.ceil(cap_scale * (d ** 4) * log_n))
        return cls(n=n, d=d, c1=c1, iterations=iterations, stages=stages,
                   component_cap=component_cap)

    def selection_q(self, j: int) -> tuple[int, int]:
        """Stage-j selection probability is 1/q with q = (d + 2^{j-1}) / 2^{j-1}."""
        if not 1 <= j <= self.stages:
            raise UsageError(f"stage {j} out of range [1, {self.stages}]")
        den = 1 << (j - 1)
        return (self.d + den, den)

    def stage_width(self, j: int) -> int:
        num, den = self.selection_q(j)
        return biased_width(num, den)

    def stage_threshold(self, j: int) -> int:
        num, den = self.selection_q(j)
        return biased_threshold(self.stage_width(j), num, den)

    def high_degree(self, deg: int, j: int) -> bool:
        """deg >= d / 2^j, exact in integers."""
        return deg << j >= self.d

    def block_width(self) -> int:
        return self.stage_width(1)


class SelectionTape:
    """The B(v, i, j) selection bits, one biased coin per (vertex, iter, stage).

    Slot index is ((i-1)*stages + (j-1))*n_ids + v; each slot owns a block of
    block_width() k-wise independent bits, and the stage-j coin reads the
    first stage_width(j) of them as a big-endian value compared against
    round(2^w / q_j).
    """

    WARM_LIMIT = 4096  # plane-precompute bits when the id space is this small

    def __init__(self, bundle: SeedBundle, n_ids: int, params: MisParams,
                 k: int, tag: str = "bits"):
        self.n_ids = n_ids
        self.params = params
        self.k = k
        slots = n_ids * params.iterations * params.stages
        self.tape = BlockTape(slots, params.block_width(), k,
                              bundle.stream(tag), bundle, label=tag)
        self._warm: set[tuple[int, int]] = set()
        self._widths = {j: params.stage_width(j) for j in range(1, params.stages + 1)}
        self._thresholds = {j: params.stage_threshold(j) for j in range(1, params.stages + 1)}

    def slot(self, v: int, i: int, j: int) -> int:
        p = self.params
        if not (1 <= v <= self.n_ids and 1 <= i <= p.iterations and 1 <= j <= p.stages):
            raise UsageError(f"bad selection slot (v={v}, i={i}, j={j})")
        return ((i - 1) * p.stages + (j - 1)) * self.n_ids + v

    def _maybe_warm(self, i: int, j: int) -> None:
        if self.n_ids > self.WARM_LIMIT or (i, j) in self._warm:
            return
        self._warm.add((i, j))
        w = self._widths[j]
        ids = np.arange(1, self.n_ids + 1, dtype=np.uint64)
        slots = ids + np.uint64(((i - 1) * self.params.stages + (j - 1)) * self.n_ids)
        vals = self.tape.values_batch(slots, w)
        cache = self.tape._cache
        for v, val in enumerate(vals, start=1):
            cache[(int(slots[v - 1]), w)] = int(val)

    def select_bit(self, v: int, i: int, j: int) -> bool:
        self._maybe_warm(i, j)
        return self.tape.value(self.slot(v, i, j), self._widths[j]) < self._thresholds[j]

    def select_mask(self, ids: np.ndarray, i: int, j: int) -> np.ndarray:
        """Vectorised selection bits for many vertex ids at once."""
        if len(ids) == 0:
            return np.zeros(0, dtype=bool)
        p = self.params
        slots = np.asarray(ids, dtype=np.uint64) + np.uint64(
            ((i - 1) * p.stages + (j - 1)) * self.n_ids)
        vals = self.tape.values_batch(slots, self._widths[j])
        return vals < np.uint64(self._thresholds[j])


def default_bit_independence(d: int) -> int:
    """Default k for the selection tape: joint uniformity over a radius-1
    closed neighborhood pair (the event family behind the stage analysis)."""
    return max(8, 2 * (d + 1))


# ---------------------------------------------------------------------------
# Global reference (Algorithm-1 semantics, full trace).


@dataclass
class WeakMisTrace:
    """Complete execution trace of the global Weak-MIS run.

    iter_state[i][v] is the iteration-level TriState after iteration i
    (index 0 = all BOT); stage_state[i][j][v] is the within-iteration state
    after stage j for vertices active at the start of iteration i (NA
    elsewhere).  Arrays are indexed by vertex id (slot 0 unused).
    """

    n: int
    iterations: int
    stages: int
    iter_state: np.ndarray  # (iterations+1, n+1) int8
    stage_state: dict[int, np.ndarray]  # i -> (stages+1, n+1) int8
    vj_events: int = 0
    vj_stayed_active: int = 0

    def final_state(self, v: int) -> int:
        return int(self.iter_state[self.iterations][v])

    def phase1_yes(self) -> set[int]:
        return {v for v in range(1, self.n + 1)
                if self.iter_state[self.iterations][v] == YES}

    def residual_active(self) -> list[int]:
        return [v for v in range(1, self.n + 1)
                if self.iter_state[self.iterations][v] == BOT]


def global_weak_mis(store: GraphStore, params: MisParams, tape: SelectionTape,
                    collect_events: bool = False) -> WeakMisTrace:
    """Vectorised global Weak-MIS over a GraphStore."""
    n = store.n
    indptr, targets, sources = store.csr()

    def seg_count(flags: np.ndarray) -> np.ndarray:
        """Per-vertex count of flagged neighbors (1-indexed result)."""
        if len(targets) == 0:
            return np.zeros(n + 1, dtype=np.int64)
        hits = np.bincount(sources, weights=flags[1:][targets].astype(np.float64),
                           minlength=n)
        out = np.zeros(n + 1, dtype=np.int64)
        out[1:] = hits.astype(np.int64)
        return out

    iter_state = np.full((params.iterations + 1, n + 1), BOT, dtype=np.int8)
    iter_state[:, 0] = NA
    stage_state: dict[int, np.ndarray] = {}
    events = 0
    stayed = 0

    cur_iter = np.full(n + 1, BOT, dtype=np.int8)
    cur_iter[0] = NA
    for i in range(1, params.iterations + 1):
        active = np.zeros(n + 1, dtype=bool)
        active[1:] = cur_iter[1:] == BOT
        stages_arr = np.full((params.stages + 1, n + 1), NA, dtype=np.int8)
        stages_arr[0][active] = BOT
        present = active.copy()
        cur_stage = np.full(n + 1, NA, dtype=np.int8)
        cur_stage[active] = BOT
        for j in range(1, params.stages + 1):
            deg_present = seg_count(present)
            vj = present & (deg_present << j >= params.d)
            sel = np.zeros(n + 1, dtype=bool)
            ids = np.nonzero(present)[0]
            if len(ids):
                sel[ids] = tape.select_mask(ids, i, j)
            sel_nbrs = seg_count(sel)
            winners = sel & (sel_nbrs == 0)
            covered = winners | (present & (seg_count(winners) > 0))
            if collect_events:
                events += int(vj.sum())
                stayed += int((vj & ~covered).sum())
            cur_stage[winners] = YES
            cur_stage[covered & ~winners] = NO
            cur_stage[present & ~covered & vj] = NO
            present &= ~covered & ~vj
            stages_arr[j] = cur_stage
        stage_state[i] = stages_arr
        ok = active & (cur_stage != NO)  # joined I in a stage, or survived
        nbr_ok = seg_count(ok) > 0
        cur_iter = cur_iter.copy()
        cur_iter[ok] = YES
        cur_iter[active & ~ok & nbr_ok] = NO
        iter_state[i] = cur_iter
    return WeakMisTrace(n=n, iterations=params.iterations, stages=params.stages,
                        iter_state=iter_state, stage_state=stage_state,
                        vj_events=events, vj_stayed_active=stayed)


def global_weak_mis_oracle(oracle, params: MisParams, tape: SelectionTape,
                           collect_events: bool = False) -> WeakMisTrace:
    """Reference global Weak-MIS over any oracle (line graphs, views, ...).

    Semantically identical to global_weak_mis; kept separate as a pure
    python differential twin and for oracle-only targets.  State arrays are
    dense over [1, oracle.n_ids], with NA for non-vertices.
    """
    verts = sorted(oracle.vertices())
    adj = {v: oracle.neighbors_list(v) for v in verts}
    n_ids = oracle.n_ids
    iter_state = np.full((params.iterations + 1, n_ids + 1), NA, dtype=np.int8)
    stage_state: dict[int, np.ndarray] = {}
    for v in verts:
        iter_state[0][v] = BOT
    events = 0
    stayed = 0
    cur = {v: BOT for v in verts}
    for i in range(1, params.iterations + 1):
        active = [v for v in verts if cur[v] == BOT]
        active_set = set(active)
        stages_arr = np.full((params.stages + 1, n_ids + 1), NA, dtype=np.int8)
        for v in active:
            stages_arr[0][v] = BOT
        present = set(active)
        stage_val = {v: BOT for v in active}
        for j in range(1, params.stages + 1):
            plist = sorted(present)
            ids = np.array(plist, dtype=np.uint64)
            mask = tape.select_mask(ids, i, j)
            sel = {v: bool(m) for v, m in zip(plist, mask)}
            deg = {v: sum(1 for u in adj[v] if u in present) for v in plist}
            winners = {v for v in plist
                       if sel[v] and not any(sel.get(u, False) for u in adj[v])}
            covered = set(winners)
            for w in winners:
                covered.update(u for u in adj[w] if u in present)
            vj = {v for v in plist if params.high_degree(deg[v], j)}
            if collect_events:
                events += len(vj)
                stayed += sum(1 for v in vj if v not in covered)
            for v in plist:
                if v in winners:
                    stage_val[v] = YES
                elif v in covered or v in vj:
                    stage_val[v] = NO
            present -= covered
            present -= vj
            for v in active:
                stages_arr[j][v] = stage_val[v]
        stage_state[i] = stages_arr
        ok = {v for v in active if stage_val[v] != NO}
        for v in active:
            if v in ok:
                cur[v] = YES
            elif any(u in ok for u in adj[v] if u in active_set):
                cur[v] = NO
        for v in verts:
            iter_state[i][v] = cur[v]
    return WeakMisTrace(n=n_ids, iterations=params.iterations, stages=params.stages,
                        iter_state=iter_state, stage_state=stage_state,
                        vj_events=events, vj_stayed_active=stayed)


# ---------------------------------------------------------------------------
# Local (per-query) machinery.


@dataclass
class QueryStats:
    neighbor_queries: int = 0
    degree_queries: int = 0
    stage_calls: int = 0
    iter_calls: int = 0
    phase2_visited: int = 0
    wall_time: float = 0.0

    def oracle_queries(self) -> int:
        return self.neighbor_queries + self.degree_queries

    def normalized_queries(self, d: int) -> int:
        return self.neighbor_queries + self.degree_queries * max(1, ceil_log2(d + 1))


class MisRunContext:
    """Per-(oracle, seed, params) machinery for local MIS queries.

    Memo tables map (v, i[, j]) to TriStates; they are answer-transparent
    (the recursion is pure), so a context may be shared across top-level
    queries for whole-trace tests.  Honest per-query accounting uses
    query(), which clears the memos first unless shared_memo is set.
    """

    def __init__(self, oracle, params: MisParams, tape: SelectionTape,
                 memoize: bool = True, shared_memo: bool = False):
        self.oracle = oracle
        self.params = params
        self.tape = tape
        self.memoize = memoize
        self.shared_memo = shared_memo
        self._iter_memo: dict[tuple[int, int], int] = {}
        self._stage_memo: dict[tuple[int, int, int], int] = {}
        self._views: dict[int, InducedView] = {}
        self._final_view: InducedView | None = None
        self._component_cache: dict[int, tuple[list[int], set[int]]] = {}
        self.stats = QueryStats()

    # --- stage / iteration recursions -------------------------------------

    def _gprime_view(self, i: int) -> InducedView:
        view = self._views.get(i)
        if view is None:
            view = InducedView(self.oracle,
                               lambda u, _i=i: self.lc_mis_iteration(u, _i - 1) == BOT)
            self._views[i] = view
        return view

    def _sel(self, v: int, i: int, j: int) -> bool:
        return self.tape.select_bit(v, i, j)

    def lc_mis_stage(self, v: int, i: int, j: int) -> int:
        """State of v at the end of stage j of iteration i (Algorithm-2 semantics).

        YES: v joined I during stages 1..j.  NO: v was removed from the
        working graph without joining I.  BOT: v is still present.
        """
        self.stats.stage_calls += 1
        if j == 0:
            return BOT
        key = (v, i, j)
        got = self._stage_memo.get(key)
        if got is not None:
            return got
        prev = self.lc_mis_stage(v, i, j - 1)
        if prev != BOT:
            result = prev
        else:
            result = self._stage_step(v, i, j)
        if self.memoize:
            self._stage_memo[key] = result
        return result

    def _stage_step(self, v: int, i: int, j: int) -> int:
        view = self._gprime_view(i)
        present_nbrs = [u for u in view.neighbors_list(v)
                        if self.lc_mis_stage(u, i, j - 1) == BOT]
        if self._sel(v, i, j):
            if not any(self._sel(u, i, j) for u in present_nbrs):
                return YES
        else:
            for u in present_nbrs:
                if not self._sel(u, i, j):
                    continue
                u_nbrs = [w for w in view.neighbors_list(u)
                          if self.lc_mis_stage(w, i, j - 1) == BOT]
                if not any(self._sel(w, i, j) for w in u_nbrs):
                    return NO  # neighbor u joined I
        if self.params.high_degree(len(present_nbrs), j):
            return NO  # removed due to high degree
        return BOT

    def lc_mis_iteration(self, v: int, i: int) -> int:
        """Iteration-level state: YES in I, NO in Gamma+(I) \\ I, BOT active."""
        self.stats.iter_calls += 1
        if i == 0:
            return BOT
        key = (v, i)
        got = self._iter_memo.get(key)
        if got is not None:
            return got
        prev = self.lc_mis_iteration(v, i - 1)
        if prev != BOT:
            result = prev
        else:
            last = self.params.stages
            if self.lc_mis_stage(v, i, last) != NO:
                result = YES
            else:
                result = BOT
                view = self._gprime_view(i)
                for u in view.neighbors_list(v):
                    if self.lc_mis_stage(u, i, last) != NO:
                        result = NO
                        break
        if self.memoize:
            self._iter_memo[key] = result
        return result

    def lc_mis_phase1(self, v: int) -> int:
        return self.lc_mis_iteration(v, self.params.iterations)

    # --- phase 2 ------------------------------------------------------------

    def _residual_view(self) -> InducedView:
        if self._final_view is None:
            last = self.params.iterations
            self._final_view = InducedView(
                self.oracle, lambda u: self.lc_mis_iteration(u, last) == BOT)
        return self._final_view

    def _explore_component(self, v: int) -> tuple[list[int], set[int]]:
        """BFS C_v on the residual graph (ascending-ID frontier order) and
        its greedy MIS; raises ComponentTooLargeError past the cap."""
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
            self.stats.phase2_visited += 1
            adj[u] = view.neighbors_list(u)
            for w in adj[u]:
                if w not in seen:
                    if len(seen) + 1 > cap:
                        raise ComponentTooLargeError(len(seen) + 1, cap)
                    seen.add(w)
                    queue.append(w)
        chosen: set[int] = set()
        for u in sorted(order):
            if not any(w in chosen for w in adj[u]):
                chosen.add(u)
        result = (order, chosen)
        for u in order:
            self._component_cache[u] = result
        return result

    def lc_phase2(self, v: int) -> int:
        _, chosen = self._explore_component(v)
        return YES if v in chosen else NO

    def lc_mis(self, v: int) -> int:
        """The combined LCA: phase-1 state if decided, else phase-2 answer."""
        ph = self.lc_mis_phase1(v)
        if ph != BOT:
            return ph
        return self.lc_phase2(v)

    # --- top-level query wrapper ---------------------------------------------

    def query(self, v: int) -> tuple[int, QueryStats]:
        """Answer one top-level query with fresh per-query accounting."""
        if not self.shared_memo:
            self._iter_memo.clear()
            self._stage_memo.clear()
            self._component_cache.clear()
        before = self.oracle.base.counters.snapshot()
        self.stats = QueryStats()
        t0 = time.perf_counter()
        answer = self.lc_mis(v)
        self.stats.wall_time = time.perf_counter() - t0
        dn, dd = self.oracle.base.counters.delta(before)
        self.stats.neighbor_queries = dn
        self.stats.degree_queries = dd
        return answer, self.stats


# ---------------------------------------------------------------------------
# Whole-run helper (global trace + phase 2 on every residual component).


@dataclass
class MisRunResult:
    yes_set: set[int]
    trace: WeakMisTrace
    residual: list[int]
    component_hist: dict[int, int] = field(default_factory=dict)
    max_component: int = 0


def mis_full_run(store: GraphStore, params: MisParams, tape: SelectionTape,
                 collect_events: bool = False) -> MisRunResult:
    """All n answers of the MIS LCA, computed the efficient way.

    The per-vertex LCA equals the global trace plus the deterministic
    greedy on the queried vertex's residual component, so one global pass
    and one BFS per component reproduce every answer.  Raises
    ComponentTooLargeError if any residual component exceeds the cap.
    """
    trace = global_weak_mis(store, params, tape, collect_events=collect_events)
    residual = trace.residual_active()
    yes = trace.phase1_yes()
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
        chosen: set[int] = set()
        for u in sorted(comp):
            if not any(w in chosen for w in store.neighbors(u) if w in alive):
                chosen.add(u)
        yes |= chosen
    return MisRunResult(yes_set=yes, trace=trace, residual=residual,
                        component_hist=hist, max_component=max_comp)


def make_mis_run(store: GraphStore, bundle: SeedBundle, d: int | None = None,
                 c1: float = 4.0, cap_scale: float = 1.0, bit_k: int | None = None
                 ) -> tuple[MisParams, SelectionTape]:
    """Build (params, tape) for a store with standard defaults."""
    dd = store.d if d is None else d
    params = MisParams.from_graph(store.n, dd, c1=c1, cap_scale=cap_scale)
    k = bit_k if bit_k is not None else default_bit_independence(dd)
    tape = SelectionTape(bundle, store.n, params, k)
    return params, tape
