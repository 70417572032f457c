"""Local simulation of greedy MIS and the (1-eps)-approximate MIS LCA.

LS-MIS answers "is v in the greedy MIS for ordering pi?" by recursing only
on neighbors that precede v; R counts the recursive calls (the root and
every examination of a preceding neighbor, memo hits included), which
matches the query-tree accounting with mean at most 1 + m/n over uniform
(ordering, vertex).

Phase 1 of the approximate LCA hunts for an ordering whose truncated
queries rarely blow the budget; Phase 2 answers via LS-MIS capped at ell,
mapping truncation to NO.  The YES set is then I_pi intersected with the
cheap vertices, which loses at most gamma*n <= eps*|I_pi| members.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PhaseOneError, UsageError
from .graph import GraphStore
from .prand import RandomOrdering, SeedBundle
from .weak_mis import NO, YES

TRUNCATED = 3


class QueryBudget:
    """Recursive-call cap; counter <= cap at every observation point."""

    def __init__(self, cap: int | None):
        self.cap = cap
        self.used = 0

    def charge(self) -> bool:
        """Count one call; True if the budget just overflowed."""
        self.used += 1
        return self.cap is not None and self.used > self.cap


def ls_mis(oracle, ordering, v: int, budget: QueryBudget | None = None
           ) -> tuple[int, int]:
    """Greedy-MIS membership of v under the ordering, via the oracle.

    Returns (YES/NO/TRUNCATED, calls used).  Completed sub-answers are
    memoized within this one top-level call; repeated examinations still
    count toward the call total.
    """
    if budget is None:
        budget = QueryBudget(None)

    def key(u):
        return ordering.rank(u)

    def preds(u):
        ps = [w for w in oracle.neighbors_list(u) if key(w) < key(u)]
        ps.sort(key=key)
        return ps

    if budget.charge():
        return TRUNCATED, budget.used
    memo: dict[int, int] = {}
    stack = [[v, preds(v), 0, None]]  # vertex, sorted preds, next idx, pending child
    while stack:
        frame = stack[-1]
        u, plist, idx, pending = frame
        if pending is not None:
            frame[3] = None
            if memo[pending] == YES:
                memo[u] = NO
                stack.pop()
                continue
        if idx < len(plist):
            w = plist[idx]
            frame[2] += 1
            if budget.charge():
                return TRUNCATED, budget.used
            got = memo.get(w)
            if got is None:
                frame[3] = w
                stack.append([w, preds(w), 0, None])
            elif got == YES:
                memo[u] = NO
                stack.pop()
        else:
            memo[u] = YES
            stack.pop()
    return memo[v], budget.used


def _pred_lists(store: GraphStore, ordering) -> list[list[int] | None]:
    """pred[v]: neighbors preceding v, ascending in the ordering (bulk mode)."""
    if isinstance(ordering, RandomOrdering):
        raw = ordering.rank_table()
        if raw.dtype != object:
            ranks = raw.astype(np.int64, copy=False)
            keys = [None] + [(int(ranks[v - 1]), v) for v in range(1, store.n + 1)]
        else:
            keys = [None] + [(raw[v - 1], v) for v in range(1, store.n + 1)]
    else:
        keys = [None] + [ordering.rank(v) for v in range(1, store.n + 1)]
    pred: list[list[int] | None] = [None] * (store.n + 1)
    for v in range(1, store.n + 1):
        ps = [u for u in store.neighbors(v) if keys[u] < keys[v]]
        ps.sort(key=lambda u: keys[u])
        pred[v] = ps
    return pred


def _ls_mis_preds(pred: list, v: int, cap: int | None) -> tuple[int, int]:
    """ls_mis twin over precomputed pred lists (harness bulk mode)."""
    calls = 1
    if cap is not None and calls > cap:
        return TRUNCATED, calls
    memo: dict[int, int] = {}
    stack = [[v, 0, None]]
    while stack:
        frame = stack[-1]
        u, idx, pending = frame
        if pending is not None:
            frame[2] = None
            if memo[pending] == YES:
                memo[u] = NO
                stack.pop()
                continue
        plist = pred[u]
        if idx < len(plist):
            w = plist[idx]
            frame[1] += 1
            calls += 1
            if cap is not None and calls > cap:
                return TRUNCATED, calls
            got = memo.get(w)
            if got is None:
                frame[2] = w
                stack.append([w, 0, None])
            elif got == YES:
                memo[u] = NO
                stack.pop()
        else:
            memo[u] = YES
            stack.pop()
    return memo[v], calls


def _ls_mis_positions(adj, pos, v: int, cap: int | None) -> tuple[int, int]:
    """ls_mis twin keyed by a position array (true-permutation harness mode).

    adj[v] is the neighbor tuple of v; pos[v] the position of v in pi.
    Pred lists are built lazily per visited vertex, so one sample costs
    O(R * d log d) regardless of n.
    """
    calls = 1
    if cap is not None and calls > cap:
        return TRUNCATED, calls
    memo: dict[int, int] = {}

    def preds(u):
        ps = [w for w in adj[u] if pos[w] < pos[u]]
        ps.sort(key=lambda w: pos[w])
        return ps

    stack = [[v, preds(v), 0, None]]
    while stack:
        frame = stack[-1]
        u, plist, idx, pending = frame
        if pending is not None:
            frame[3] = None
            if memo[pending] == YES:
                memo[u] = NO
                stack.pop()
                continue
        if idx < len(plist):
            w = plist[idx]
            frame[2] += 1
            calls += 1
            if cap is not None and calls > cap:
                return TRUNCATED, calls
            got = memo.get(w)
            if got is None:
                frame[3] = w
                stack.append([w, preds(w), 0, None])
            elif got == YES:
                memo[u] = NO
                stack.pop()
        else:
            memo[u] = YES
            stack.pop()
    return memo[v], calls


# ---------------------------------------------------------------------------
# R statistic (mean recursive calls over uniform orderings and vertices).


@dataclass
class RStatistic:
    mean: float
    std_error: float
    samples: int
    bound: float  # 1 + m/n

    def within_bound(self, sigmas: float = 3.0) -> bool:
        return self.mean <= self.bound + sigmas * self.std_error


def r_statistic(store: GraphStore, bundle: SeedBundle, samples: int) -> RStatistic:
    """Empirical mean of R over uniform (permutation, vertex) samples.

    This is a harness measurement: permutations are true-uniform from the
    sampling sub-seed, not bounded-independence orderings.
    """
    rng = bundle.numpy_rng("sample")
    n = store.n
    adj = [()] + [store.neighbors(v) for v in range(1, n + 1)]
    pos = np.empty(n + 1, dtype=np.int64)
    total = 0.0
    total_sq = 0.0
    for _ in range(samples):
        perm = rng.permutation(n)
        pos[1:] = perm
        v = int(rng.integers(1, n + 1))
        _, calls = _ls_mis_positions(adj, pos, v, None)
        total += calls
        total_sq += calls * calls
    mean = total / samples
    var = max(0.0, total_sq / samples - mean * mean)
    se = math.sqrt(var / samples)
    return RStatistic(mean=mean, std_error=se, samples=samples,
                      bound=1.0 + store.m / store.n)


# ---------------------------------------------------------------------------
# Phase 1: finding a good ordering.


@dataclass(frozen=True)
class AmisParams:
    """Derived constants for the approximate-MIS LCA."""

    n: int
    m: int
    d: int
    eps: float
    delta: float
    gamma: float
    t: float
    ell0: int
    trials: int
    sample_size: int
    threshold: float
    doubling_rounds: int

    @classmethod
    def derive(cls, n: int, m: int, d: int, eps: float, delta: float = 0.1,
               ell: int | None = None, doubling_rounds: int | None = None) -> "AmisParams":
        if not 0 < eps < 1:
            raise UsageError(f"eps must be in (0,1), got {eps}")
        if not 0 < delta < 1:
            raise UsageError(f"delta must be in (0,1), got {delta}")
        if d < 1:
            raise UsageError("approximate MIS needs degree bound d >= 1")
        gamma = eps / d
        t = m / n + 1
        ell0 = ell if ell is not None else math.ceil(6 * t / eps)
        trials = max(1, math.ceil(4 * math.log2(1 / delta)))
        sample_size = math.ceil(32 * math.log(4 * trials / delta) / gamma ** 2)
        rounds = doubling_rounds if doubling_rounds is not None else max(1, math.ceil(math.log2(max(2, n))))
        return cls(n=n, m=m, d=d, eps=eps, delta=delta, gamma=gamma, t=t,
                   ell0=ell0, trials=trials, sample_size=sample_size,
                   threshold=3 * gamma / 4, doubling_rounds=rounds)


@dataclass
class GoodOrdering:
    ordering: RandomOrdering
    draw_index: int  # 1-based across rounds
    ell: int
    p_tilde: float
    round_index: int
    tested: int


def find_good_ordering(store: GraphStore, params: AmisParams, bundle: SeedBundle
                       ) -> GoodOrdering:
    """Algorithm-8 style search: test ordering draws until the sampled
    truncation fraction drops below 3*gamma/4.

    One vertex multiset S is drawn up front; each candidate is scored by the
    fraction of S whose LS-MIS simulation exceeds ell calls.  H_v is a pure
    function of (ordering, v), so distinct sampled vertices are evaluated
    once (fresh, so the call count is the honest fresh-query R) and weighted
    by multiplicity.  If every draw in a round fails, ell doubles and fresh
    draws are tested; after doubling_rounds rounds the search reports ERROR.
    """
    rng = bundle.numpy_rng("sample")
    sample = rng.integers(1, store.n + 1, size=params.sample_size)
    counts = np.bincount(sample, minlength=store.n + 1)
    distinct = np.nonzero(counts)[0]
    ell = params.ell0
    draw = 0
    for round_index in range(params.doubling_rounds + 1):
        for _ in range(params.trials):
            draw += 1
            k = max(2, min(ell, store.n))
            ordering = RandomOrdering(store.n, k, bundle.stream(f"ordering:{draw}"),
                                      bundle=bundle)
            pred = _pred_lists(store, ordering)
            bad = 0
            for v in distinct:
                ans, _ = _ls_mis_preds(pred, int(v), ell)
                if ans == TRUNCATED:
                    bad += int(counts[v])
            p_tilde = bad / params.sample_size
            if p_tilde < params.threshold:
                return GoodOrdering(ordering=ordering, draw_index=draw, ell=ell,
                                    p_tilde=p_tilde, round_index=round_index,
                                    tested=draw)
        ell *= 2
    raise PhaseOneError(
        f"no ordering passed after {draw} draws (final ell {ell // 2})")


def lc_amis(oracle, good: GoodOrdering, v: int) -> int:
    """Phase-2 answer for one vertex: truncation maps to NO."""
    ans, _ = ls_mis(oracle, good.ordering, v, QueryBudget(good.ell))
    if ans == TRUNCATED:
        return NO
    return ans


@dataclass
class AmisRunResult:
    good: GoodOrdering
    yes_set: set[int]
    greedy_set: set[int]
    truncated: int
    ratio: float
    params: AmisParams


def amis_full_run(store: GraphStore, params: AmisParams, bundle: SeedBundle
                  ) -> AmisRunResult:
    """Phase 1 plus all-vertex Phase 2 answers (bulk path)."""
    good = find_good_ordering(store, params, bundle)
    pred = _pred_lists(store, good.ordering)
    yes: set[int] = set()
    truncated = 0
    for v in range(1, store.n + 1):
        ans, _ = _ls_mis_preds(pred, v, good.ell)
        if ans == YES:
            yes.add(v)
        elif ans == TRUNCATED:
            truncated += 1
    greedy: set[int] = set()
    for v in good.ordering.as_permutation():
        if not any(u in greedy for u in store.neighbors(v)):
            greedy.add(v)
    ratio = len(yes) / len(greedy) if greedy else 1.0
    return AmisRunResult(good=good, yes_set=yes, greedy_set=greedy,
                         truncated=truncated, ratio=ratio, params=params)
