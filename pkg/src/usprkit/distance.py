"""Exact unrooted SPR distance.

Two engines share the same neighbourhood generator:

* ``uspr_oracle`` is a plain breadth-first search over canonical tree space.
  It never reduces and never prunes, which makes it the reference for tests.
* ``uspr_exact`` kernelizes the pair, then runs a bidirectional
  iterative-deepening search that prunes with the TBR distance
  (``d_TBR <= d_SPR``, so the bound is admissible).
"""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from math import isqrt
from typing import Dict, List, Optional, Tuple

from .forest import (
    ForestError,
    LabeledForest,
    _AFSearch,
    is_agreement_forest,
    maf_exact,
    tbr_distance,
)
from .reduction import kernelize
from .tree import SprMove, Tree, TreeError, apply_spr, enumerate_trees, find_move, neighbor_moves

__all__ = [
    "BudgetExceeded",
    "CapExceeded",
    "DistanceResult",
    "LabeledForest",
    "ForestError",
    "distance_histogram",
    "is_agreement_forest",
    "maf_exact",
    "max_distance_bound",
    "replay",
    "shape_key",
    "tbr_distance",
    "uspr_exact",
    "uspr_oracle",
]


class BudgetExceeded(RuntimeError):
    """The search hit its node or time budget before settling the distance."""

    def __init__(self, message: str, lower_bound: int, nodes_expanded: int):
        super().__init__(message)
        self.lower_bound = lower_bound
        self.nodes_expanded = nodes_expanded


class CapExceeded(RuntimeError):
    """The distance is larger than the oracle's cap."""

    def __init__(self, cap: int, nodes_expanded: int):
        super().__init__(f"distance exceeds cap {cap}")
        self.cap = cap
        self.nodes_expanded = nodes_expanded


@dataclass
class DistanceResult:
    distance: int
    witness_path: Optional[List[SprMove]] = None
    lower_bound_used: int = 0
    nodes_expanded: int = 0
    reduced_leaves: Optional[int] = None


# -- shared neighbourhood cache -----------------------------------------------

_INTERN: Dict[str, Tree] = {}
_INTERN_LIMIT = 400_000


def _intern(t: Tree) -> str:
    key = t.canonical_form()
    if key not in _INTERN:
        _INTERN[key] = t
    return key


def _trim() -> None:
    """Drop the caches between searches; keys held by a running search stay valid."""
    if len(_INTERN) >= _INTERN_LIMIT:
        _INTERN.clear()
        _neighbors.cache_clear()


@lru_cache(maxsize=200_000)
def _neighbors(key: str) -> Tuple[str, ...]:
    t = _INTERN[key]
    return tuple(_intern(s) for _, s in neighbor_moves(t))


def _tree(key: str) -> Tree:
    return _INTERN[key]


def _check_pair(t1: Tree, t2: Tree) -> None:
    if t1.labels != t2.labels:
        extra = sorted(t1.labels ^ t2.labels)
        raise TreeError(f"label sets differ: {extra}")


def replay(t: Tree, moves: List[SprMove]) -> Tree:
    for m in moves:
        t = apply_spr(t, m)
    return t


def _moves_along(start: Tree, keys: List[str]) -> List[SprMove]:
    # moves name nodes of the caller's tree, so rebuild along the way
    moves = []
    cur = start
    for key in keys[1:]:
        m = find_move(cur, _tree(key))
        moves.append(m)
        cur = apply_spr(cur, m)
    return moves


# -- oracle -------------------------------------------------------------------


def uspr_oracle(t1: Tree, t2: Tree, cap: Optional[int] = None, max_leaves: int = 8,
                witness: bool = False) -> DistanceResult:
    """Breadth-first search from ``t1`` until ``t2`` is reached."""
    _check_pair(t1, t2)
    if t1.n_leaves > max_leaves:
        raise TreeError(f"oracle guard: {t1.n_leaves} leaves > {max_leaves}")
    _trim()
    start, goal = _intern(t1), _intern(t2)
    parent: Dict[str, Optional[str]] = {start: None}
    layer = [start]
    depth = 0
    expanded = 0
    while start != goal and goal not in parent:
        if cap is not None and depth >= cap:
            raise CapExceeded(cap, expanded)
        nxt = []
        for key in layer:
            expanded += 1
            for nb in _neighbors(key):
                if nb not in parent:
                    parent[nb] = key
                    nxt.append(nb)
        if not nxt:
            raise TreeError("target unreachable")
        layer = nxt
        depth += 1
    res = DistanceResult(depth, nodes_expanded=expanded)
    if witness:
        keys = [goal]
        while parent[keys[-1]] is not None:
            keys.append(parent[keys[-1]])
        keys.reverse()
        res.witness_path = _moves_along(t1, keys)
    return res


def oracle_eccentricity(t: Tree) -> Counter:
    """Histogram of oracle distances from ``t`` to every tree on its labels."""
    _trim()
    start = _intern(t)
    seen = {start}
    layer = [start]
    hist: Counter = Counter({0: 1})
    depth = 0
    while layer:
        nxt = []
        for key in layer:
            for nb in _neighbors(key):
                if nb not in seen:
                    seen.add(nb)
                    nxt.append(nb)
        depth += 1
        if nxt:
            hist[depth] = len(nxt)
        layer = nxt
    return hist


# -- pruned exact search ------------------------------------------------------


class _Bound:
    """Cached TBR bounds towards one fixed target, as (lowest possible, highest known)."""

    def __init__(self, target: Tree):
        self.target = target
        self.known: Dict[str, Tuple[int, Optional[int]]] = {}

    def at_most(self, key: str, r: int) -> bool:
        lo, hi = self.known.get(key, (0, None))
        if hi is not None and hi <= r:
            return True
        if r < lo:
            return False
        if _AFSearch(_tree(key), self.target).run(r) is None:
            self.known[key] = (r + 1, hi)
            return False
        self.known[key] = (lo, r)
        return True


class _Budget:
    def __init__(self, node_cap: Optional[int], time_cap: Optional[float]):
        self.node_cap = node_cap
        self.deadline = None if time_cap is None else time.monotonic() + time_cap
        self.nodes = 0

    def tick(self, lower: int) -> None:
        self.nodes += 1
        if self.node_cap is not None and self.nodes > self.node_cap:
            raise BudgetExceeded(f"node budget {self.node_cap} exceeded", lower, self.nodes)
        if self.deadline is not None and self.nodes % 64 == 0 and time.monotonic() > self.deadline:
            raise BudgetExceeded("time budget exceeded", lower, self.nodes)


def _layers(src: str, bound: _Bound, depth: int, k: int, budget: _Budget) -> Dict[str, Tuple[int, Optional[str]]]:
    seen: Dict[str, Tuple[int, Optional[str]]] = {src: (0, None)}
    layer = [src]
    for i in range(depth):
        nxt = []
        for key in layer:
            # prune before expanding; generating neighbours is the costly step
            if i and not bound.at_most(key, k - i):
                continue
            budget.tick(k)
            for nb in _neighbors(key):
                if nb not in seen:
                    seen[nb] = (i + 1, key)
                    nxt.append(nb)
        layer = nxt
    return seen


def _trace(table: Dict[str, Tuple[int, Optional[str]]], key: str) -> List[str]:
    out = [key]
    while table[out[-1]][1] is not None:
        out.append(table[out[-1]][1])
    return out


def _bidirectional(t1: Tree, t2: Tree, k_from: int, k_to: int,
                   budget: _Budget) -> Tuple[int, List[str]]:
    _trim()
    a, b = _intern(t1), _intern(t2)
    if a == b:
        return 0, [a]
    to_b, to_a = _Bound(t2), _Bound(t1)
    for k in range(max(k_from, 1), k_to + 1):
        fwd = _layers(a, to_b, (k + 1) // 2, k, budget)
        bwd = _layers(b, to_a, k // 2, k, budget)
        best = None
        for key, (i, _) in fwd.items():
            hit = bwd.get(key)
            if hit is not None and (best is None or i + hit[0] < best[0]):
                best = (i + hit[0], key)
        if best is not None and best[0] <= k:
            key = best[1]
            path = list(reversed(_trace(fwd, key))) + _trace(bwd, key)[1:]
            return best[0], path
    raise BudgetExceeded(f"no path within {k_to} moves", k_to + 1, budget.nodes)


def uspr_exact(t1: Tree, t2: Tree, reduce: bool = True, witness: bool = False,
               node_cap: Optional[int] = None, time_cap: Optional[float] = None,
               order: str = "subtree-first", max_d: Optional[int] = None) -> DistanceResult:
    """Exact uSPR distance.

    With ``reduce`` the pair is first kernelized by subtree and chain
    reduction, which preserves the distance.  A requested witness is always
    built on the original trees so that replaying it turns ``t1`` into ``t2``.
    ``max_d`` stops the search with ``BudgetExceeded`` past that distance.
    """
    _check_pair(t1, t2)
    budget = _Budget(node_cap, time_cap)
    if reduce:
        pair = kernelize(t1, t2, order=order)
        r1, r2 = pair.t1, pair.t2
    else:
        r1, r2 = t1, t2
    n = r1.n_leaves
    if n < 4 or r1 == r2:
        d, lb = 0, 0
    else:
        lb = tbr_distance(r1, r2)
        top = max(n - 3, lb)
        if max_d is not None:
            if lb > max_d:
                raise BudgetExceeded(f"lower bound {lb} exceeds max_d {max_d}", lb, 0)
            top = min(top, max_d)
        d, _ = _bidirectional(r1, r2, lb, top, budget)
    res = DistanceResult(d, lower_bound_used=lb, nodes_expanded=budget.nodes, reduced_leaves=n)
    if witness:
        if d == 0:
            res.witness_path = []
        else:
            _, keys = _bidirectional(t1, t2, d, d, budget)
            res.witness_path = _moves_along(t1, keys)
        res.nodes_expanded = budget.nodes
    return res


# -- diameter -----------------------------------------------------------------


def max_distance_bound(n: int) -> int:
    """``n - 3 - floor((sqrt(n - 2) - 1) / 2)`` in exact integer arithmetic."""
    if n < 3:
        raise ValueError("n must be at least 3")
    return n - 3 - (isqrt(n - 2) - 1) // 2


def shape_key(t: Tree) -> str:
    """Canonical string of the unlabelled shape of ``t``."""
    adj = t.adjacency()

    def enc(v: int, parent: int) -> str:
        kids = sorted(enc(w, v) for w in adj[v] if w != parent)
        return "(" + "".join(kids) + ")" if kids else "x"

    internal = [v for v in adj if len(adj[v]) > 1]
    if not internal:
        return "x" * t.n_leaves
    return min(enc(v, -1) for v in internal)


def distance_histogram(n: int, labels: Optional[List[str]] = None) -> Counter:
    """Counts of unordered pairs of distinct ``n``-leaf trees by distance.

    Relabelling leaves is an isometry of tree space, so one breadth-first
    search per unlabelled shape, weighted by the number of labelled trees of
    that shape, covers every ordered pair.
    """
    labels = labels or [str(i) for i in range(1, n + 1)]
    shapes: Dict[str, Tuple[Tree, int]] = {}
    for t in enumerate_trees(labels):
        key = shape_key(t)
        rep, count = shapes.get(key, (t, 0))
        shapes[key] = (rep, count + 1)
    ordered: Counter = Counter()
    for rep, count in shapes.values():
        for d, c in oracle_eccentricity(rep).items():
            if d:
                ordered[d] += c * count
    return Counter({d: c // 2 for d, c in ordered.items()})
