"""Chain-preserving rewriting of SPR paths on a pair with a three-leaf chain.

A path is described at tree level by :class:`TreePath`.  The chain ``(c1,
c2, c3)`` is intact in a tree when ``c2`` hangs off the median of the three
leaves and each end leaf is at most one node away from it.  Its interior
edges (the pendant edges ``p1..p3`` and the spine edges ``e1, e2``) are
tracked through a path with the edge mapping of each move.

The rewrite restricts the input path to the leaves outside the chain and
lifts every step back with the chain riding along as one unit:

* a step whose cut falls on the edge carrying the chain takes the chain to
  the side holding most chain leaves in the original tree (an ``e1`` or
  ``e2`` break becomes an ``e0`` or ``e3`` break);
* an attachment onto ``p1``/``e0`` goes to the ``c1`` end and one onto
  ``p3``/``e3`` to the ``c3`` end; attachments onto ``e1``, ``p2`` or ``e2``
  go to the end picked by the broken edge's index.

The lifted path is closed by the reconnection move that puts the chain back
in place.  The result is checked move by move, and the edge mapping of the
rewritten path must report no broken chain edge.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from .reduction import _chain_layout, _is_chain
from .saf import SocketError
from .tree import Edge, SprMove, Tree, TreeError, apply_spr, edge, induced_subtree, neighbor_moves, spr_moves

__all__ = [
    "ChainCase",
    "ChainRewrite",
    "RewriteError",
    "TreePath",
    "chain_intact",
    "chain_preserving",
    "chain_preserving_rewrite",
    "classify_chain_case",
]

PENDANTS = ("p1", "p2", "p3")
SPINE = ("e1", "e2")
TRACKED = PENDANTS + SPINE + ("e0", "e3")


class RewriteError(SocketError):
    pass


@dataclass(frozen=True)
class TreePath:
    """A start tree and SPR moves naming nodes of the successive trees."""

    start: Tree
    moves: Tuple[SprMove, ...]

    def __len__(self) -> int:
        return len(self.moves)

    def trees(self) -> List[Tree]:
        out = [self.start]
        for i, m in enumerate(self.moves):
            try:
                out.append(apply_spr(out[-1], m))
            except TreeError as exc:
                raise TreeError(f"move {i}: {exc}") from exc
        return out

    def final_tree(self) -> Tree:
        return self.trees()[-1]


def _labels(chain) -> Tuple[str, str, str]:
    seq = tuple(getattr(chain, "pendants", chain))
    if len(seq) != 3:
        raise RewriteError(f"expected a chain of three leaves, got {len(seq)}")
    return seq


# -- chain geometry -----------------------------------------------------------


def _geometry(t: Tree, chain: Sequence[str]):
    """``(median, path c1->median, path c3->median)`` or ``None`` if broken."""
    l1, l2, l3 = (t.leaf(c) for c in chain)
    p12, p23 = t.path(l1, l2), t.path(l2, l3)
    common = set(p12) & set(p23) & set(t.path(l1, l3))
    if len(common) != 1:
        return None
    (m,) = common
    if t.neighbors(l2)[0] != m:
        return None
    a, b = t.path(l1, m), t.path(l3, m)
    if len(a) > 3 or len(b) > 3:
        return None
    if len(a) == 2 and len(b) == 2 and t.n_leaves > 3:
        return None
    return m, a, b


def chain_intact(t: Tree, chain) -> bool:
    return _geometry(t, _labels(chain)) is not None


def _interior(t: Tree, chain: Sequence[str], geo) -> Tuple[set, set]:
    """Interior chain edges, and the free-end edges one may attach to."""
    m, a, b = geo
    edges = {edge(m, t.leaf(chain[1]))}
    free = set()
    for path in (a, b):
        es = {edge(path[i], path[i + 1]) for i in range(len(path) - 1)}
        edges |= es
        if len(path) == 2:
            free |= es
    return edges, free


def _end_of(t: Tree, chain: Sequence[str], geo, e: Edge) -> Optional[int]:
    """1 or 3 when ``e`` is the attachment edge at that chain end."""
    m, a, b = geo
    inner, free = _interior(t, chain, geo)
    for end, path in ((1, a), (3, b)):
        if len(path) == 2:
            if e == edge(path[0], path[1]):
                return end
        else:
            w = path[1]
            if w in e and e not in inner:
                return end
    return None


def chain_preserving(t: Tree, m: SprMove, chain) -> bool:
    """Whether ``m`` keeps the chain whole: no interior edge is cut or split."""
    chain = _labels(chain)
    geo = _geometry(t, chain)
    if geo is None:
        return False
    inner, free = _interior(t, chain, geo)
    if edge(*m.cut) in inner:
        return False
    if edge(*m.regraft) in inner - free:
        return False
    return chain_intact(apply_spr(t, m), chain)


# -- classification -------------------------------------------------------------


@dataclass(frozen=True)
class ChainCase:
    """Case tag with the broken chain edges and the index steering rewrites."""

    case: int
    broken: FrozenSet[str]
    index: Optional[int] = None


def _start_edges(t: Tree, chain: Sequence[str]) -> Dict[str, Edge]:
    if not _is_chain(t, chain):
        raise RewriteError("the chain is not intact in the start tree")
    spine, pend, _, _ = _chain_layout(t, chain)
    names = {"e0": spine[0], "e1": spine[1], "e2": spine[2], "e3": spine[3],
             "p1": pend[0], "p2": pend[1], "p3": pend[2]}
    return {k: edge(*v) for k, v in names.items()}


def _trace(seq: TreePath, chain: Sequence[str]):
    """Per step: the tree, the images of the tracked edges, and the edges the move breaks."""
    t = seq.start
    imgs = {k: {e} for k, e in _start_edges(t, chain).items()}
    steps = []
    for i, m in enumerate(seq.moves):
        cut = edge(*m.cut)
        hit = frozenset(k for k, es in imgs.items() if cut in es)
        steps.append((t, {k: frozenset(v) for k, v in imgs.items()}, hit))
        try:
            t, mapping = apply_spr(t, m, return_mapping=True)
        except TreeError as exc:
            raise TreeError(f"move {i}: {exc}") from exc
        imgs = {k: set().union(*(mapping[e] for e in es)) for k, es in imgs.items()}
    return steps, t


def classify_chain_case(seq: TreePath, chain) -> ChainCase:
    """Which of the four cases a path falls in, by the edges it breaks.

    An edge counts as broken when a move cuts an edge in its current image;
    images follow the edge mapping of every move.
    """
    chain = _labels(chain)
    steps, _ = _trace(seq, chain)
    broken = frozenset().union(*(h for _, _, h in steps)) & frozenset(PENDANTS + SPINE)
    pend = sorted(int(k[1]) for k in broken if k in PENDANTS)
    if len(pend) >= 2:
        return ChainCase(2, broken)
    if len(pend) == 1:
        return ChainCase(3, broken, pend[0])
    spine = sorted(int(k[1]) for k in broken if k in SPINE)
    if spine:
        # both spine edges broken effectively breaks p2
        return ChainCase(4, broken, 2 if len(spine) == 2 else spine[0])
    return ChainCase(1, broken)


# -- rewrite --------------------------------------------------------------------


@dataclass(frozen=True)
class ChainRewrite:
    path: TreePath
    case: ChainCase


def _want_end(imgs: Dict[str, FrozenSet[Edge]], e: Edge, side: int) -> Optional[int]:
    if e in imgs["p1"] or e in imgs["e0"]:
        return 1
    if e in imgs["p3"] or e in imgs["e3"]:
        return 3
    if any(e in imgs[k] for k in ("e1", "p2", "e2")):
        return side
    return None


def _split_of(t: Tree, e: Edge, keep: FrozenSet[str]) -> FrozenSet[FrozenSet[str]]:
    x, y = tuple(e)
    side = t.side(x, y) & keep
    return frozenset((side, keep - side))


def _outside_unchanged(t: Tree, m: SprMove, cset: FrozenSet[str], rest: FrozenSet[str]) -> bool:
    pruned = t.side(*m.cut) - cset
    if not pruned or pruned == rest:
        return True
    return induced_subtree(t, rest) == induced_subtree(apply_spr(t, m), rest)


def _ranked(s: Tree, t: Tree, m: SprMove, imgs, chain, rest: FrozenSet[str],
            side: int) -> Optional[List[Tuple[SprMove, Tree]]]:
    """Chain-preserving moves on ``s`` that can stand in for ``m`` on ``t``, best first.

    A stand-in cuts off the same outside leaves as ``m``, or their
    complement when the other end of the cut edge is the one that moves.
    Ranking follows the rules: same pruned side, chain on the side with most
    chain leaves, a chain end when the regraft edge maps into the chain,
    then the restriction outside the chain, then the regraft split.
    ``None`` when ``m`` leaves the tree outside the chain unchanged.
    """
    cset = frozenset(chain)
    if _outside_unchanged(t, m, cset, rest):
        return None
    u, v = m.cut
    want_s = t.side(u, v) - cset
    target = induced_subtree(apply_spr(t, m), rest)
    want_u = len(t.side(u, v) & cset) >= 2
    want_end = _want_end(imgs, edge(*m.regraft), side)
    keep = rest - want_s
    want_split = _split_of(t, edge(*m.regraft), keep)
    geo = _geometry(s, chain)
    scored = []
    # every move, not one per neighbour: equal trees may prune different sets
    for mv in spr_moves(s):
        pruned = s.side(*mv.cut)
        outside = pruned - cset
        if outside not in (want_s, rest - want_s) or not chain_preserving(s, mv, chain):
            continue
        e = edge(*mv.regraft)
        s2 = apply_spr(s, mv)
        score = (outside == want_s,
                 (cset <= pruned) == want_u,
                 want_end is None or _end_of(s, chain, geo, e) == want_end,
                 induced_subtree(s2, rest) == target,
                 _split_of(s, e, keep) == want_split)
        scored.append((score, len(scored), mv, s2))
    scored.sort(key=lambda x: (tuple(not f for f in x[0]), x[1]))
    return [(mv, s2) for _, _, mv, s2 in scored]


def _close(s: Tree, goal: Tree, chain, budget: int) -> List[SprMove]:
    """Shortest chain-preserving move list from ``s`` to ``goal`` within ``budget``."""
    key = goal.canonical_form()
    start = s.canonical_form()
    if start == key:
        return []
    prev: Dict[str, Tuple[Optional[str], Optional[SprMove], Tree]] = {start: (None, None, s)}
    queue = deque([(s, 0)])
    while queue:
        cur, d = queue.popleft()
        if d == budget:
            continue
        for mv, nb in neighbor_moves(cur):
            k = nb.canonical_form()
            if k in prev or not chain_preserving(cur, mv, chain):
                continue
            prev[k] = (cur.canonical_form(), mv, nb)
            if k == key:
                out = []
                while prev[k][0] is not None:
                    out.append(prev[k][1])
                    k = prev[k][0]
                return out[::-1]
            queue.append((nb, d + 1))
    raise RewriteError(f"the lifted path does not close within {budget} moves")


def chain_preserving_rewrite(t1: Tree, t2: Tree, seq: TreePath, chain) -> ChainRewrite:
    """Rewrite an optimal Case 3 or Case 4 path so it never breaks the chain.

    The output has the input's length, ends at ``t2`` and breaks none of
    ``p1, p2, p3, e1, e2``.  Anything else raises ``RewriteError``.
    """
    chain = _labels(chain)
    if seq.start != t1:
        raise RewriteError("the path does not start at t1")
    if not chain_intact(t2, chain):
        raise RewriteError("the chain is not intact in t2")
    info = classify_chain_case(seq, chain)
    if info.case not in (3, 4):
        raise RewriteError(f"rewrite needs a Case 3 or Case 4 path, got Case {info.case}")
    steps, final = _trace(seq, chain)
    if final != t2:
        raise RewriteError("the path does not end at t2")
    side = 1 if info.index == 1 else 3
    rest = t1.labels - frozenset(chain)
    # steps moving only chain leaves are dropped; the closing moves replace them
    budget = sum(_outside_unchanged(t, m, frozenset(chain), rest) for (t, _, _), m in zip(steps, seq.moves))
    dead = set()

    def search(s: Tree, i: int) -> Optional[List[SprMove]]:
        if i == len(steps):
            try:
                return _close(s, t2, chain, budget)
            except RewriteError:
                return None
        key = (s.canonical_form(), i)
        if key in dead:
            return None
        t, imgs, _ = steps[i]
        options = _ranked(s, t, seq.moves[i], imgs, chain, rest, side)
        if options is None:
            return search(s, i + 1)
        for mv, s2 in options:
            tail = search(s2, i + 1)
            if tail is not None:
                return [mv] + tail
        dead.add(key)
        return None

    moves = search(t1, 0)
    if moves is None:
        raise RewriteError("no rule-ranked lift of the path closes at its length")
    if len(moves) < len(seq):
        raise RewriteError(f"rewrite found {len(moves)} moves for a path of {len(seq)}: input not optimal")
    out = TreePath(t1, tuple(moves))
    trees = out.trees()
    for i, (a, mv) in enumerate(zip(trees, moves)):
        if not chain_preserving(a, mv, chain):
            raise RewriteError(f"rewritten move {i} breaks the chain")
    if trees[-1] != t2:
        raise RewriteError("rewritten path does not end at t2")
    if classify_chain_case(out, chain).case != 1:
        raise RewriteError("rewritten path breaks a chain edge under the edge mapping")
    return ChainRewrite(out, info)
