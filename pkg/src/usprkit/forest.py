"""Agreement forests and the TBR distance.

An agreement forest of two trees is a partition of the label set into blocks
such that each block induces the same topology in both trees and the blocks'
spanning subtrees are vertex-disjoint in each tree.  ``m(T1, T2)``, the least
number of blocks, gives the TBR distance ``m - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .tree import Tree, TreeError, induced_subtree, spanning_nodes


class ForestError(TreeError):
    pass


@dataclass(frozen=True)
class LabeledForest:
    """Disjoint trees whose label sets partition X."""

    components: Tuple[Tree, ...]

    @classmethod
    def from_blocks(cls, t: Tree, blocks: Iterable[Iterable[str]]) -> "LabeledForest":
        comps = [induced_subtree(t, b) for b in blocks]
        comps.sort(key=lambda c: min(c.labels))
        return cls(tuple(comps))

    @property
    def blocks(self) -> List[FrozenSet[str]]:
        return [c.labels for c in self.components]

    @property
    def labels(self) -> FrozenSet[str]:
        out: Set[str] = set()
        for c in self.components:
            out |= c.labels
        return frozenset(out)

    def __len__(self) -> int:
        return len(self.components)


def forest_of(forest: LabeledForest, t: Tree) -> bool:
    """True iff ``t`` yields ``forest`` after deleting some edge set."""
    blocks = forest.blocks
    if sum(len(b) for b in blocks) != len(forest.labels) or forest.labels != t.labels:
        return False
    used: Set[int] = set()
    for comp, block in zip(forest.components, blocks):
        if induced_subtree(t, block) != comp:
            return False
        nodes = spanning_nodes(t, block)
        if used & nodes:
            return False
        used |= nodes
    return True


def is_agreement_forest(forest: LabeledForest, t1: Tree, t2: Tree) -> bool:
    return forest_of(forest, t1) and forest_of(forest, t2)


# -- bitmask machinery used by the search -------------------------------------


class _Masks:
    """Per-tree precomputation over label bit masks.

    Every edge is stored once as an oriented pair ``(p, x)``; ``below[e]`` is
    the label mask on the ``x`` side.  ``hubs`` lists, for each internal node,
    the masks of its three branches.
    """

    def __init__(self, t: Tree, index: Dict[str, int]):
        self.tree = t
        self.index = index
        self.full = (1 << len(index)) - 1
        root = next(v for v in t.nodes() if not t.is_leaf(v))
        parent: Dict[int, Optional[int]] = {root: None}
        order = []
        stack = [root]
        while stack:
            x = stack.pop()
            order.append(x)
            for w in t.neighbors(x):
                if w not in parent:
                    parent[w] = x
                    stack.append(w)
        below: Dict[int, int] = {}
        for x in reversed(order):
            m = 1 << index[t.label(x)] if t.is_leaf(x) else 0
            for w in t.neighbors(x):
                if w != parent[x]:
                    m |= below[w]
            below[x] = m
        self.edges: List[Tuple[int, int]] = [(p, x) for x, p in parent.items() if p is not None]
        self.below = {(p, x): below[x] for p, x in self.edges}
        self.oriented = {}
        for p, x in self.edges:
            self.oriented[(p, x)] = self.oriented[(x, p)] = (p, x)
        self.hubs = []
        for v in order:
            if not t.is_leaf(v):
                masks = tuple(below[w] if parent.get(w) == v else self.full & ~below[v]
                              for w in t.neighbors(v))
                self.hubs.append(masks)
        self.leaf_node = {index[lab]: t.leaf(lab) for lab in t.labels}

    def restricted_splits(self, block: int) -> Set[int]:
        low = block & -block
        out = set()
        for s in self.below.values():
            s &= block
            r = block & ~s
            if s & (s - 1) and r & (r - 1):
                out.add(r if s & low else s)
        return out

    def displays(self, a: int, b: int, c: int, d: int) -> bool:
        """Quartet ab|cd is displayed (arguments are bit masks)."""
        ab, cd = a | b, c | d
        for s in self.below.values():
            if (s & ab == ab and not s & cd) or (s & cd == cd and not s & ab):
                return True
        return False

    def span_edges(self, block: int) -> List[Tuple[int, int]]:
        """Edges of the subtree spanning ``block``."""
        full = self.full
        return [e for e, s in self.below.items() if s & block and (full & ~s) & block]

    def path_edges(self, a: int, b: int) -> List[Tuple[int, int]]:
        nodes = self.tree.path(self.leaf_node[a.bit_length() - 1], self.leaf_node[b.bit_length() - 1])
        return [self.oriented[(nodes[i], nodes[i + 1])] for i in range(len(nodes) - 1)]

    def overlap(self, blocks: Sequence[int]) -> Optional[Tuple[Tuple[int, int], Tuple[int, int]]]:
        """Two label pairs from different blocks whose paths share a node."""
        multi = [b for b in blocks if b & (b - 1)]
        if len(multi) < 2:
            return None
        for masks in self.hubs:
            users = []
            for b in multi:
                hits = [m & b for m in masks if m & b]
                if len(hits) >= 2:
                    users.append((hits[0] & -hits[0], hits[1] & -hits[1]))
                    if len(users) == 2:
                        return users[0], users[1]
        return None


def _bits(mask: int) -> List[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low)
        mask ^= low
    return out


def _block_conflict(m1: _Masks, m2: _Masks, block: int) -> Optional[List[Tuple[int, int]]]:
    """Span of a quartet inside ``block`` that the two trees resolve differently."""
    if bin(block).count("1") < 4:
        return None
    s1 = m1.restricted_splits(block)
    s2 = m2.restricted_splits(block)
    if s1 == s2:
        return None
    bad = min(s1 - s2)
    other = block & ~bad
    for a, b in combinations(_bits(bad), 2):
        for c, d in combinations(_bits(other), 2):
            if not m2.displays(a, b, c, d):
                return m1.span_edges(a | b | c | d)
    raise ForestError("no conflicting quartet found for an undisplayed split")
    if best is None:
        raise ForestError("no conflicting quartet found for an undisplayed split")
    return best


def _conflict_edges(m1: _Masks, m2: _Masks, blocks: Sequence[int],
                    memo: Optional[Dict[int, Optional[List[Tuple[int, int]]]]] = None
                    ) -> Optional[List[Tuple[int, int]]]:
    """Edges of the first tree one of which every refining AF must cut.

    ``None`` means the partition already is an agreement forest.
    """
    for block in blocks:
        if memo is None:
            edges = _block_conflict(m1, m2, block)
        else:
            if block not in memo:
                memo[block] = _block_conflict(m1, m2, block)
            edges = memo[block]
        if edges is not None:
            return edges
    hit = m2.overlap(blocks)
    if hit is None:
        return None
    (a, b), (c, d) = hit
    return sorted(set(m1.path_edges(a, b)) | set(m1.path_edges(c, d)))


class _AFSearch:
    """Bounded search over partitions reachable by deleting edges of ``t1``.

    Deleting an edge splits exactly the block whose labels lie on both of its
    sides, so the state is the partition itself.
    """

    def __init__(self, t1: Tree, t2: Tree):
        if t1.labels != t2.labels:
            raise ForestError("trees have different label sets")
        self.names = sorted(t1.labels)
        index = {lab: i for i, lab in enumerate(self.names)}
        self.m1 = _Masks(t1, index)
        self.m2 = _Masks(t2, index)
        self.failed: Dict[FrozenSet[int], int] = {}
        self.conflicts: Dict[int, Optional[List[Tuple[int, int]]]] = {}
        self.nodes = 0

    def run(self, budget: int) -> Optional[List[int]]:
        return self._rec(frozenset([self.m1.full]), budget)

    def _rec(self, blocks: FrozenSet[int], budget: int) -> Optional[List[int]]:
        if self.failed.get(blocks, -1) >= budget:
            return None
        self.nodes += 1
        edges = _conflict_edges(self.m1, self.m2, sorted(blocks), self.conflicts)
        if edges is None:
            return sorted(blocks)
        if budget > 0:
            full = self.m1.full
            below = self.m1.below
            for e in edges:
                s = below[e]
                for b in blocks:
                    if b & s and b & ~s:
                        nxt = (blocks - {b}) | {b & s, b & ~s & full}
                        found = self._rec(nxt, budget - 1)
                        if found is not None:
                            return found
                        break
        self.failed[blocks] = budget
        return None

    def blocks_to_labels(self, blocks: Sequence[int]) -> List[FrozenSet[str]]:
        return [frozenset(self.names[b.bit_length() - 1] for b in _bits(block)) for block in blocks]


def tbr_at_most(t1: Tree, t2: Tree, k: int) -> bool:
    """Whether ``m(t1, t2) - 1 <= k``."""
    if k < 0:
        return False
    return _AFSearch(t1, t2).run(k) is not None


def maf_exact(t1: Tree, t2: Tree, max_leaves: int = 40) -> LabeledForest:
    """A maximum agreement forest, by iterative deepening on the number of cuts.

    Each search node is a set of deleted edges of ``t1``; when the induced
    partition is not yet an agreement forest, a witness conflict (a quartet
    resolved differently, or two blocks whose spanning subtrees meet in
    ``t2``) names the edges one of which must be deleted.
    """
    if t1.n_leaves > max_leaves:
        raise ForestError(f"{t1.n_leaves} leaves exceeds the MAF guard of {max_leaves}")
    search = _AFSearch(t1, t2)
    budget = 0
    while True:
        blocks = search.run(budget)
        if blocks is not None:
            forest = LabeledForest.from_blocks(t1, search.blocks_to_labels(blocks))
            return forest
        budget += 1


def tbr_distance(t1: Tree, t2: Tree) -> int:
    return len(maf_exact(t1, t2)) - 1
