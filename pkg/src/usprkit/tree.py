"""Unrooted binary X-trees, SPR moves and small tree-space enumeration.

Trees are immutable.  Nodes are plain integers; leaves carry string labels.
Every operation returns a new tree, so trees can be shared freely between
threads and used as dictionary keys (hashing goes through the canonical form).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from itertools import count
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Tuple

Edge = FrozenSet[int]


class TreeError(ValueError):
    """Raised for malformed trees or invalid operations on them."""


def edge(a: int, b: int) -> Edge:
    return frozenset((a, b))


class Tree:
    """A leaf-labelled unrooted tree whose internal nodes all have degree 3.

    ``adj`` maps every node to its neighbours and ``labels`` maps each leaf
    node to its label.  Trees with one or two leaves are allowed so that the
    components of a forest can be represented with the same type.
    """

    __slots__ = ("_adj", "_labels", "_leaves", "_canon")

    def __init__(self, adj: Mapping[int, Iterable[int]], labels: Mapping[int, str], validate: bool = True):
        self._adj: Dict[int, Tuple[int, ...]] = {v: tuple(ns) for v, ns in adj.items()}
        self._labels: Dict[int, str] = dict(labels)
        self._leaves: Dict[str, int] = {lab: v for v, lab in self._labels.items()}
        self._canon: Optional[str] = None
        if validate:
            self._validate()

    def _validate(self) -> None:
        if len(self._leaves) != len(self._labels):
            raise TreeError("duplicate leaf label")
        if not self._labels:
            raise TreeError("tree has no leaves")
        for v, ns in self._adj.items():
            if len(set(ns)) != len(ns) or v in ns:
                raise TreeError(f"node {v} has repeated or self neighbours")
            for w in ns:
                if v not in self._adj.get(w, ()):
                    raise TreeError(f"asymmetric edge {v}-{w}")
            if v in self._labels:
                if len(ns) > 1:
                    raise TreeError(f"labelled node {self._labels[v]!r} is not a leaf")
            elif len(ns) != 3:
                raise TreeError(f"internal node {v} has degree {len(ns)}")
        for v in self._labels:
            if v not in self._adj:
                raise TreeError(f"labelled node {v} missing from adjacency")
        n_edges = sum(len(ns) for ns in self._adj.values()) // 2
        if n_edges != len(self._adj) - 1 or not self._connected():
            raise TreeError("graph is not a tree")

    def _connected(self) -> bool:
        start = next(iter(self._adj))
        seen = {start}
        stack = [start]
        while stack:
            for w in self._adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == len(self._adj)

    # -- basic accessors -------------------------------------------------

    @property
    def labels(self) -> FrozenSet[str]:
        return frozenset(self._leaves)

    @property
    def n_leaves(self) -> int:
        return len(self._leaves)

    def nodes(self) -> Iterator[int]:
        return iter(self._adj)

    def neighbors(self, v: int) -> Tuple[int, ...]:
        return self._adj[v]

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def is_leaf(self, v: int) -> bool:
        return v in self._labels

    def label(self, v: int) -> Optional[str]:
        return self._labels.get(v)

    def leaf(self, label: str) -> int:
        try:
            return self._leaves[label]
        except KeyError:
            raise TreeError(f"unknown label {label!r}") from None

    def edges(self) -> List[Edge]:
        return [edge(v, w) for v, ns in self._adj.items() for w in ns if v < w]

    def adjacency(self) -> Dict[int, Tuple[int, ...]]:
        return dict(self._adj)

    def leaf_labels(self) -> Dict[int, str]:
        return dict(self._labels)

    def side(self, u: int, v: int) -> FrozenSet[str]:
        """Labels on the ``u`` side of edge ``(u, v)``."""
        out = []
        seen = {u, v}
        stack = [u]
        while stack:
            x = stack.pop()
            lab = self._labels.get(x)
            if lab is not None:
                out.append(lab)
            for w in self._adj[x]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return frozenset(out)

    def component_nodes(self, start: int, blocked: int) -> List[int]:
        """Nodes reachable from ``start`` without passing through ``blocked``."""
        seen = {start, blocked}
        out = [start]
        stack = [start]
        while stack:
            for w in self._adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    out.append(w)
                    stack.append(w)
        return out

    def path(self, a: int, b: int) -> List[int]:
        """Node path from ``a`` to ``b`` (inclusive)."""
        parent = {a: None}
        stack = [a]
        while stack:
            x = stack.pop()
            if x == b:
                break
            for w in self._adj[x]:
                if w not in parent:
                    parent[w] = x
                    stack.append(w)
        out = [b]
        while out[-1] != a:
            out.append(parent[out[-1]])
        return out[::-1]

    # -- identity ----------------------------------------------------------

    def canonical_form(self) -> str:
        if self._canon is None:
            self._canon = _canonical(self._adj, self._labels)
        return self._canon

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Tree):
            return NotImplemented
        return self.canonical_form() == other.canonical_form()

    def __hash__(self) -> int:
        return hash(self.canonical_form())

    def __repr__(self) -> str:
        return f"Tree({self.canonical_form()!r})"

    def splits(self) -> FrozenSet[FrozenSet[str]]:
        """Nontrivial splits, each given by the side without the least label."""
        least = min(self._leaves)
        out = set()
        for e in self.edges():
            a, b = tuple(e)
            if a in self._labels or b in self._labels:
                continue
            s = self.side(a, b)
            if least in s:
                s = self.labels - s
            out.add(s)
        return frozenset(out)

    def relabel(self, mapping: Mapping[str, str]) -> "Tree":
        labels = {v: mapping.get(lab, lab) for v, lab in self._labels.items()}
        return Tree(self._adj, labels)


def _canonical(adj: Mapping[int, Tuple[int, ...]], labels: Mapping[int, str]) -> str:
    if len(labels) == 1:
        return next(iter(labels.values())) + ";"
    least = min(labels, key=labels.__getitem__)
    root = adj[least][0]
    if len(labels) == 2:
        return "(" + ",".join(sorted(labels.values())) + ");"
    # iterative post-order; each entry of `done` is (min label, text)
    done: Dict[int, Tuple[str, str]] = {}
    stack = [(root, -1, False)]
    while stack:
        v, parent, expanded = stack.pop()
        lab = labels.get(v)
        if lab is not None:
            done[v] = (lab, lab)
            continue
        children = [w for w in adj[v] if w != parent]
        if not expanded:
            stack.append((v, parent, True))
            stack.extend((w, v, False) for w in children)
            continue
        parts = sorted(done.pop(w) for w in children)
        done[v] = (parts[0][0], "(" + ",".join(p[1] for p in parts) + ")")
    return done[root][1] + ";"


# -- construction helpers ---------------------------------------------------


def suppress(adj: Dict[int, set], labels: Mapping[int, str]) -> None:
    """In place: drop unlabelled nodes of degree < 2 and splice degree-2 ones."""
    queue = [v for v in adj if v not in labels and len(adj[v]) < 3]
    while queue:
        v = queue.pop()
        if v not in adj or v in labels:
            continue
        ns = adj[v]
        if len(ns) >= 3:
            continue
        if len(ns) == 2:
            a, b = ns
            adj[a].discard(v)
            adj[b].discard(v)
            adj[a].add(b)
            adj[b].add(a)
            del adj[v]
        else:
            for w in ns:
                adj[w].discard(v)
                queue.append(w)
            del adj[v]


def tree_from_edges(edges: Iterable[Tuple[int, int]], labels: Mapping[int, str]) -> Tree:
    adj: Dict[int, set] = {v: set() for v in labels}
    for a, b in edges:
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    suppress(adj, labels)
    return Tree(adj, {v: lab for v, lab in labels.items() if v in adj})


def star(labels: Iterable[str]) -> Tree:
    """The unique tree on three (or fewer) labels."""
    labs = sorted(labels)
    if len(labs) > 3:
        raise TreeError("star trees only exist for at most three leaves")
    if len(labs) == 1:
        return Tree({0: ()}, {0: labs[0]})
    if len(labs) == 2:
        return Tree({0: (1,), 1: (0,)}, {0: labs[0], 1: labs[1]})
    adj = {0: (1, 2, 3), 1: (0,), 2: (0,), 3: (0,)}
    return Tree(adj, {1: labs[0], 2: labs[1], 3: labs[2]})


def induced_subtree(t: Tree, subset: Iterable[str]) -> Tree:
    """T|V: the spanning subtree of ``subset`` with degree-2 nodes suppressed."""
    keep = set(subset)
    if not keep:
        raise TreeError("empty label subset")
    unknown = keep - t.labels
    if unknown:
        raise TreeError(f"unknown labels {sorted(unknown)}")
    if len(keep) == t.n_leaves:
        return t
    nodes = spanning_nodes(t, keep)
    adj = {v: {w for w in t.neighbors(v) if w in nodes} for v in nodes}
    labels = {t.leaf(lab): lab for lab in keep}
    suppress(adj, labels)
    return Tree(adj, labels)


def spanning_nodes(t: Tree, subset: Iterable[str]) -> set:
    """Node set of T(V), the smallest subtree connecting ``subset``."""
    targets = [t.leaf(lab) for lab in subset]
    if len(targets) == 1:
        return {targets[0]}
    want = set(targets)
    root = targets[0]
    parent = {root: None}
    order = [root]
    stack = [root]
    while stack:
        x = stack.pop()
        for w in t.neighbors(x):
            if w not in parent:
                parent[w] = x
                order.append(w)
                stack.append(w)
    hits = {v: 1 if v in want else 0 for v in order}
    for v in reversed(order):
        p = parent[v]
        if p is not None:
            hits[p] += hits[v]
    total = len(want)
    # a non-root node lies on T(V) iff its subtree holds some but not all targets,
    # or it is itself a target
    return {v for v in order if v == root or v in want or 0 < hits[v] < total}


# -- SPR ---------------------------------------------------------------------


@dataclass(frozen=True)
class SprMove:
    """Cut edge ``cut = (u, v)`` and regraft the ``u`` side onto ``regraft``.

    ``v`` is suppressed and reused as the node subdividing the regraft edge,
    so the cut edge keeps its identity across the move.
    """

    cut: Tuple[int, int]
    regraft: Tuple[int, int]


def _check_move(t: Tree, m: SprMove) -> Tuple[int, int, int, int, int, int]:
    u, v = m.cut
    x, y = m.regraft
    if u not in t._adj or v not in t._adj[u]:
        raise TreeError(f"cut edge {m.cut} not in tree")
    if x not in t._adj or y not in t._adj[x]:
        raise TreeError(f"regraft edge {m.regraft} not in tree")
    if t.is_leaf(v):
        raise TreeError("cut edge leaves nothing to regraft onto")
    if v in (x, y):
        raise TreeError("regraft onto an edge incident to the pruned node is the identity")
    a, b = (w for w in t._adj[v] if w != u)
    vside = set(t.component_nodes(v, u))
    if x not in vside or y not in vside:
        raise TreeError("regraft edge lies inside the pruned subtree")
    return u, v, x, y, a, b


def apply_spr(t: Tree, m: SprMove, return_mapping: bool = False):
    """Apply one SPR move.

    With ``return_mapping`` the edge mapping of the step is returned as well:
    a dict from every old edge to the set of new edges it corresponds to.  The
    cut edge maps to itself, the two edges merged by suppressing ``v`` both map
    to the merged edge, and the subdivided regraft edge maps to its two halves.
    """
    u, v, x, y, a, b = _check_move(t, m)
    adj = {k: list(ns) for k, ns in t._adj.items()}
    adj[a].remove(v)
    adj[b].remove(v)
    adj[a].append(b)
    adj[b].append(a)
    adj[x].remove(y)
    adj[y].remove(x)
    adj[x].append(v)
    adj[y].append(v)
    adj[v] = [u, x, y]
    out = Tree(adj, t._labels, validate=False)
    if not return_mapping:
        return out
    mapping = {e: frozenset((e,)) for e in t.edges()}
    merged = edge(a, b)
    mapping[edge(a, v)] = frozenset((merged,))
    mapping[edge(v, b)] = frozenset((merged,))
    mapping[edge(x, y)] = frozenset((edge(x, v), edge(v, y)))
    return out, mapping


def encode_move(t: Tree, m: SprMove) -> Tuple[List[str], List[str]]:
    """Leaf-set form of a move: the pruned labels, and the regraft edge.

    The regraft edge is named by its split in the tree left after pruning,
    as the side without the least remaining label.
    """
    u, v, x, y, a, b = _check_move(t, m)
    pruned = t.side(u, v)
    rest = t.labels - pruned
    side = t.side(x, y) & rest
    if min(rest) in side:
        side = rest - side
    return sorted(pruned), sorted(side)


def decode_move(t: Tree, pruned: Iterable[str], regraft: Iterable[str]) -> SprMove:
    """Inverse of :func:`encode_move` on ``t``."""
    pruned, regraft = frozenset(pruned), frozenset(regraft)
    cut = None
    for e in t.edges():
        p, q = tuple(e)
        for u, v in ((p, q), (q, p)):
            if t.side(u, v) == pruned:
                cut = (u, v)
    if cut is None:
        raise TreeError(f"no edge separates {sorted(pruned)}")
    u, v = cut
    rest = t.labels - pruned
    want = {regraft, rest - regraft}
    for x in t.component_nodes(v, u):
        for y in t.neighbors(x):
            if y == u or v in (x, y) or x > y:
                continue
            if (t.side(x, y) & rest) in want:
                return SprMove(cut, (x, y))
    raise TreeError(f"no regraft edge with split {sorted(regraft)}")


def inverse_move(t: Tree, m: SprMove) -> SprMove:
    """The move undoing ``m`` when applied to ``apply_spr(t, m)``."""
    u, v, x, y, a, b = _check_move(t, m)
    return SprMove((u, v), (a, b))


def spr_moves(t: Tree) -> Iterator[SprMove]:
    """Every non-identity SPR move of ``t`` (distinct moves may give equal trees)."""
    adj = t._adj
    for v, ns in adj.items():
        if len(ns) != 3:
            continue
        for u in ns:
            # edges of the v side not incident to v
            comp = t.component_nodes(v, u)
            for p in comp:
                if p == v:
                    continue
                for q in adj[p]:
                    if q != v and p < q:
                        yield SprMove((u, v), (p, q))


def spr_neighbors(t: Tree) -> List[Tree]:
    """Distinct trees exactly one SPR move away, ordered by canonical form."""
    return [s for _, s in neighbor_moves(t)]


def neighbor_moves(t: Tree) -> List[Tuple[SprMove, Tree]]:
    """One representative move per distinct neighbour, ordered by canonical form."""
    # moves are applied to a scratch adjacency in place and undone afterwards
    adj = {k: list(ns) for k, ns in t._adj.items()}
    labels = t._labels
    own = t.canonical_form()
    seen: Dict[str, SprMove] = {}
    for m in spr_moves(t):
        u, v = m.cut
        x, y = m.regraft
        a, b = (w for w in adj[v] if w != u)
        adj[a].remove(v)
        adj[b].remove(v)
        adj[a].append(b)
        adj[b].append(a)
        adj[x].remove(y)
        adj[y].remove(x)
        adj[x].append(v)
        adj[y].append(v)
        adj[v] = [u, x, y]
        c = _canonical(adj, labels)
        adj[v] = [u, a, b]
        adj[x].remove(v)
        adj[y].remove(v)
        adj[x].append(y)
        adj[y].append(x)
        adj[a].remove(b)
        adj[b].remove(a)
        adj[a].append(v)
        adj[b].append(v)
        if c != own and c not in seen:
            seen[c] = m
    out = []
    for c in sorted(seen):
        s = apply_spr(t, seen[c])
        s._canon = c
        out.append((seen[c], s))
    return out


def find_move(t: Tree, target: Tree) -> SprMove:
    """An SPR move turning ``t`` into ``target`` (first in generation order)."""
    want = target.canonical_form()
    for m in spr_moves(t):
        if apply_spr(t, m).canonical_form() == want:
            return m
    raise TreeError("trees are not one SPR move apart")


# -- enumeration ---------------------------------------------------------------


def double_factorial(k: int) -> int:
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


def n_unrooted_trees(n: int) -> int:
    return double_factorial(2 * n - 5) if n >= 3 else 1


def enumerate_trees(labels: Iterable[str], cap: int = 10) -> Iterator[Tree]:
    """Yield every unrooted binary tree on ``labels`` exactly once.

    Trees are built by stepwise leaf insertion in sorted label order.
    """
    labs = sorted(set(labels))
    if len(labs) < 3:
        raise TreeError("need at least three labels")
    if len(labs) > cap:
        raise TreeError(f"{len(labs)} labels exceeds enumeration cap {cap}")
    base = {0: [1, 2, 3], 1: [0], 2: [0], 3: [0]}
    names = {1: labs[0], 2: labs[1], 3: labs[2]}
    yield from _insert_rest(base, names, labs, 3, 4)


def _insert_rest(adj, names, labs, i, next_id):
    if i == len(labs):
        yield Tree(adj, names, validate=False)
        return
    edges = [(a, b) for a, ns in adj.items() for b in ns if a < b]
    for a, b in edges:
        mid, leaf = next_id, next_id + 1
        adj[a].remove(b)
        adj[b].remove(a)
        adj[a].append(mid)
        adj[b].append(mid)
        adj[mid] = [a, b, leaf]
        adj[leaf] = [mid]
        names[leaf] = labs[i]
        yield from _insert_rest(adj, names, labs, i + 1, next_id + 2)
        del names[leaf]
        del adj[leaf]
        del adj[mid]
        adj[a].remove(mid)
        adj[b].remove(mid)
        adj[a].append(b)
        adj[b].append(a)


def random_tree(labels: Iterable[str], rng: Optional[random.Random] = None) -> Tree:
    """Uniformly random unrooted binary tree on ``labels`` (random insertion)."""
    rng = rng or random.Random()
    labs = sorted(set(labels))
    if len(labs) < 3:
        raise TreeError("need at least three labels")
    rng.shuffle(labs)
    adj = {0: [1, 2, 3], 1: [0], 2: [0], 3: [0]}
    names = {1: labs[0], 2: labs[1], 3: labs[2]}
    edges = [(0, 1), (0, 2), (0, 3)]
    nxt = 4
    for lab in labs[3:]:
        i = rng.randrange(len(edges))
        a, b = edges[i]
        mid, leaf = nxt, nxt + 1
        nxt += 2
        adj[a][adj[a].index(b)] = mid
        adj[b][adj[b].index(a)] = mid
        adj[mid] = [a, b, leaf]
        adj[leaf] = [mid]
        names[leaf] = lab
        edges[i] = (a, mid)
        edges += [(mid, b), (mid, leaf)]
    return Tree(adj, names, validate=False)


def fresh_ids(t: Tree) -> Iterator[int]:
    return count(max(t.nodes()) + 1)
