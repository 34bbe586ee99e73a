"""Subtree and chain reduction for pairs of unrooted trees.

Both rules replace structure that the two trees share: a common pendant
subtree becomes one fresh leaf ``R#k``; a common chain of at least four
pendant leaves becomes three fresh leaves ``C#k:1``, ``C#k:2``, ``C#k:3`` in
chain order.  Neither rule changes the unrooted SPR distance, so
:func:`kernelize` applies them to a fixpoint before exact search.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from .newick import format_label, parse_newick, write_newick
from .tree import Tree, TreeError

_FRESH = re.compile(r"^[RC]#(\d+)")


class ReductionError(TreeError):
    pass


def _check_same_labels(t1: Tree, t2: Tree) -> None:
    if t1.labels != t2.labels:
        raise ReductionError("trees have different label sets")


# -- pendant subtrees ----------------------------------------------------------


def pendant_subtrees(t: Tree) -> Dict[FrozenSet[str], Tuple[str, Tuple[int, int]]]:
    """Map each pendant leaf set to (rooted canonical text, directed edge).

    The directed edge ``(u, v)`` has the pendant subtree on the ``v`` side.
    """
    out: Dict[FrozenSet[str], Tuple[str, Tuple[int, int]]] = {}
    memo: Dict[Tuple[int, int], Tuple[str, str, FrozenSet[str]]] = {}

    def rooted(u: int, v: int) -> Tuple[str, str, FrozenSet[str]]:
        key = (u, v)
        if key in memo:
            return memo[key]
        # explicit stack; children are resolved before their parent
        stack = [(u, v, False)]
        while stack:
            p, x, ready = stack.pop()
            if (p, x) in memo:
                continue
            lab = t.label(x)
            if lab is not None:
                memo[(p, x)] = (lab, lab, frozenset((lab,)))
                continue
            kids = [w for w in t.neighbors(x) if w != p]
            if not ready:
                stack.append((p, x, True))
                stack.extend((x, w, False) for w in kids if (x, w) not in memo)
                continue
            parts = sorted(memo[(x, w)] for w in kids)
            text = "(" + ",".join(q[1] for q in parts) + ")"
            memo[(p, x)] = (parts[0][0], text, parts[0][2] | parts[1][2])
        return memo[key]

    for u in t.nodes():
        for v in t.neighbors(u):
            _, text, leaves = rooted(u, v)
            out[leaves] = (text, (u, v))
    return out


def find_common_subtrees(t1: Tree, t2: Tree) -> List[FrozenSet[str]]:
    """Maximal pendant subtrees (at least two leaves) shared by both trees.

    A subtree whose complement has fewer than two leaves is not reported, so
    reduction always leaves a tree with at least three leaves.
    """
    _check_same_labels(t1, t2)
    n = t1.n_leaves
    p1 = pendant_subtrees(t1)
    p2 = pendant_subtrees(t2)
    common = [s for s, (text, _) in p1.items()
              if 2 <= len(s) <= n - 2 and s in p2 and p2[s][0] == text]
    maximal = [s for s in common if not any(s < o for o in common)]
    return sorted(maximal, key=lambda s: (min(s), -len(s), sorted(s)))


def _next_index(labels) -> int:
    used = [int(m.group(1)) for m in map(_FRESH.match, labels) if m]
    return max(used, default=0) + 1


def _replace_pendant(t: Tree, leaves: FrozenSet[str], new_label: str) -> Tree:
    entry = pendant_subtrees(t).get(leaves)
    if entry is None:
        raise ReductionError(f"{sorted(leaves)} is not a pendant subtree")
    u, v = entry[1]
    drop = set(t.component_nodes(v, u)) - {v}
    adj = {x: [w for w in ns if w not in drop] for x, ns in t.adjacency().items() if x not in drop}
    adj[v] = [u]
    labels = {x: lab for x, lab in t.leaf_labels().items() if x not in drop and x != v}
    labels[v] = new_label
    return Tree(adj, labels)


def subtree_reduce(t1: Tree, t2: Tree, leaves, label: Optional[str] = None):
    """Replace a common pendant subtree by a single fresh leaf in both trees.

    Returns ``(t1', t2', log_entry)``.
    """
    _check_same_labels(t1, t2)
    leaves = frozenset(leaves)
    p1 = pendant_subtrees(t1)
    p2 = pendant_subtrees(t2)
    if leaves not in p1 or leaves not in p2 or p1[leaves][0] != p2[leaves][0] or len(leaves) < 2:
        raise ReductionError(f"{sorted(leaves)} is not a common pendant subtree")
    if label is None:
        label = f"R#{_next_index(t1.labels)}"
    entry = {
        "rule": "subtree",
        "fresh_labels": [label],
        "consumed_leaves": sorted(leaves),
        "orientation": None,
        "subtree": _rooted_newick(t1, leaves),
    }
    return _replace_pendant(t1, leaves, label), _replace_pendant(t2, leaves, label), entry


def _rooted_newick(t: Tree, leaves: FrozenSet[str]) -> str:
    # write the pendant subtree as a 3-leaf-padded unrooted tree would lose the
    # rooting, so emit it directly
    _, (u, v) = pendant_subtrees(t)[leaves]

    def rec(p: int, x: int) -> Tuple[str, str]:
        lab = t.label(x)
        if lab is not None:
            return lab, format_label(lab)
        parts = sorted(rec(x, w) for w in t.neighbors(x) if w != p)
        return parts[0][0], "(" + ",".join(s for _, s in parts) + ")"

    return rec(u, v)[1]


# -- chains --------------------------------------------------------------------


@dataclass(frozen=True)
class ChainDescriptor:
    """A maximal chain of pendant leaves common to both trees.

    ``pendants`` is ordered from the ``A`` end to the ``B`` end of the first
    tree.  ``spine1``/``spine2`` hold the edges e_0..e_l and
    ``pendant_edges1``/``pendant_edges2`` the edges p_1..p_l, as node pairs of
    the respective tree.  ``orientation`` is ``"reversed"`` when, relative to
    the least label outside the chain, the second tree runs the chain the other
    way round.
    """

    pendants: Tuple[str, ...]
    orientation: str
    flank_a: FrozenSet[str]
    flank_b: FrozenSet[str]
    flank_a2: FrozenSet[str]
    flank_b2: FrozenSet[str]
    spine1: Tuple[Tuple[int, int], ...] = field(compare=False, default=())
    spine2: Tuple[Tuple[int, int], ...] = field(compare=False, default=())
    pendant_edges1: Tuple[Tuple[int, int], ...] = field(compare=False, default=())
    pendant_edges2: Tuple[Tuple[int, int], ...] = field(compare=False, default=())

    @property
    def length(self) -> int:
        return len(self.pendants)


def _attach(t: Tree, label: str) -> int:
    return t.neighbors(t.leaf(label))[0]


def _is_chain(t: Tree, seq: Sequence[str]) -> bool:
    atts = [_attach(t, c) for c in seq]
    if len(set(atts)) != len(atts):
        return False
    return all(atts[i + 1] in t.neighbors(atts[i]) for i in range(len(atts) - 1))


def _chain_layout(t: Tree, seq: Sequence[str]):
    atts = [_attach(t, c) for c in seq]
    a_out = next(w for w in t.neighbors(atts[0])
                 if w != t.leaf(seq[0]) and (len(atts) == 1 or w != atts[1]))
    b_out = next(w for w in t.neighbors(atts[-1])
                 if w != t.leaf(seq[-1]) and (len(atts) == 1 or w != atts[-2]))
    spine = [(a_out, atts[0])] + [(atts[i], atts[i + 1]) for i in range(len(atts) - 1)] + [(atts[-1], b_out)]
    pend = [(atts[i], t.leaf(c)) for i, c in enumerate(seq)]
    flank_a = t.side(a_out, atts[0])
    flank_b = t.side(b_out, atts[-1])
    return tuple(spine), tuple(pend), flank_a, flank_b


def _chain_graph(t1: Tree, t2: Tree) -> Dict[str, set]:
    def adjacent_pairs(t: Tree) -> set:
        pairs = set()
        by_att: Dict[int, List[str]] = {}
        for lab in t.labels:
            by_att.setdefault(_attach(t, lab), []).append(lab)
        for w, labs in by_att.items():
            if len(labs) != 1:
                # leaves in a cherry are flanks, never chain members
                continue
            for x in t.neighbors(w):
                if len(by_att.get(x, ())) != 1:
                    continue
                for other in by_att.get(x, ()):
                    for lab in labs:
                        pairs.add(frozenset((lab, other)))
        return pairs

    common = adjacent_pairs(t1) & adjacent_pairs(t2)
    g: Dict[str, set] = {lab: set() for lab in t1.labels}
    for pair in common:
        a, b = tuple(pair)
        g[a].add(b)
        g[b].add(a)
    return g


def find_common_chains(t1: Tree, t2: Tree, min_length: int = 4) -> List[ChainDescriptor]:
    """All maximal common chains with at least ``min_length`` pendant leaves."""
    _check_same_labels(t1, t2)
    if t1.n_leaves < 5:
        return []
    g = _chain_graph(t1, t2)
    found: Dict[Tuple[str, ...], None] = {}

    def extend(seq: List[str]) -> None:
        grew = False
        for nxt in sorted(g[seq[-1]]):
            if nxt in seq:
                continue
            cand = seq + [nxt]
            if _is_chain(t1, cand) and _is_chain(t2, cand):
                grew = True
                extend(cand)
        if not grew and len(seq) >= min_length:
            # only keep chains that cannot grow at the front either
            for prv in g[seq[0]]:
                if prv not in seq:
                    cand = [prv] + seq
                    if _is_chain(t1, cand) and _is_chain(t2, cand):
                        return
            key = tuple(seq) if seq[0] <= seq[-1] else tuple(reversed(seq))
            found[key] = None

    for start in sorted(g):
        if g[start]:
            extend([start])

    out = []
    for seq in found:
        desc = _describe(t1, t2, seq)
        if desc is not None:
            out.append(desc)
    out.sort(key=lambda c: (min(c.pendants), -c.length, c.pendants))
    return out


def _describe(t1: Tree, t2: Tree, seq: Sequence[str]) -> Optional[ChainDescriptor]:
    spine1, pend1, fa, fb = _chain_layout(t1, seq)
    spine2, pend2, fa2, fb2 = _chain_layout(t2, seq)
    outside = t1.labels - set(seq)
    if not outside:
        return None
    ref = min(outside)
    forward1 = ref in fa
    forward2 = ref in fa2
    orientation = "same" if forward1 == forward2 else "reversed"
    return ChainDescriptor(tuple(seq), orientation, fa, fb, fa2, fb2, spine1, spine2, pend1, pend2)


def _shrink_chain(t: Tree, seq: Sequence[str], fresh: Sequence[str]) -> Tree:
    adj = {x: list(ns) for x, ns in t.adjacency().items()}
    labels = t.leaf_labels()
    keep = {seq[0]: fresh[0], seq[1]: fresh[1], seq[-1]: fresh[2]}
    for lab in seq[2:-1]:
        leaf = t.leaf(lab)
        w = adj[leaf][0]
        a, b = (x for x in adj[w] if x != leaf)
        adj[a].remove(w)
        adj[b].remove(w)
        adj[a].append(b)
        adj[b].append(a)
        del adj[w]
        del adj[leaf]
        del labels[leaf]
    for x, lab in list(labels.items()):
        if lab in keep:
            labels[x] = keep[lab]
    return Tree(adj, labels)


def chain_reduce(t1: Tree, t2: Tree, chain: ChainDescriptor, index: Optional[int] = None):
    """Replace a common chain by three fresh leaves, keeping its direction.

    Returns ``(t1_3, t2_3, log_entry)``.
    """
    _check_same_labels(t1, t2)
    seq = chain.pendants
    if len(seq) < 4:
        raise ReductionError("chains shorter than four leaves are not reduced")
    if not (set(seq) <= t1.labels and _is_chain(t1, seq) and _is_chain(t2, seq)):
        raise ReductionError("stale chain: trees changed since detection")
    if index is None:
        index = _next_index(t1.labels)
    fresh = [f"C#{index}:{i}" for i in (1, 2, 3)]
    entry = {
        "rule": "chain",
        "fresh_labels": fresh,
        "consumed_leaves": list(seq),
        "orientation": chain.orientation,
    }
    return _shrink_chain(t1, seq, fresh), _shrink_chain(t2, seq, fresh), entry


# -- kernel --------------------------------------------------------------------


@dataclass
class ReducedPair:
    t1: Tree
    t2: Tree
    label_log: List[dict]

    @property
    def n_leaves(self) -> int:
        return self.t1.n_leaves

    def expand(self) -> Tuple[Tree, Tree]:
        """Undo every logged reduction, newest first."""
        t1, t2 = self.t1, self.t2
        for entry in reversed(self.label_log):
            if entry["rule"] == "subtree":
                t1 = _graft(t1, entry["fresh_labels"][0], entry["subtree"])
                t2 = _graft(t2, entry["fresh_labels"][0], entry["subtree"])
            else:
                t1 = _unshrink(t1, entry["fresh_labels"], entry["consumed_leaves"])
                t2 = _unshrink(t2, entry["fresh_labels"], entry["consumed_leaves"])
        return t1, t2


def _graft(t: Tree, label: str, rooted_text: str) -> Tree:
    # parse the pendant as a tree rooted by an extra leaf standing for its parent
    anchor = "__anchor__"
    sub = parse_newick(f"({rooted_text},'{anchor}');", strict=False, min_leaves=1)
    leaf = t.leaf(label)
    parent = t.neighbors(leaf)[0]
    offset = max(t.nodes()) + 1
    adj = {x: list(ns) for x, ns in t.adjacency().items() if x != leaf}
    adj[parent] = [w for w in adj[parent] if w != leaf]
    labels = {x: lab for x, lab in t.leaf_labels().items() if x != leaf}
    a = sub.leaf(anchor)
    top = sub.neighbors(a)[0]
    for x, ns in sub.adjacency().items():
        if x == a:
            continue
        adj[x + offset] = [w + offset for w in ns if w != a]
    adj[top + offset].append(parent)
    adj[parent].append(top + offset)
    for x, lab in sub.leaf_labels().items():
        if x != a:
            labels[x + offset] = lab
    return Tree(adj, labels)


def _unshrink(t: Tree, fresh: Sequence[str], seq: Sequence[str]) -> Tree:
    adj = {x: list(ns) for x, ns in t.adjacency().items()}
    labels = t.leaf_labels()
    back = {fresh[0]: seq[0], fresh[1]: seq[1], fresh[2]: seq[-1]}
    for x, lab in list(labels.items()):
        if lab in back:
            labels[x] = back[lab]
    w2 = adj[t.leaf(fresh[1])][0]
    w3 = adj[t.leaf(fresh[2])][0]
    nxt = max(adj) + 1
    prev = w2
    for lab in seq[2:-1]:
        w, leaf = nxt, nxt + 1
        nxt += 2
        adj[prev].remove(w3)
        adj[w3].remove(prev)
        adj[prev].append(w)
        adj[w3].append(w)
        adj[w] = [prev, w3, leaf]
        adj[leaf] = [w]
        labels[leaf] = lab
        prev = w
    return Tree(adj, labels)


def kernelize(t1: Tree, t2: Tree, order: str = "subtree-first") -> ReducedPair:
    """Apply both reduction rules until neither applies.

    ``order`` is ``"subtree-first"`` (exhaust subtree reductions before each
    chain step) or ``"chain-first"``; both reach a fixpoint of both rules.
    """
    _check_same_labels(t1, t2)
    if order not in ("subtree-first", "chain-first"):
        raise ValueError(f"unknown reduction order {order!r}")
    log: List[dict] = []
    index = _next_index(t1.labels)
    while True:
        steps = (_try_subtree, _try_chain) if order == "subtree-first" else (_try_chain, _try_subtree)
        for step in steps:
            res = step(t1, t2, index)
            if res is not None:
                t1, t2, entry = res
                log.append(entry)
                index += 1
                break
        else:
            return ReducedPair(t1, t2, log)


def _try_subtree(t1: Tree, t2: Tree, index: int):
    subs = find_common_subtrees(t1, t2)
    if not subs:
        return None
    return subtree_reduce(t1, t2, subs[0], label=f"R#{index}")


def _try_chain(t1: Tree, t2: Tree, index: int):
    chains = find_common_chains(t1, t2)
    if not chains:
        return None
    return chain_reduce(t1, t2, chains[0], index=index)


def reduced_newick(pair: ReducedPair) -> Tuple[str, str]:
    return write_newick(pair.t1), write_newick(pair.t2)
