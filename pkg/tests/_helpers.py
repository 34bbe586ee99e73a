"""Builders shared by the test modules."""

import random
from typing import List, Sequence

from usprkit.distance import _intern, _neighbors, _tree
from usprkit.rewrite import TreePath
from usprkit.tree import Tree, apply_spr, find_move


def labels(n: int) -> List[str]:
    return [str(i) for i in range(1, n + 1)]


def plant_chain(t: Tree, chain: Sequence[str], rng: random.Random, internal: bool = True) -> Tree:
    """Subdivide an edge of ``t`` with pendant leaves ``chain`` in order (or reversed)."""
    adj = {k: list(v) for k, v in t.adjacency().items()}
    names = t.leaf_labels()
    edges = [tuple(e) for e in t.edges()]
    inner = [e for e in edges if not (t.is_leaf(e[0]) or t.is_leaf(e[1]))]
    a, b = rng.choice(inner if internal and inner else edges)
    seq = list(chain)
    if rng.random() < 0.5:
        seq.reverse()
    nid = max(adj) + 1
    prev = a
    adj[a].remove(b)
    adj[b].remove(a)
    for c in seq:
        w, x = nid, nid + 1
        nid += 2
        adj[w] = [prev, x]
        adj[prev].append(w)
        adj[x] = [w]
        names[x] = c
        prev = w
    adj[prev].append(b)
    adj[b].append(prev)
    return Tree(adj, names)


def optimal_paths(t1: Tree, t2: Tree, d: int) -> List[List[str]]:
    """Every shortest path of canonical keys from ``t1`` to ``t2``."""
    a, b = _intern(t1), _intern(t2)
    dist = {b: 0}
    layer = [b]
    for i in range(d):
        nxt = []
        for k in layer:
            for nb in _neighbors(k):
                if nb not in dist:
                    dist[nb] = i + 1
                    nxt.append(nb)
        layer = nxt
    out: List[List[str]] = []

    def rec(k: str, path: List[str]) -> None:
        if k == b:
            out.append(list(path))
            return
        for nb in _neighbors(k):
            if dist.get(nb, d + 1) == dist[k] - 1:
                path.append(nb)
                rec(nb, path)
                path.pop()

    rec(a, [a])
    return out


def tree_path(t1: Tree, keys: Sequence[str]) -> TreePath:
    moves = []
    cur = t1
    for k in keys[1:]:
        m = find_move(cur, _tree(k))
        moves.append(m)
        cur = apply_spr(cur, m)
    return TreePath(t1, tuple(moves))


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE: List[str] = []


def report(n: int, ok: bool, detail: str) -> str:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return line
