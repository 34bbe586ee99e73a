"""Topology-only Newick reading and writing.

Branch lengths and internal node names are parsed and discarded.  Labels that
fall outside the plain name alphabet (the reducer's fresh labels contain ``#``
and ``:``) are written in single quotes, and quoted names are accepted on input.
"""

from __future__ import annotations

import re
from typing import Dict, List, Optional, Tuple

from .tree import Tree, TreeError, suppress

_NAME = re.compile(r"[A-Za-z0-9_.\-|]+")
_NUMBER = re.compile(r"[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?")


class NewickError(TreeError):
    def __init__(self, message: str, position: Optional[int] = None):
        if position is not None:
            message = f"{message} at position {position}"
        super().__init__(message)
        self.position = position


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str) -> None:
        if self.peek() != ch:
            got = self.peek() or "end of input"
            raise NewickError(f"expected {ch!r}, found {got!r}", self.pos)
        self.pos += 1

    def name(self) -> Optional[str]:
        self.skip_ws()
        if self.peek() == "'":
            end = self.pos + 1
            chunks = []
            while True:
                j = self.text.find("'", end)
                if j < 0:
                    raise NewickError("unterminated quoted label", self.pos)
                chunks.append(self.text[end:j])
                if self.text.startswith("''", j):
                    chunks.append("'")
                    end = j + 2
                    continue
                self.pos = j + 1
                return "".join(chunks)
        m = _NAME.match(self.text, self.pos)
        if not m:
            return None
        self.pos = m.end()
        return m.group()

    def length(self) -> None:
        if self.peek() == ":":
            self.pos += 1
            self.skip_ws()
            m = _NUMBER.match(self.text, self.pos)
            if not m:
                raise NewickError("malformed branch length", self.pos)
            self.pos = m.end()


def parse_newick(text: str, strict: bool = True, min_leaves: int = 3) -> Tree:
    """Parse one Newick tree into an unrooted tree.

    A top-level bifurcation is treated as a rooted drawing and its root is
    suppressed.  In strict mode multifurcations are rejected and fewer than
    ``min_leaves`` leaves is an error.
    """
    p = _Parser(text)
    adj: Dict[int, set] = {}
    labels: Dict[int, str] = {}
    seen: Dict[str, int] = {}
    counter = [0]

    def new_node() -> int:
        v = counter[0]
        counter[0] += 1
        adj[v] = set()
        return v

    def subtree() -> Tuple[int, int]:
        """Returns (node id, number of children)."""
        start = p.pos
        if p.peek() == "(":
            p.pos += 1
            v = new_node()
            kids: List[int] = []
            while True:
                c, _ = subtree()
                kids.append(c)
                if p.peek() == ",":
                    p.pos += 1
                    continue
                p.expect(")")
                break
            if len(kids) < 2:
                raise NewickError("internal node with a single child", start)
            for c in kids:
                adj[v].add(c)
                adj[c].add(v)
            p.name()  # internal label, ignored
            p.length()
            return v, len(kids)
        lab = p.name()
        if lab is None:
            got = p.peek() or "end of input"
            raise NewickError(f"expected a label or '(', found {got!r}", p.pos)
        if lab in seen:
            raise NewickError(f"duplicate label {lab!r}", start)
        v = new_node()
        labels[v] = lab
        seen[lab] = v
        p.length()
        return v, 0

    root, n_kids = subtree()
    p.expect(";")
    if p.peek():
        raise NewickError("trailing characters after ';'", p.pos)
    if strict:
        for v, ns in adj.items():
            if v not in labels and len(ns) > 3:
                raise NewickError("multifurcating node (nonbinary input is not supported)")
    if strict and len(labels) < min_leaves:
        raise NewickError(f"tree has {len(labels)} leaves, need at least {min_leaves}")
    if len(labels) >= 2:
        suppress(adj, labels)
    return Tree(adj, labels)


def format_label(label: str) -> str:
    if _NAME.fullmatch(label):
        return label
    return "'" + label.replace("'", "''") + "'"


def write_newick(t: Tree) -> str:
    """Deterministic Newick text rooted at the neighbour of the least leaf.

    Children are ordered by the least label below them, so the output equals
    the canonical form whenever every label is a plain name.
    """
    canon = t.canonical_form()
    if all(_NAME.fullmatch(lab) for lab in t.labels):
        return canon
    return _write_quoted(t)


def _write_quoted(t: Tree) -> str:
    adj = t.adjacency()
    labels = t.leaf_labels()
    if len(labels) == 1:
        return format_label(next(iter(labels.values()))) + ";"
    if len(labels) == 2:
        return "(" + ",".join(format_label(x) for x in sorted(labels.values())) + ");"
    least = min(labels, key=labels.__getitem__)
    root = adj[least][0]

    def rec(v: int, parent: int) -> Tuple[str, str]:
        lab = labels.get(v)
        if lab is not None:
            return lab, format_label(lab)
        parts = sorted(rec(w, v) for w in adj[v] if w != parent)
        return parts[0][0], "(" + ",".join(s for _, s in parts) + ")"

    return rec(root, -1)[1] + ";"


def read_trees(text: str, **kwargs) -> List[Tree]:
    """Parse every ``;``-terminated tree in ``text`` (quotes respected)."""
    out = []
    buf = []
    quoted = False
    for ch in text:
        buf.append(ch)
        if ch == "'":
            quoted = not quoted
        elif ch == ";" and not quoted:
            out.append(parse_newick("".join(buf), **kwargs))
            buf = []
    if "".join(buf).strip():
        raise NewickError("trailing text without ';'")
    return out
