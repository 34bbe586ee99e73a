"""Socket agreement forests.

A socket forest is a set of panels.  A panel is a binary tree on a block of
labels whose edges may be subdivided by sockets; a single-leaf panel is the
leaf joined to one socket; a hub is a bare socket with no labels.  Connections
join sockets and keep their identifiers when an endpoint moves.

A configuration (forest plus connection set) yields a tree when panels and
connections form one acyclic graph that, after deleting unconnected hubs and
suppressing unconnected sockets, is an unrooted binary tree.  Multifurcations
are never resolved: a socket carrying too many connections makes the
configuration invalid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Dict, FrozenSet, Iterator, List, Mapping, Optional, Sequence, Tuple

from .forest import LabeledForest, forest_of
from .tree import Tree, TreeError, spanning_nodes, suppress


class SocketError(TreeError):
    pass


class CycleError(SocketError):
    pass


class InvalidConfiguration(SocketError):
    pass


def _split_key(block: FrozenSet[str], side: FrozenSet[str]) -> FrozenSet[str]:
    """Name a split of ``block`` by its part without the least label."""
    other = block - side
    return side if min(block) in other else other


@dataclass(frozen=True)
class PanelSpec:
    """Blueprint of one panel: its block tree and socket counts per edge.

    ``sockets`` maps an edge key (the side of the block split without the
    least label) to the number of sockets on that edge.  A single-leaf panel
    always gets one socket; a hub is a ``PanelSpec`` with ``tree=None``.
    """

    tree: Optional[Tree]
    sockets: Mapping[FrozenSet[str], int] = field(default_factory=dict)


class SocketForest:
    """Immutable socket forest over integer node ids."""

    def __init__(self, panels: Sequence[PanelSpec]):
        adj: Dict[int, set] = {}
        labels: Dict[int, str] = {}
        sockets: List[int] = []
        panel_of: Dict[int, int] = {}
        edge_sockets: Dict[Tuple[int, FrozenSet[str]], Tuple[int, ...]] = {}
        leaf_socket: Dict[str, int] = {}
        hubs: List[int] = []
        blocks: List[FrozenSet[str]] = []
        nid = 0

        def new(p: int) -> int:
            nonlocal nid
            adj[nid] = set()
            panel_of[nid] = p
            nid += 1
            return nid - 1

        for p, spec in enumerate(panels):
            if spec.tree is None:
                s = new(p)
                sockets.append(s)
                hubs.append(s)
                blocks.append(frozenset())
                continue
            t = spec.tree
            block = t.labels
            blocks.append(block)
            if len(block) == 1:
                (lab,) = block
                x, s = new(p), new(p)
                labels[x] = lab
                adj[x].add(s)
                adj[s].add(x)
                sockets.append(s)
                leaf_socket[lab] = s
                continue
            local = {v: new(p) for v in t.nodes()}
            for v in t.nodes():
                if t.is_leaf(v):
                    labels[local[v]] = t.label(v)
            for e in t.edges():
                a, b = sorted(e)
                key = _split_key(block, t.side(a, b))
                # orient so the walk starts at the key side
                if t.side(a, b) != key:
                    a, b = b, a
                chain = []
                for _ in range(spec.sockets.get(key, 0)):
                    s = new(p)
                    sockets.append(s)
                    chain.append(s)
                path = [local[a]] + chain + [local[b]]
                for u, w in zip(path, path[1:]):
                    adj[u].add(w)
                    adj[w].add(u)
                edge_sockets[(p, key)] = tuple(chain)
            unknown = set(spec.sockets) - {k for (q, k) in edge_sockets if q == p}
            if unknown:
                raise SocketError(f"panel {p}: no edge with key {sorted(map(sorted, unknown))}")
        self.adj = {v: frozenset(ns) for v, ns in adj.items()}
        self.labels = labels
        self.sockets = tuple(sockets)
        self.socket_set = frozenset(sockets)
        self.panel_of = panel_of
        self.edge_sockets = edge_sockets
        self.leaf_socket = leaf_socket
        self.hubs = tuple(hubs)
        self.blocks = blocks
        self.specs = tuple(panels)
        self.label_set = frozenset(labels.values())

    @property
    def n_panels(self) -> int:
        return len(self.specs)

    def panel_sockets(self, p: int) -> Tuple[int, ...]:
        return tuple(s for s in self.sockets if self.panel_of[s] == p)

    def is_singleton(self, p: int) -> bool:
        return self.specs[p].tree is not None and len(self.panel_sockets(p)) == 1

    def same_component(self, a: int, b: int) -> bool:
        """Whether sockets ``a`` and ``b`` sit in the same F* component."""
        pa, pb = self.panel_of[a], self.panel_of[b]
        return pa == pb and bool(self.blocks[pa])

    def __repr__(self) -> str:
        return f"SocketForest(panels={self.n_panels}, sockets={len(self.sockets)})"


def underlying_forest(sf: SocketForest) -> LabeledForest:
    """F*: drop connections and suppress every socket."""
    comps = [spec.tree for spec in sf.specs if spec.tree is not None]
    comps.sort(key=lambda c: min(c.labels))
    return LabeledForest(tuple(comps))


# -- configurations -----------------------------------------------------------


@dataclass(frozen=True)
class Configuration:
    """A socket forest with connections ``(id, a, b)``."""

    forest: SocketForest
    connections: Tuple[Tuple[int, int, int], ...]

    def endpoints(self, cid: int) -> Tuple[int, int]:
        for c, a, b in self.connections:
            if c == cid:
                return a, b
        raise SocketError(f"no connection with id {cid}")

    def pairs(self) -> FrozenSet[FrozenSet[int]]:
        return frozenset(frozenset((a, b)) for _, a, b in self.connections)

    def yield_tree(self) -> Tree:
        return yield_tree(self.forest, self.connections)


def yield_tree(sf: SocketForest, connections: Sequence[Tuple[int, int, int]]) -> Tree:
    adj: Dict[int, set] = {v: set(ns) for v, ns in sf.adj.items()}
    n_edges = sum(len(ns) for ns in adj.values()) // 2
    for cid, a, b in connections:
        if a == b:
            raise SocketError(f"connection {cid} joins a socket to itself")
        if a not in sf.socket_set or b not in sf.socket_set:
            raise SocketError(f"connection {cid} has a non-socket endpoint")
        if b in adj[a]:
            raise CycleError(f"connection {cid} closes a cycle")
        adj[a].add(b)
        adj[b].add(a)
        n_edges += 1
    for h in sf.hubs:
        if not adj[h]:
            del adj[h]
    if n_edges != len(adj) - 1 or not _connected(adj):
        raise CycleError("connections do not form a tree")
    labels = {v: lab for v, lab in sf.labels.items()}
    suppress(adj, labels)
    try:
        return Tree(adj, labels)
    except TreeError as exc:
        raise InvalidConfiguration(f"yield is not binary: {exc}") from None


def _connected(adj: Mapping[int, set]) -> bool:
    if not adj:
        return True
    start = next(iter(adj))
    seen = {start}
    stack = [start]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(adj)


@dataclass(frozen=True)
class ConnectionMove:
    """Move endpoint ``end`` (0 or 1) of connection ``conn`` onto ``socket``."""

    conn: int
    end: int
    socket: int


def apply_connection_move(c: Configuration, m: ConnectionMove) -> Configuration:
    out = []
    found = False
    for cid, a, b in c.connections:
        if cid == m.conn:
            found = True
            if m.end not in (0, 1):
                raise SocketError("endpoint index must be 0 or 1")
            if m.socket not in c.forest.socket_set:
                raise SocketError(f"node {m.socket} is not a socket")
            a, b = (m.socket, b) if m.end == 0 else (a, m.socket)
            if a == b:
                raise SocketError(f"move joins connection {cid} to itself")
        out.append((cid, a, b))
    if not found:
        raise SocketError(f"no connection with id {m.conn}")
    nc = Configuration(c.forest, tuple(out))
    nc.yield_tree()
    return nc


def moved_endpoint(c: Configuration, m: ConnectionMove) -> Tuple[int, int]:
    """(old socket, kept socket) for a move applied to ``c``."""
    a, b = c.endpoints(m.conn)
    return (a, b) if m.end == 0 else (b, a)


def candidate_moves(c: Configuration) -> Iterator[Tuple[ConnectionMove, Configuration, Tree]]:
    """Every single-endpoint move that yields a different valid tree."""
    here = c.yield_tree()
    for cid, a, b in c.connections:
        for end, keep in ((0, b), (1, a)):
            current = a if end == 0 else b
            for s in c.forest.sockets:
                if s == keep or s == current:
                    continue
                m = ConnectionMove(cid, end, s)
                try:
                    nc = apply_connection_move(c, m)
                    t = nc.yield_tree()
                except SocketError:
                    continue
                if t != here:
                    yield m, nc, t


# -- matching a tree against a socket forest ----------------------------------


class _Layout:
    """How a tree sits over the blocks of a forest.

    ``attach[(p, key)]`` lists the tree nodes that subdivide that panel edge,
    ordered from the key end; ``steiner`` holds internal nodes outside every
    multi-leaf block; ``links`` are the tree edges that must become
    connections (panel edges and block-internal edges excluded).
    """

    def __init__(self, sf: SocketForest, t: Tree):
        self.tree = t
        owner: Dict[int, int] = {}
        span_edges = set()
        self.attach: Dict[Tuple[int, FrozenSet[str]], List[int]] = {}
        for p, block in enumerate(sf.blocks):
            if len(block) < 2:
                continue
            nodes = spanning_nodes(t, block)
            for v in nodes:
                owner[v] = p
            for v in nodes:
                inside = [w for w in t.neighbors(v) if w in nodes]
                for w in inside:
                    span_edges.add(frozenset((v, w)))
                if len(inside) == 2 and not t.is_leaf(v):
                    sides = [t.side(w, v) & block for w in inside]
                    key = _split_key(block, sides[0])
                    near = inside[0] if sides[0] == key else inside[1]
                    # distance from the key end grows with the labels behind it
                    depth = len(t.side(near, v))
                    self.attach.setdefault((p, key), []).append((depth, v))
        for k in self.attach:
            self.attach[k] = [v for _, v in sorted(self.attach[k])]
        self.owner = owner
        self.steiner = [v for v in t.nodes() if v not in owner and not t.is_leaf(v)]
        self.links = [tuple(sorted(e)) for e in t.edges() if frozenset(e) not in span_edges]


def configurations(sf: SocketForest, t: Tree) -> Iterator[Configuration]:
    """Every configuration of ``sf`` whose yield is ``t`` (deterministic order)."""
    if t.labels != sf.label_set or not forest_of(underlying_forest(sf), t):
        return
    lay = _Layout(sf, t)
    edge_choices = []
    for key, nodes in sorted(lay.attach.items(), key=lambda kv: (kv[0][0], sorted(kv[0][1]))):
        slots = sf.edge_sockets.get(key, ())
        if len(nodes) > len(slots):
            return
        edge_choices.append([(nodes, pick) for pick in combinations(slots, len(nodes))])
    steiner_choices = []
    for v in lay.steiner:
        opts = []
        for w in t.neighbors(v):
            if t.is_leaf(w) and t.label(w) in sf.leaf_socket:
                opts.append(("leaf", w))
        opts += [("hub", h) for h in sf.hubs]
        steiner_choices.append(opts)
    for picks in product(*edge_choices):
        host: Dict[int, int] = {}
        for nodes, pick in picks:
            host.update(zip(nodes, pick))
        for chosen in product(*steiner_choices):
            used = set()
            absorbed = set()
            ok = True
            for v, (kind, ref) in zip(lay.steiner, chosen):
                s = ref if kind == "hub" else sf.leaf_socket[t.label(ref)]
                if s in used:
                    ok = False
                    break
                used.add(s)
                host[v] = s
                if kind == "leaf":
                    absorbed.add(frozenset((v, ref)))
            if not ok:
                continue
            conns = []
            for a, b in lay.links:
                if frozenset((a, b)) in absorbed:
                    continue
                ends = []
                for x in (a, b):
                    if t.is_leaf(x) and t.label(x) in sf.leaf_socket:
                        ends.append(sf.leaf_socket[t.label(x)])
                    else:
                        ends.append(host[x])
                conns.append(tuple(sorted(ends)))
            conns.sort()
            cfg = Configuration(sf, tuple((i, a, b) for i, (a, b) in enumerate(conns)))
            try:
                if cfg.yield_tree() == t:
                    yield cfg
            except SocketError:
                continue


def permits_tree(sf: SocketForest, t: Tree) -> Optional[Configuration]:
    return next(configurations(sf, t), None)


def saf_from_af(t1: Tree, t2: Tree, forest: LabeledForest) -> SocketForest:
    """Socket forest with a socket wherever either tree attaches to a panel.

    Every multi-leaf block gets, on each of its edges, one socket per
    attachment point in ``t1`` plus one per attachment point in ``t2``.
    Internal nodes lying outside every block are hosted by the socket of an
    adjacent single-leaf panel when possible and by hubs otherwise.
    """
    specs = []
    probe = SocketForest([PanelSpec(c) for c in forest.components])
    counts: Dict[Tuple[int, FrozenSet[str]], int] = {}
    hubs = 0
    for t in (t1, t2):
        if not forest_of(forest, t):
            raise SocketError("forest is not a forest of both trees")
        lay = _Layout(probe, t)
        for key, nodes in lay.attach.items():
            counts[key] = counts.get(key, 0) + len(nodes)
        need = sum(1 for v in lay.steiner
                   if not any(t.is_leaf(w) and t.label(w) in probe.leaf_socket for w in t.neighbors(v)))
        hubs = max(hubs, need)
    for p, comp in enumerate(forest.components):
        socks = {key: n for (q, key), n in counts.items() if q == p}
        specs.append(PanelSpec(comp, socks))
    specs += [PanelSpec(None)] * hubs
    return SocketForest(specs)


# -- move sequences -----------------------------------------------------------


@dataclass(frozen=True)
class ConnectionMoveSequence:
    start: Configuration
    moves: Tuple[ConnectionMove, ...] = ()

    def __len__(self) -> int:
        return len(self.moves)

    def configurations(self) -> List[Configuration]:
        """Replay every move; raises ``SocketError`` at the first bad one."""
        out = [self.start]
        for i, m in enumerate(self.moves):
            try:
                out.append(apply_connection_move(out[-1], m))
            except SocketError as exc:
                raise SocketError(f"move {i}: {exc}") from None
        return out

    def trees(self) -> List[Tree]:
        return [c.yield_tree() for c in self.configurations()]

    def final_tree(self) -> Tree:
        return self.configurations()[-1].yield_tree()

    def with_moves(self, moves: Sequence[ConnectionMove]) -> "ConnectionMoveSequence":
        return ConnectionMoveSequence(self.start, tuple(moves))


def permits_path(sf: SocketForest, path: Sequence[Tree]) -> Optional[ConnectionMoveSequence]:
    """A move sequence whose configurations yield ``path`` tree by tree.

    Raises ``PathNotPermitted`` naming the first tree the forest cannot
    yield at all; returns ``None`` when every tree is permitted on its own
    but no single-move transitions link them.
    """
    if not path:
        raise SocketError("empty path")
    for i, t in enumerate(path):
        if permits_tree(sf, t) is None:
            raise PathNotPermitted(i)
    dead = set()

    def extend(cfg: Configuration, i: int) -> Optional[List[ConnectionMove]]:
        if i == len(path) - 1:
            return []
        key = (cfg.connections, i)
        if key in dead:
            return None
        for m, nc, t in candidate_moves(cfg):
            if t == path[i + 1]:
                rest = extend(nc, i + 1)
                if rest is not None:
                    return [m] + rest
        dead.add(key)
        return None

    for cfg in configurations(sf, path[0]):
        moves = extend(cfg, 0)
        if moves is not None:
            return ConnectionMoveSequence(cfg, tuple(moves))
    return None


class PathNotPermitted(SocketError):
    def __init__(self, index: int):
        super().__init__(f"tree {index} of the path is not permitted")
        self.index = index


def shortest_permitted_path(sf: SocketForest, t1: Tree, t2: Tree,
                            max_len: int = 6) -> Optional[ConnectionMoveSequence]:
    """Breadth-first search over configurations from every start yielding ``t1``."""
    starts = list(configurations(sf, t1))
    if not starts:
        return None
    parent: Dict[Tuple, Optional[Tuple]] = {}
    by_key: Dict[Tuple, Configuration] = {}
    layer = []
    for c in starts:
        if c.connections not in parent:
            parent[c.connections] = None
            by_key[c.connections] = c
            layer.append(c)
    for depth in range(max_len + 1):
        for c in layer:
            if c.yield_tree() == t2:
                moves = []
                key = c.connections
                while parent[key] is not None:
                    prev, m = parent[key]
                    moves.append(m)
                    key = prev
                return ConnectionMoveSequence(by_key[key], tuple(reversed(moves)))
        if depth == max_len:
            break
        nxt = []
        for c in layer:
            for m, nc, _ in candidate_moves(c):
                if nc.connections not in parent:
                    parent[nc.connections] = (c.connections, m)
                    by_key[nc.connections] = nc
                    nxt.append(nc)
        layer = nxt
    return None


def forest_restricted_distance(forest: LabeledForest, t1: Tree, t2: Tree, max_len: int = 8) -> Optional[int]:
    """Shortest SPR path whose every tree has ``forest`` as a forest."""
    from .tree import spr_neighbors

    if not (forest_of(forest, t1) and forest_of(forest, t2)):
        return None
    seen = {t1}
    layer = [t1]
    for depth in range(max_len + 1):
        if t2 in seen:
            return depth
        nxt = []
        for t in layer:
            for s in spr_neighbors(t):
                if s not in seen and forest_of(forest, s):
                    seen.add(s)
                    nxt.append(s)
        layer = nxt
    return None


def is_terminal(seq: ConnectionMoveSequence, i: int) -> bool:
    """No later move touches the endpoint placed by move ``i``."""
    if not 0 <= i < len(seq.moves):
        raise IndexError(i)
    m = seq.moves[i]
    return not any(n.conn == m.conn and n.end == m.end for n in seq.moves[i + 1:])


def _check_same_panel(seq: ConnectionMoveSequence, i: int, socket: int) -> None:
    sf = seq.start.forest
    target = seq.moves[i].socket
    if socket not in sf.socket_set:
        raise SocketError(f"node {socket} is not a socket")
    if socket != target and not sf.same_component(target, socket):
        raise SocketError("replacement socket lies in a different component of F*")


def redirect_terminal(seq: ConnectionMoveSequence, i: int, socket: int) -> ConnectionMoveSequence:
    """Retarget terminal move ``i`` to another socket of the same panel."""
    if not is_terminal(seq, i):
        raise SocketError(f"move {i} is not terminal")
    _check_same_panel(seq, i, socket)
    moves = list(seq.moves)
    moves[i] = ConnectionMove(moves[i].conn, moves[i].end, socket)
    out = seq.with_moves(moves)
    out.configurations()
    return out


def redirect_nonterminal(seq: ConnectionMoveSequence, i: int, socket: int) -> ConnectionMoveSequence:
    """Retarget non-terminal move ``i``; the next move of that endpoint now
    departs from ``socket`` (moves name only their destination, so it is
    unchanged in this representation)."""
    if is_terminal(seq, i):
        raise SocketError(f"move {i} is terminal")
    _check_same_panel(seq, i, socket)
    moves = list(seq.moves)
    moves[i] = ConnectionMove(moves[i].conn, moves[i].end, socket)
    out = seq.with_moves(moves)
    out.configurations()
    return out


def hoist_singleton_break(seq: ConnectionMoveSequence, i: int, to: str = "end") -> ConnectionMoveSequence:
    """Move ``i`` relocated to the front or the end of the sequence.

    Only legal when move ``i`` keeps the socket of a single-leaf panel and
    moves the connection's other end.
    """
    if to not in ("front", "end"):
        raise ValueError("to must be 'front' or 'end'")
    configs = seq.configurations()
    m = seq.moves[i]
    _, kept = moved_endpoint(configs[i], m)
    sf = seq.start.forest
    if not sf.is_singleton(sf.panel_of[kept]):
        raise SocketError(f"move {i} does not break a connection of a singleton panel")
    rest = list(seq.moves[:i]) + list(seq.moves[i + 1:])
    moves = [m] + rest if to == "front" else rest + [m]
    out = seq.with_moves(moves)
    out.configurations()
    return out
