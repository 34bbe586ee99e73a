import random
from itertools import combinations

import pytest
from _helpers import labels, optimal_paths, plant_chain, tree_path

from usprkit.forest import LabeledForest, is_agreement_forest, maf_exact
from usprkit.newick import parse_newick as P
from usprkit.rewrite import (
    RewriteError,
    TreePath,
    chain_intact,
    chain_preserving,
    chain_preserving_rewrite,
    classify_chain_case,
)
from usprkit.saf import (
    Configuration,
    ConnectionMove,
    ConnectionMoveSequence,
    CycleError,
    PanelSpec,
    PathNotPermitted,
    SocketError,
    SocketForest,
    apply_connection_move,
    forest_restricted_distance,
    hoist_singleton_break,
    is_terminal,
    permits_path,
    permits_tree,
    redirect_nonterminal,
    redirect_terminal,
    saf_from_af,
    shortest_permitted_path,
    underlying_forest,
)
from usprkit.tree import apply_spr, enumerate_trees, random_tree, spr_moves

Q1, Q2 = P("((1,2),(3,4));"), P("((1,3),(2,4));")


def quartet_saf():
    f = LabeledForest.from_blocks(Q1, [{"3"}, {"1", "2", "4"}])
    return saf_from_af(Q1, Q2, f), f


def test_single_panel_without_sockets():
    sf = SocketForest([PanelSpec(Q1)])
    assert underlying_forest(sf).components == (Q1,)
    cfg = permits_tree(sf, Q1)
    assert cfg is not None and cfg.connections == ()
    assert permits_tree(sf, Q2) is None


def test_underlying_forest_drops_sockets():
    f = LabeledForest.from_blocks(Q1, [{"1"}, {"2"}, {"3", "4"}])
    sf = SocketForest([PanelSpec(c) for c in f.components])
    assert len(underlying_forest(sf)) == 3
    assert len(sf.sockets) == 2


def test_yield_errors():
    sf, _ = quartet_saf()
    s = sf.sockets
    with pytest.raises(SocketError):
        Configuration(sf, ((0, s[0], s[0]),)).yield_tree()
    with pytest.raises(SocketError):
        Configuration(sf, ((0, s[0], max(sf.adj) + 5),)).yield_tree()
    with pytest.raises(CycleError):
        Configuration(sf, ()).yield_tree()


def test_saf_from_maf_permits_both_trees_n6():
    trees = list(enumerate_trees(labels(6)))
    rng = random.Random(1)
    for _ in range(12):
        a, b = rng.sample(trees, 2)
        f = maf_exact(a, b)
        sf = saf_from_af(a, b, f)
        assert permits_tree(sf, a) is not None
        assert permits_tree(sf, b) is not None
        g = underlying_forest(sf)
        assert sorted(map(sorted, (c.labels for c in g.components))) == \
            sorted(map(sorted, (c.labels for c in f.components)))
        assert is_agreement_forest(g, a, b)


def test_quartet_path_is_one_move():
    sf, _ = quartet_saf()
    assert len(permits_path(sf, [Q1])) == 0
    seq = permits_path(sf, [Q1, Q2])
    assert len(seq) == 1
    assert seq.trees() == [Q1, Q2]


def test_path_not_permitted_reports_index():
    sf, _ = quartet_saf()
    assert permits_tree(sf, Q1) is not None
    far = next(t for t in enumerate_trees(labels(4)) if permits_tree(sf, t) is None)
    with pytest.raises(PathNotPermitted) as exc:
        permits_path(sf, [Q1, Q2, far])
    assert exc.value.index == 2


def test_connection_move_involution_and_errors():
    sf, _ = quartet_saf()
    seq = permits_path(sf, [Q1, Q2])
    c0 = seq.start
    m = seq.moves[0]
    c1 = apply_connection_move(c0, m)
    old = c0.endpoints(m.conn)[m.end]
    assert apply_connection_move(c1, ConnectionMove(m.conn, m.end, old)) == c0
    other = c1.endpoints(m.conn)[1 - m.end]
    with pytest.raises(SocketError):
        apply_connection_move(c1, ConnectionMove(m.conn, m.end, other))
    with pytest.raises(SocketError):
        apply_connection_move(c1, ConnectionMove(99, 0, old))


def test_optimal_permitted_path_six_leaf_pairs():
    trees = list(enumerate_trees(labels(6)))
    rng = random.Random(7)
    for _ in range(8):
        a, b = rng.sample(trees, 2)
        f = maf_exact(a, b)
        d = forest_restricted_distance(f, a, b)
        seq = shortest_permitted_path(saf_from_af(a, b, f), a, b, max_len=d)
        assert seq is not None and seq.final_tree() == b
        assert len(seq) >= d


def _random_sequence(rng):
    trees = list(enumerate_trees(labels(6)))
    while True:
        a, b = rng.sample(trees, 2)
        f = maf_exact(a, b)
        seq = shortest_permitted_path(saf_from_af(a, b, f), a, b)
        if seq is not None and len(seq) >= 2:
            return seq


def test_is_terminal_matches_scan():
    rng = random.Random(3)
    for _ in range(5):
        seq = _random_sequence(rng)
        assert is_terminal(seq, len(seq) - 1)
        for i, m in enumerate(seq.moves):
            later = [(n.conn, n.end) for n in seq.moves[i + 1:]]
            assert is_terminal(seq, i) == ((m.conn, m.end) not in later)


def test_redirect_terminal():
    sf, _ = quartet_saf()
    seq = permits_path(sf, [Q1, Q2])
    assert redirect_terminal(seq, 0, seq.moves[0].socket) == seq
    target = seq.moves[0].socket
    panel = sf.panel_of[target]
    for s in sf.panel_sockets(panel):
        try:
            out = redirect_terminal(seq, 0, s)
        except SocketError:
            continue
        assert out.final_tree().labels == Q2.labels
    away = next(s for s in sf.sockets if sf.panel_of[s] != panel)
    with pytest.raises(SocketError):
        redirect_terminal(seq, 0, away)


def test_redirect_preconditions():
    rng = random.Random(3)
    seq = _random_sequence(rng)
    last = len(seq) - 1
    with pytest.raises(SocketError):
        redirect_nonterminal(seq, last, seq.moves[last].socket)
    nonterm = [i for i in range(len(seq)) if not is_terminal(seq, i)]
    if nonterm:
        with pytest.raises(SocketError):
            redirect_terminal(seq, nonterm[0], seq.moves[nonterm[0]].socket)


def test_hoist_singleton_break():
    sf, _ = quartet_saf()
    seq = permits_path(sf, [Q1, Q2])
    with pytest.raises(ValueError):
        hoist_singleton_break(seq, 0, to="middle")
    try:
        out = hoist_singleton_break(seq, 0, to="front")
    except SocketError:
        return
    assert out == seq
    assert hoist_singleton_break(out, 0, to="end") == seq


def test_empty_sequence_replays():
    sf, _ = quartet_saf()
    seq = ConnectionMoveSequence(permits_tree(sf, Q1))
    assert seq.trees() == [Q1]


# -- chain cases and the rewrite ---------------------------------------------------

CHAIN = ("c1", "c2", "c3")
BASE = P("((x1,x2),c1,(c2,(c3,(x3,x4))));")


def _move_leaf(t, leaf, onto):
    u = t.leaf(leaf)
    v = t.neighbors(u)[0]
    for m in spr_moves(t):
        if m.cut == (u, v):
            s = apply_spr(t, m)
            if s.neighbors(s.leaf(leaf))[0] in s.neighbors(s.leaf(onto)):
                return m
    raise AssertionError("no such move")


def test_chain_intact_and_case_one():
    assert chain_intact(BASE, CHAIN)
    assert not chain_intact(P("((x1,c2),c1,(x2,(c3,(x3,x4))));"), CHAIN)
    m = _move_leaf(BASE, "x1", "x4")
    assert chain_preserving(BASE, m, CHAIN)
    path = TreePath(BASE, (m,))
    assert classify_chain_case(path, CHAIN).case == 1


def test_case_two_when_both_ends_move():
    m1 = _move_leaf(BASE, "c1", "x1")
    s = apply_spr(BASE, m1)
    m2 = _move_leaf(s, "c3", "x4")
    info = classify_chain_case(TreePath(BASE, (m1, m2)), CHAIN)
    assert info.case == 2


def test_case_three_single_pendant():
    m = _move_leaf(BASE, "c2", "x1")
    info = classify_chain_case(TreePath(BASE, (m,)), CHAIN)
    assert info.case == 3 and info.index == 2


def test_rewrite_rejects_case_one():
    m = _move_leaf(BASE, "x1", "x4")
    path = TreePath(BASE, (m,))
    with pytest.raises(RewriteError):
        chain_preserving_rewrite(BASE, apply_spr(BASE, m), path, CHAIN)


def _case_three_instance(seed):
    rng = random.Random(seed)
    rest = labels(5)
    while True:
        t1 = plant_chain(random_tree(rest, rng), CHAIN, rng)
        t2 = plant_chain(random_tree(rest, rng), CHAIN, rng)
        from usprkit.distance import uspr_exact
        d = uspr_exact(t1, t2, reduce=False).distance
        if not 1 <= d <= 2:
            continue
        for keys in optimal_paths(t1, t2, d):
            path = tree_path(t1, keys)
            if classify_chain_case(path, CHAIN).case in (3, 4):
                return t1, t2, path


def test_rewrite_produces_case_one_path():
    for seed in range(3):
        t1, t2, path = _case_three_instance(seed)
        out = chain_preserving_rewrite(t1, t2, path, CHAIN)
        assert len(out.path) == len(path)
        assert out.path.final_tree() == t2
        assert all(chain_preserving(s, m, CHAIN)
                   for s, m in zip(out.path.trees(), out.path.moves))
        assert classify_chain_case(out.path, CHAIN).case == 1


def test_rewrite_rejects_wrong_endpoint():
    t1, t2, path = _case_three_instance(0)
    with pytest.raises(RewriteError):
        chain_preserving_rewrite(t1, t1, path, CHAIN)
    assert all(a != b for a, b in combinations(path.trees(), 2))


def test_rewrite_rejects_target_without_chain():
    # c1 sits between c2 and c3 in the target
    t2 = P("((x1,c2),c1,(x2,(c3,(x3,x4))));")
    m = _move_leaf(BASE, "c2", "x1")
    with pytest.raises(RewriteError, match="not intact in t2"):
        chain_preserving_rewrite(BASE, t2, TreePath(BASE, (m,)), CHAIN)
