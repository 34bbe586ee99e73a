import random
from itertools import combinations, product

import pytest
from _helpers import labels

from usprkit.distance import (
    BudgetExceeded,
    CapExceeded,
    distance_histogram,
    max_distance_bound,
    oracle_eccentricity,
    replay,
    shape_key,
    uspr_exact,
    uspr_oracle,
)
from usprkit.forest import (
    LabeledForest,
    forest_of,
    is_agreement_forest,
    maf_exact,
    tbr_at_most,
    tbr_distance,
)
from usprkit.newick import parse_newick as P
from usprkit.reduction import kernelize
from usprkit.tree import TreeError, enumerate_trees, random_tree

Q1, Q2 = P("((1,2),(3,4));"), P("((1,3),(2,4));")


def test_oracle_examples():
    assert uspr_oracle(Q1, Q1).distance == 0
    assert uspr_oracle(Q1, Q2).distance == 1
    # frozen regression: one leaf travels to the other end of the caterpillar
    a, b = P("(1,2,(3,(4,(5,6))));"), P("(1,6,(5,(4,(3,2))));")
    assert uspr_oracle(a, b).distance == 1


def test_oracle_guards():
    with pytest.raises(TreeError):
        uspr_oracle(Q1, P("((1,2),(3,5));"))
    big = random_tree(labels(9), random.Random(0))
    with pytest.raises(TreeError):
        uspr_oracle(big, big)
    a, b = P("(1,2,(3,(4,(5,6))));"), P("((1,4),(2,5),(3,6));")
    with pytest.raises(CapExceeded):
        uspr_oracle(a, b, cap=1)


def test_witness_replays():
    rng = random.Random(2)
    for _ in range(15):
        a, b = random_tree(labels(7), rng), random_tree(labels(7), rng)
        for res in (uspr_oracle(a, b, witness=True), uspr_exact(a, b, witness=True)):
            assert len(res.witness_path) == res.distance
            assert replay(a, res.witness_path) == b


def test_exact_matches_oracle_and_is_symmetric():
    rng = random.Random(4)
    for _ in range(40):
        a, b = random_tree(labels(7), rng), random_tree(labels(7), rng)
        d = uspr_oracle(a, b).distance
        assert uspr_exact(a, b).distance == d
        assert uspr_exact(b, a).distance == d
        assert uspr_exact(a, b, reduce=False).distance == d


def test_kernel_equivalence_sampled():
    rng = random.Random(6)
    for _ in range(20):
        a, b = random_tree(labels(8), rng), random_tree(labels(8), rng)
        pair = kernelize(a, b)
        assert uspr_exact(a, b).distance == uspr_exact(pair.t1, pair.t2, reduce=False).distance


def test_triangle_inequality_n6():
    trees = list(enumerate_trees(labels(6)))
    rng = random.Random(8)
    for _ in range(60):
        a, b, c = rng.sample(trees, 3)
        d = lambda x, y: uspr_oracle(x, y).distance  # noqa: E731
        assert d(a, c) <= d(a, b) + d(b, c)


def test_budgets_reported_distinctly():
    rng = random.Random(1)
    a, b = random_tree(labels(9), rng), random_tree(labels(9), rng)
    with pytest.raises(BudgetExceeded) as exc:
        uspr_exact(a, b, reduce=False, node_cap=1)
    assert exc.value.lower_bound >= 1
    with pytest.raises(BudgetExceeded):
        uspr_exact(a, b, max_d=1)


def test_max_distance_bound():
    assert [max_distance_bound(n) for n in (3, 5, 6, 20)] == [0, 2, 3, 16]
    with pytest.raises(ValueError):
        max_distance_bound(2)


def test_histogram_matches_all_pairs_n5():
    trees = list(enumerate_trees(labels(5)))
    direct = {}
    for a, b in combinations(trees, 2):
        d = uspr_oracle(a, b).distance
        direct[d] = direct.get(d, 0) + 1
    assert dict(distance_histogram(5)) == direct
    assert sum(direct.values()) == 105


def test_eccentricity_and_shape():
    t = P("(1,2,(3,(4,5)));")
    hist = oracle_eccentricity(t)
    assert sum(hist.values()) == 15 and hist[1] == 12
    assert shape_key(P("((1,2),(3,(4,5)));")) == shape_key(P("((5,3),(1,(4,2)));"))
    assert shape_key(P("(1,2,(3,(4,(5,6))));")) != shape_key(P("((1,2),(3,4),(5,6));"))


# -- agreement forests ----------------------------------------------------------


def test_agreement_forest_examples():
    t = Q1
    assert is_agreement_forest(LabeledForest.from_blocks(t, [t.labels]), t, t)
    f = LabeledForest.from_blocks(Q1, [{"3"}, {"1", "2", "4"}])
    assert is_agreement_forest(f, Q1, Q2)
    f = LabeledForest.from_blocks(Q1, [{"1", "2"}, {"3", "4"}])
    assert forest_of(f, Q1) and not forest_of(f, Q2)
    assert not is_agreement_forest(LabeledForest.from_blocks(Q1, [Q1.labels]), Q1, Q2)


def test_maf_examples():
    assert len(maf_exact(Q1, Q1)) == 1
    assert len(maf_exact(Q1, Q2)) == 2
    assert tbr_distance(Q1, Q2) == 1 and tbr_distance(Q1, Q1) == 0
    a = P("((a1,a2),1,(2,(3,(4,(5,(b1,b2))))));")
    b = P("((a1,b1),1,(2,(3,(4,(5,(a2,b2))))));")
    pair = kernelize(a, b)
    # frozen: the chain sits in one component of a MAF before and after reduction
    assert len(maf_exact(a, b)) == len(maf_exact(pair.t1, pair.t2)) == 3


def _partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def _brute_m(a, b):
    best = None
    for part in _partitions(sorted(a.labels)):
        if best is not None and len(part) >= best:
            continue
        if is_agreement_forest(LabeledForest.from_blocks(a, part), a, b):
            best = len(part)
    return best


def test_maf_matches_brute_force_n6_sample():
    rng = random.Random(12)
    trees = list(enumerate_trees(labels(6)))
    for _ in range(25):
        a, b = rng.sample(trees, 2)
        f = maf_exact(a, b)
        assert is_agreement_forest(f, a, b)
        assert len(f) == _brute_m(a, b)


def test_tbr_at_most_and_lower_bound():
    rng = random.Random(3)
    for _ in range(20):
        a, b = random_tree(labels(7), rng), random_tree(labels(7), rng)
        t = tbr_distance(a, b)
        assert tbr_at_most(a, b, t) and not tbr_at_most(a, b, t - 1)
        assert t <= uspr_oracle(a, b).distance


def test_maf_guard():
    big = random_tree([f"x{i}" for i in range(12)], random.Random(0))
    with pytest.raises(TreeError):
        maf_exact(big, big, max_leaves=10)


@pytest.mark.parametrize("n", [4, 5])
def test_agreement_forest_against_edge_deletions(n):
    # a partition is an AF of one tree iff deleting some edge set yields it
    t = random_tree(labels(n), random.Random(n))
    edges = t.edges()
    yielded = set()
    for keep in product([0, 1], repeat=len(edges)):
        adj = {v: set() for v in t.nodes()}
        for (x, y), k in zip(map(tuple, edges), keep):
            if k:
                adj[x].add(y)
                adj[y].add(x)
        seen, blocks = set(), []
        for v in t.nodes():
            if v in seen:
                continue
            stack, comp = [v], set()
            seen.add(v)
            while stack:
                x = stack.pop()
                if t.is_leaf(x):
                    comp.add(t.label(x))
                for w in adj[x]:
                    if w not in seen:
                        seen.add(w)
                        stack.append(w)
            if comp:
                blocks.append(frozenset(comp))
        yielded.add(frozenset(blocks))
    for part in _partitions(sorted(t.labels)):
        key = frozenset(frozenset(b) for b in part)
        assert forest_of(LabeledForest.from_blocks(t, part), t) == (key in yielded)
