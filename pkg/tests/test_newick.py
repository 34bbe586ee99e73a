import pytest

from usprkit.newick import NewickError, parse_newick, read_trees, write_newick
from usprkit.tree import enumerate_trees


def test_rooted_and_unrooted_inputs():
    t = parse_newick("((1,2),(3,4));")
    assert t.n_leaves == 4
    assert write_newick(t) == "(1,2,(3,4));"
    cat = parse_newick("(1,2,(3,(4,5)));")
    assert write_newick(cat) == "(1,2,(3,(4,5)));"


def test_lengths_and_internal_labels_ignored():
    a = parse_newick("((1:0.5,2:1e-3)x:2,(3,4)y);")
    assert a == parse_newick("((1,2),(3,4));")


@pytest.mark.parametrize("text,needle", [
    ("((1,2),(1,3));", "duplicate"),
    ("((1,2),(3,4);", "position"),
    ("(1,2);", "leaves"),
    ("((1,2),(3,4))", "';'"),
])
def test_errors(text, needle):
    with pytest.raises(NewickError) as exc:
        parse_newick(text)
    assert needle in str(exc.value)


def test_small_trees_in_lenient_mode():
    t = parse_newick("(1,2);", strict=False)
    assert t.n_leaves == 2


def test_quoted_labels_round_trip():
    t = parse_newick("(('C#1:1',a),b,('it''s',c));")
    assert "C#1:1" in t.labels and "it's" in t.labels
    assert parse_newick(write_newick(t)) == t


def test_round_trip_exhaustive():
    for n in (4, 5, 6, 7):
        for t in enumerate_trees([str(i) for i in range(1, n + 1)]):
            text = write_newick(t)
            back = parse_newick(text)
            assert back == t
            assert write_newick(back) == text


def test_read_trees_splits_on_semicolons():
    trees = read_trees("((1,2),(3,4));\n((1,3),(2,4));\n")
    assert len(trees) == 2 and trees[0] != trees[1]
    with pytest.raises(NewickError):
        read_trees("((1,2),(3,4)); (1,2")
