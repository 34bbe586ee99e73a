import io
import json

import pytest

from usprkit.cli import EXIT_BUDGET, EXIT_INVALID, EXIT_OK, EXIT_USAGE, main, parse_config, run
from usprkit.newick import parse_newick

A = "((a1,a2),1,(2,(3,(4,(5,(b1,b2))))));"
B = "((a1,b1),1,(2,(3,(4,(5,(a2,b2))))));"


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(parse_config(list(argv)), out, err)
    return code, out.getvalue(), err.getvalue()


def test_distance_text_and_json():
    assert call("distance", "((1,2),(3,4));", "((1,3),(2,4));")[:2] == (EXIT_OK, "1\n")
    code, out, _ = call("distance", A, B, "--json", "--witness")
    data = json.loads(out)
    assert code == EXIT_OK
    assert data["distance"] == 2 and data["reduced_leaf_counts"] == [7, 7]
    assert len(data["witness"]) == 2


def test_oracle_and_unreduced_agree():
    a, b = "(1,2,(3,(4,(5,6))));", "((1,4),(2,5),(3,6));"
    d = [call("distance", a, b, *flags)[1] for flags in ([], ["--oracle"], ["--no-reduce"])]
    assert len(set(d)) == 1


def test_trees_from_file(tmp_path):
    f = tmp_path / "pair.nwk"
    f.write_text(A + "\n" + B + "\n")
    assert call("distance", str(f))[1] == "2\n"


def test_reduce_outputs_kernel_and_log():
    code, out, _ = call("reduce", A, B)
    lines = out.splitlines()
    assert code == EXIT_OK and len(lines) == 3
    assert parse_newick(lines[0]).n_leaves == 7
    assert json.loads(lines[2])[0]["rule"] == "chain"
    data = json.loads(call("reduce", A, B, "--json")[1])
    assert set(data) == {"reduced", "label_log"}


def test_maf_neighbors_enumerate_diameter():
    out = call("maf", A, B)[1].splitlines()
    assert out[0] == "3" and len(out) == 4
    assert len(call("neighbors", "((1,2),(3,4));")[1].splitlines()) == 2
    assert len(call("enumerate", "5")[1].splitlines()) == 15
    one = call("enumerate", "6", "--sample", "3", "--seed", "4")[1]
    assert one == call("enumerate", "6", "--sample", "3", "--seed", "4")[1]
    data = json.loads(call("diameter", "5", "--json")[1])
    assert data["diameter"] == 2 and data["histogram"] == {"1": 90, "2": 15}


def test_verify_path_round_trip(tmp_path):
    data = json.loads(call("distance", A, B, "--json", "--witness")[1])
    f = tmp_path / "w.json"
    f.write_text(json.dumps(data))
    assert call("verify-path", A, B, str(f))[0] == EXIT_OK
    code, _, err = call("verify-path", A, A, str(f))
    assert code == EXIT_INVALID and err


def test_verify_path_chain_flags(tmp_path):
    # an optimal path that breaks pendant p1 of the chain c1,c2,c3
    t1 = "(1,2,(((((3,4),c1),c2),c3),5));"
    t2 = "(1,2,(((((3,4),c3),c2),c1),5));"
    f = tmp_path / "m.json"
    f.write_text(json.dumps([[["1", "2", "5"], ["c2"]], [["c1"], ["3", "4", "c2", "c3"]]]))
    code, out, _ = call("verify-path", t1, t2, str(f), "--chain", "c1,c2,c3", "--json")
    assert code == EXIT_OK
    data = json.loads(out)
    assert data["case"] == 3 and data["broken"] == ["p1"]
    code, out, _ = call("verify-path", t1, t2, str(f), "--chain", "c1,c2,c3", "--rewrite", "--json")
    rewritten = json.loads(out)["rewritten"]
    assert code == EXIT_OK and len(rewritten) == 2
    f.write_text(json.dumps(rewritten))
    code, out, _ = call("verify-path", t1, t2, str(f), "--chain", "c1,c2,c3", "--json")
    assert json.loads(out)["case"] == 1


def test_exit_codes():
    assert call("distance", "((1,2),(3,4);", "((1,3),(2,4));")[0] == EXIT_USAGE
    assert call("distance", "((1,2),(3,4));", "((1,3),(2,5));")[0] == EXIT_USAGE
    assert call("distance", A, B, "--max-d", "1")[0] == EXIT_BUDGET
    assert main(["frobnicate"]) == EXIT_USAGE
    assert main(["distance", A, B, "--node-cap", "0"]) == EXIT_USAGE


def test_main_prints(capsys):
    assert main(["distance", A, B]) == EXIT_OK
    assert capsys.readouterr().out == "2\n"


@pytest.mark.parametrize("n", ["3", "10"])
def test_diameter_range(n):
    assert main(["diameter", n]) == EXIT_USAGE
