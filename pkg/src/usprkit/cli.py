"""Command-line front end.

Human-readable text goes to standard output, JSON only under ``--json`` and
diagnostics to standard error.  Exit codes: 0 success, 1 parse or usage
error, 2 verification failure, 3 budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, TextIO

from .distance import (
    BudgetExceeded,
    CapExceeded,
    distance_histogram,
    max_distance_bound,
    uspr_exact,
    uspr_oracle,
)
from .forest import maf_exact
from .newick import NewickError, read_trees, write_newick
from .reduction import kernelize
from .rewrite import RewriteError, TreePath, chain_preserving_rewrite, classify_chain_case
from .tree import Tree, TreeError, apply_spr, decode_move, encode_move, enumerate_trees, spr_neighbors

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_BUDGET = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


@dataclass
class RunConfig:
    subcommand: str
    inputs: List[str] = field(default_factory=list)
    n: Optional[int] = None
    max_d: Optional[int] = None
    no_reduce: bool = False
    oracle: bool = False
    witness: bool = False
    json: bool = False
    seed: int = 0
    node_cap: Optional[int] = None
    time_cap: Optional[float] = None
    threads: int = 1
    chain: Optional[List[str]] = None
    rewrite: bool = False
    sample: Optional[int] = None

    def __post_init__(self):
        for name in ("node_cap", "time_cap", "n", "sample"):
            val = getattr(self, name)
            if val is not None and val <= 0:
                raise UsageError(f"--{name.replace('_', '-')} must be positive")
        if self.max_d is not None and self.max_d < 0:
            raise UsageError("--max-d must be non-negative")
        if self.threads < 1:
            raise UsageError("--threads must be positive")


def _int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--seed", type=_int, default=0)
    common.add_argument("--threads", type=_int, default=1,
                        help="accepted for interface stability; searches run in one thread")

    p = _Parser(prog="usprkit", description="Unrooted SPR distance toolkit.")
    sub = p.add_subparsers(dest="subcommand", parser_class=_Parser)

    d = sub.add_parser("distance", parents=[common], help="exact uSPR distance of two trees")
    d.add_argument("trees", nargs="+", help="Newick text or files (two trees in total)")
    d.add_argument("--oracle", action="store_true", help="plain breadth-first search")
    d.add_argument("--no-reduce", action="store_true", help="skip kernelization")
    d.add_argument("--max-d", type=_int)
    d.add_argument("--witness", action="store_true", help="also print a shortest move sequence")
    d.add_argument("--node-cap", type=_int)
    d.add_argument("--time-cap", type=float)

    r = sub.add_parser("reduce", parents=[common], help="kernelize a pair of trees")
    r.add_argument("trees", nargs="+")

    m = sub.add_parser("maf", parents=[common], help="maximum agreement forest")
    m.add_argument("trees", nargs="+")

    nb = sub.add_parser("neighbors", parents=[common], help="SPR neighbourhood of a tree")
    nb.add_argument("trees", nargs="+")

    dm = sub.add_parser("diameter", parents=[common], help="distance histogram over all n-leaf trees")
    dm.add_argument("n", type=_int)

    en = sub.add_parser("enumerate", parents=[common], help="list every tree on leaves 1..n")
    en.add_argument("n", type=_int)
    en.add_argument("--sample", type=_int, help="print a seeded random sample of this size")

    vp = sub.add_parser("verify-path", parents=[common], help="check a move sequence")
    vp.add_argument("trees", nargs=2, help="start and target tree")
    vp.add_argument("moves", help="JSON file (or text) with a move list or a distance --json object")
    vp.add_argument("--chain", help="three comma-separated chain leaves, in chain order")
    vp.add_argument("--rewrite", action="store_true", help="rewrite the path to keep the chain intact")
    return p


def parse_config(argv: Sequence[str]) -> RunConfig:
    ns = build_parser().parse_args(list(argv))
    if ns.subcommand is None:
        raise UsageError("a subcommand is required")
    cfg = RunConfig(
        subcommand=ns.subcommand,
        inputs=list(getattr(ns, "trees", []) or []),
        n=getattr(ns, "n", None),
        max_d=getattr(ns, "max_d", None),
        no_reduce=getattr(ns, "no_reduce", False),
        oracle=getattr(ns, "oracle", False),
        witness=getattr(ns, "witness", False),
        json=ns.json,
        seed=ns.seed,
        node_cap=getattr(ns, "node_cap", None),
        time_cap=getattr(ns, "time_cap", None),
        threads=ns.threads,
        chain=ns.chain.split(",") if getattr(ns, "chain", None) else None,
        rewrite=getattr(ns, "rewrite", False),
        sample=getattr(ns, "sample", None),
    )
    if cfg.subcommand == "verify-path":
        cfg.inputs.append(ns.moves)
    if cfg.rewrite and not cfg.chain:
        raise UsageError("--rewrite needs --chain")
    if cfg.chain is not None and len(cfg.chain) != 3:
        raise UsageError("--chain takes exactly three leaves")
    return cfg


def _text(arg: str) -> str:
    if os.path.isfile(arg):
        with open(arg, encoding="utf-8") as fh:
            return fh.read()
    return arg


def _trees(args: Sequence[str], count: int) -> List[Tree]:
    out: List[Tree] = []
    for a in args:
        out += read_trees(_text(a))
    if len(out) != count:
        raise UsageError(f"expected {count} tree(s), got {len(out)}")
    if count == 2 and out[0].labels != out[1].labels:
        raise UsageError("trees have different label sets")
    return out


def _emit(out: TextIO, obj) -> None:
    out.write(json.dumps(obj, sort_keys=True) + "\n")


def _encode_path(t: Tree, moves) -> List[List[List[str]]]:
    enc = []
    for m in moves:
        enc.append([*encode_move(t, m)])
        t = apply_spr(t, m)
    return enc


# -- subcommands ----------------------------------------------------------------


def _distance(cfg: RunConfig, out: TextIO) -> int:
    t1, t2 = _trees(cfg.inputs, 2)
    if cfg.oracle:
        res = uspr_oracle(t1, t2, cap=cfg.max_d, max_leaves=10, witness=cfg.witness)
    else:
        res = uspr_exact(t1, t2, reduce=not cfg.no_reduce, witness=cfg.witness,
                         node_cap=cfg.node_cap, time_cap=cfg.time_cap, max_d=cfg.max_d)
    witness = _encode_path(t1, res.witness_path) if res.witness_path is not None else None
    if cfg.json:
        _emit(out, {
            "distance": res.distance,
            "lower_bound": res.lower_bound_used,
            "reduced_leaf_counts": [res.reduced_leaves or t1.n_leaves] * 2,
            "nodes_expanded": res.nodes_expanded,
            "witness": witness,
        })
    else:
        out.write(f"{res.distance}\n")
        for pruned, regraft in witness or []:
            out.write(f"prune {{{','.join(pruned)}}} regraft {{{','.join(regraft)}}}\n")
    return EXIT_OK


def _reduce(cfg: RunConfig, out: TextIO) -> int:
    t1, t2 = _trees(cfg.inputs, 2)
    pair = kernelize(t1, t2)
    a, b = write_newick(pair.t1), write_newick(pair.t2)
    if cfg.json:
        _emit(out, {"reduced": [a, b], "label_log": pair.label_log})
    else:
        out.write(f"{a}\n{b}\n")
        _emit(out, pair.label_log)
    return EXIT_OK


def _maf(cfg: RunConfig, out: TextIO) -> int:
    t1, t2 = _trees(cfg.inputs, 2)
    forest = maf_exact(t1, t2)
    blocks = [sorted(b) for b in forest.blocks]
    if cfg.json:
        _emit(out, {"size": len(forest), "tbr_distance": len(forest) - 1, "blocks": blocks})
    else:
        out.write(f"{len(forest)}\n")
        for c in forest.components:
            out.write(f"{write_newick(c) if c.n_leaves > 1 else next(iter(c.labels))}\n")
    return EXIT_OK


def _neighbors(cfg: RunConfig, out: TextIO) -> int:
    (t,) = _trees(cfg.inputs, 1)
    texts = sorted(write_newick(s) for s in spr_neighbors(t))
    if cfg.json:
        _emit(out, {"count": len(texts), "neighbors": texts})
    else:
        out.write("".join(f"{x}\n" for x in texts))
    return EXIT_OK


def _diameter(cfg: RunConfig, out: TextIO) -> int:
    n = cfg.n
    if n < 4 or n > 9:
        raise UsageError("diameter supports 4 <= n <= 9")
    hist = distance_histogram(n, [str(i) for i in range(1, n + 1)])
    diam = max(hist)
    if cfg.json:
        _emit(out, {"n": n, "diameter": diam, "bound": max_distance_bound(n),
                    "histogram": {str(d): c for d, c in sorted(hist.items())}})
    else:
        out.write(f"{diam}\n")
        for d, c in sorted(hist.items()):
            out.write(f"{d}\t{c}\n")
    return EXIT_OK


def _enumerate(cfg: RunConfig, out: TextIO) -> int:
    labels = [str(i) for i in range(1, cfg.n + 1)]
    if cfg.n < 3:
        raise UsageError("enumerate needs n >= 3")
    texts = [write_newick(t) for t in enumerate_trees(labels)]
    if cfg.sample is not None:
        rng = random.Random(cfg.seed)
        texts = sorted(rng.sample(texts, min(cfg.sample, len(texts))))
    if cfg.json:
        _emit(out, {"n": cfg.n, "count": len(texts), "trees": texts})
    else:
        out.write("".join(f"{x}\n" for x in texts))
    return EXIT_OK


def _load_moves(arg: str):
    try:
        data = json.loads(_text(arg))
    except json.JSONDecodeError as exc:
        raise UsageError(f"move list is not valid JSON: {exc}") from None
    if isinstance(data, dict):
        data = data.get("witness")
    if not isinstance(data, list):
        raise UsageError("expected a list of [pruned, regraft] pairs")
    return data


def _verify(cfg: RunConfig, out: TextIO, err: TextIO) -> int:
    t1, t2 = _trees(cfg.inputs[:2], 2)
    enc = _load_moves(cfg.inputs[2])
    cur, moves = t1, []
    for i, item in enumerate(enc):
        try:
            pruned, regraft = item
            m = decode_move(cur, pruned, regraft)
            cur = apply_spr(cur, m)
        except (TreeError, TypeError, ValueError) as exc:
            return _invalid(cfg, out, err, i, str(exc))
        moves.append(m)
    if cur != t2:
        return _invalid(cfg, out, err, len(enc), "path does not end at the target tree")
    report = {"valid": True, "length": len(moves)}
    if cfg.chain:
        seq = TreePath(t1, tuple(moves))
        try:
            info = classify_chain_case(seq, cfg.chain)
        except (TreeError, RewriteError) as exc:
            raise UsageError(str(exc)) from None
        report["case"] = info.case
        report["broken"] = sorted(info.broken)
        if cfg.rewrite:
            try:
                rw = chain_preserving_rewrite(t1, t2, seq, cfg.chain)
            except RewriteError as exc:
                err.write(f"rewrite failed: {exc}\n")
                return EXIT_INVALID
            report["rewritten"] = _encode_path(t1, rw.path.moves)
    if cfg.json:
        _emit(out, report)
    else:
        out.write(f"valid ({len(moves)} moves)\n")
        if "case" in report:
            out.write(f"case {report['case']}; broken: {' '.join(report['broken']) or 'none'}\n")
        for pruned, regraft in report.get("rewritten", []):
            out.write(f"prune {{{','.join(pruned)}}} regraft {{{','.join(regraft)}}}\n")
    return EXIT_OK


def _invalid(cfg: RunConfig, out: TextIO, err: TextIO, index: int, why: str) -> int:
    if cfg.json:
        _emit(out, {"valid": False, "index": index, "reason": why})
    else:
        out.write(f"invalid at move {index}\n")
    err.write(f"move {index}: {why}\n")
    return EXIT_INVALID


_COMMANDS = {
    "distance": _distance,
    "reduce": _reduce,
    "maf": _maf,
    "neighbors": _neighbors,
    "diameter": _diameter,
    "enumerate": _enumerate,
}


def run(cfg: RunConfig, out: Optional[TextIO] = None, err: Optional[TextIO] = None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        if cfg.subcommand == "verify-path":
            return _verify(cfg, out, err)
        return _COMMANDS[cfg.subcommand](cfg, out)
    except (UsageError, NewickError, TreeError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (BudgetExceeded, CapExceeded) as exc:
        err.write(f"budget exceeded: {exc}\n")
        return EXIT_BUDGET


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
