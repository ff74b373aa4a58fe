"""Command-line interface.

Exit codes: 0 for yes / success, 1 for no, 2 for any error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .generate import DEFAULT_SEED, generate
from .kernel import LiftError, kernelize, lift_solution
from .networks import NetworkError, displays, reticulation_number
from .newick import ParseError, load_network, load_trees, serialize_network, write_trees
from .solver import GENERATOR_CEILING, CapacityError, solve_xp
from .trees import Instance, TreeError

EXIT_YES, EXIT_NO, EXIT_ERROR = 0, 1, 2


@dataclass
class RunConfig:
    command: str
    k: int = 1
    mode: str = "trees"
    input: Path | None = None
    output: Path | None = None
    seed: int = DEFAULT_SEED
    jobs: int = 1


def default_jobs() -> int:
    env = os.environ.get("HYBKER_JOBS")
    if env:
        return max(1, int(env))
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:  # pragma: no cover - non-Linux
        return os.cpu_count() or 1


def _err(msg: str) -> None:
    print(f"hybker: {msg}", file=sys.stderr)


def _write(path: Path | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text, encoding="utf-8")


def _instance(path: Path, k: int) -> Instance:
    return Instance(tuple(load_trees(path)), k)


def cmd_kernelize(args: argparse.Namespace) -> int:
    if args.k < 1:
        _err("kernelize needs -k >= 1")
        return EXIT_ERROR
    inst = _instance(args.trees, args.k)
    res = kernelize(inst, args.mode)
    _write(args.output, write_trees(res.instance))
    if args.trace is not None:
        args.trace.write_text(res.trace.dumps() + "\n", encoding="utf-8")
    summary = {
        "n_before": inst.n,
        "n_after": res.instance.n,
        "bound": res.bound,
        "verdict": res.verdict,
        "reductions": len(res.trace),
    }
    print(json.dumps(summary), file=sys.stdout if args.output is not None else sys.stderr)
    return EXIT_NO if res.is_no else EXIT_YES


def cmd_solve(args: argparse.Namespace) -> int:
    if args.k < 0:
        _err("-k must be non-negative")
        return EXIT_ERROR
    if args.k > GENERATOR_CEILING:
        _err(f"capacity: the solver supports k <= {GENERATOR_CEILING}")
        return EXIT_ERROR
    inst = _instance(args.trees, args.k)
    mode = "none" if args.no_kernel or args.k == 0 else args.mode
    log = (lambda msg: print(msg, file=sys.stderr)) if not args.quiet else None
    kres = None
    core = inst
    if mode != "none":
        kres = kernelize(inst, mode)
        if log:
            log(f"kernel: {inst.n} -> {kres.instance.n} leaves ({len(kres.trace)} reductions)")
        if kres.is_no:
            return _report(args, None, inst, kres, lifted=False)
        core = kres.instance
    result = solve_xp(core, args.k, jobs=args.jobs, log=log)
    if result is None:
        return _report(args, None, inst, kres, lifted=False)
    witness, lifted = result.witness, True
    if kres is not None and kres.trace.records:
        try:
            witness = lift_solution(inst, kres, result.witness)
        except (LiftError, NetworkError) as exc:
            _err(f"warning: lifting failed ({exc}); writing the kernel-level witness")
            lifted = False
    if args.output is not None:
        args.output.write_text(serialize_network(witness) + "\n", encoding="utf-8")
    elif not args.json:
        print(serialize_network(witness))
    return _report(args, result.r, inst, kres, lifted, witness)


def _report(args, r, inst, kres, lifted, witness=None) -> int:
    if args.json:
        out = {
            "answer": "yes" if r is not None else "no",
            "r": r,
            "k": args.k,
            "n": inst.n,
            "n_kernel": kres.instance.n if kres is not None else inst.n,
            "verdict": kres.verdict if kres is not None else None,
            "lifted": lifted,
        }
        if witness is not None and args.output is None:
            out["witness"] = serialize_network(witness)
        print(json.dumps(out))
    elif r is None:
        print(f"no: r > {args.k}")
    else:
        print(f"r* = {r}")
    return EXIT_YES if r is not None else EXIT_NO


def cmd_check(args: argparse.Namespace) -> int:
    net = load_network(args.network)
    net.validate()
    trees = load_trees(args.trees)
    if net.leaves != trees[0].leaves:
        _err("network and trees are on different label sets")
        return EXIT_ERROR
    ok = True
    from .newick import serialize_tree
    for i, t in enumerate(trees, start=1):
        shown = displays(net, t)
        ok &= shown
        print(f"tree {i}: {'displayed' if shown else 'NOT displayed'}  {serialize_tree(t)}")
    print(f"reticulation number: {reticulation_number(net)}")
    return EXIT_YES if ok else EXIT_NO


def cmd_gen(args: argparse.Namespace) -> int:
    g = generate(args.n, args.t, args.r, seed=args.seed, p_contract=args.p_contract,
                 max_outdegree=args.max_outdegree)
    _write(args.output, write_trees(g.instance))
    if args.output is not None:
        manifest = args.output.with_name(args.output.name + ".json")
        manifest.write_text(json.dumps(g.manifest(), indent=2) + "\n", encoding="utf-8")
    return EXIT_YES


def cmd_oracle(args: argparse.Namespace) -> int:
    from .oracle import brute_force_r
    inst = _instance(args.trees, max(args.k, 0))
    r = brute_force_r(inst, args.k)
    print(f"r = {r}" if r is not None else f"r > {args.k}")
    return EXIT_YES if r is not None else EXIT_NO


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hybker", description="Kernelize and solve Hybridization Number instances.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    kp = sub.add_parser("kernelize", help="shrink an instance by subtree and chain reductions")
    kp.add_argument("-k", type=int, required=True)
    kp.add_argument("--mode", choices=("trees", "degree"), default="trees")
    kp.add_argument("trees", type=Path)
    kp.add_argument("-o", "--output", type=Path)
    kp.add_argument("--trace", type=Path)
    kp.set_defaults(func=cmd_kernelize)

    sp = sub.add_parser("solve", help="compute the reticulation number if it is at most k")
    sp.add_argument("-k", type=int, required=True)
    sp.add_argument("--mode", choices=("trees", "degree", "none"), default="trees")
    sp.add_argument("--no-kernel", action="store_true")
    sp.add_argument("trees", type=Path)
    sp.add_argument("-o", "--output", type=Path)
    sp.add_argument("--json", action="store_true")
    sp.add_argument("--jobs", type=int, default=None)
    sp.add_argument("-q", "--quiet", action="store_true")
    sp.set_defaults(func=cmd_solve)

    cp = sub.add_parser("check", help="test whether a network displays every tree")
    cp.add_argument("network", type=Path)
    cp.add_argument("trees", type=Path)
    cp.set_defaults(func=cmd_check)

    gp = sub.add_parser("gen", help="generate a random instance")
    gp.add_argument("-n", type=int, required=True)
    gp.add_argument("-t", type=int, required=True)
    gp.add_argument("-r", type=int, required=True)
    gp.add_argument("--p-contract", type=float, default=0.3)
    gp.add_argument("--max-outdegree", type=int, default=None)
    gp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    gp.add_argument("-o", "--output", type=Path)
    gp.set_defaults(func=cmd_gen)

    op = sub.add_parser("oracle", help="brute-force reticulation number (n <= 6, k <= 2)")
    op.add_argument("-k", type=int, required=True)
    op.add_argument("trees", type=Path)
    op.set_defaults(func=cmd_oracle)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_YES if exc.code == 0 else EXIT_ERROR
    if getattr(args, "jobs", 1) is None:
        args.jobs = default_jobs()
    try:
        return args.func(args)
    except ParseError as exc:
        _err(f"parse error at {exc}")
    except CapacityError as exc:
        _err(f"capacity: {exc}")
    except (TreeError, NetworkError, ValueError, OSError) as exc:
        _err(str(exc))
    return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
