"""``pcr`` command-line tool.

Every command reads and writes the JSON circuit / vtree formats of
:mod:`pcrestructure.circuit`.  Failures print ``error [stage]: message`` and
exit with status 2; ``check`` and ``verify`` exit with 1 when the requested
property does not hold.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import generate
from .bn import BudgetExceeded
from .circuit import CircuitError, parse_circuit, parse_vtree, serialize_circuit, serialize_vtree, stats
from .grammar import GrammarError, compile_pcfg, parse_grammar
from .labelling import balanced_vtree, compute_label, contiguous_labelling
from .logical import from_logical
from .oracle import check_equivalence, joint_table, relative_deviation
from .product import multiply, multiply_onthefly, multiply_same_vtree
from .restructure import DEFAULT_BUDGET, restructure_with_report
from .structure import validate
from .vtree import Vtree

PROPERTIES = ("smooth", "decomposable", "structured", "deterministic", "alternating",
              "binary_products", "contiguous")


class Failure(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


def _read(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise Failure("input", f"{path}: {exc.strerror}") from None


def _write(path: str, text: str) -> None:
    try:
        with open(path, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    except OSError as exc:
        raise Failure("output", f"{path}: {exc.strerror}") from None


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


def _circuit(path: str):
    try:
        return parse_circuit(_read(path))
    except CircuitError as exc:
        where = "" if exc.node is None else f" (node {exc.node})"
        raise Failure("parse", f"{path}: {exc}{where}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise Failure("parse", f"{path}: {exc}") from None


def _vtree(path: str | None, circuit=None, what: str = "vtree") -> Vtree:
    if path is not None:
        try:
            return parse_vtree(_read(path))
        except (ValueError, KeyError, TypeError) as exc:
            raise Failure("parse", f"{path}: {exc}") from None
    vt = validate(circuit, check_deterministic=False).vtree
    if vt is None:
        raise Failure("input", f"no {what} given and the circuit is not structured")
    return vt


# -- commands --------------------------------------------------------------------


def cmd_check(args) -> int:
    c = _circuit(args.circuit)
    rep = validate(c, check_deterministic=not args.skip_determinism)
    out = {"properties": rep.as_dict(), "stats": stats(c).as_dict()}
    required = [p for item in args.require for p in item.split(",") if p]
    unknown = sorted(set(required) - set(PROPERTIES))
    if unknown:
        raise Failure("input", f"unknown properties {unknown}; choose from {list(PROPERTIES)}")
    failed = [p for p in required if getattr(rep, p) is not True]
    out["required"] = {"requested": required, "failed": failed}
    print(_dump(out))
    return 1 if failed else 0


def _run(stage: str, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except BudgetExceeded as exc:
        raise Failure("table", str(exc)) from None
    except CircuitError as exc:
        raise Failure(stage, str(exc)) from None
    except ValueError as exc:
        raise Failure(stage, str(exc)) from None


def cmd_restructure(args) -> int:
    c = _circuit(args.circuit)
    src = _vtree(args.source_vtree, c, "source vtree")
    tgt = _vtree(args.target_vtree)
    if args.labelling == "contiguous":
        lw = _run("labelling", contiguous_labelling, src, tgt)
    else:
        lw = _run("labelling", compute_label, src, tgt)
    out, rep = _run("assembly", restructure_with_report, c, src, lw, args.budget)
    _write(args.out, serialize_circuit(out))
    if args.labels_out:
        _write(args.labels_out, _dump(lw.to_json_obj()))
    if args.report:
        _write(args.report, _dump(rep.as_dict()))
    print(_dump({"M": rep.M, "M_prime": rep.M_prime, "size": out.size}))
    return 0


def cmd_depth_reduce(args) -> int:
    c = _circuit(args.circuit)
    src = _vtree(args.source_vtree, c, "source vtree")
    lw = _run("labelling", balanced_vtree, src)
    out, rep = _run("assembly", restructure_with_report, c, src, lw, args.budget)
    _write(args.out, serialize_circuit(out))
    if args.labels_out:
        _write(args.labels_out, _dump(lw.to_json_obj()))
    if args.report:
        _write(args.report, _dump(dict(rep.as_dict(), vtree_depth=lw.vtree.depth)))
    print(_dump({"M": rep.M, "M_prime": rep.M_prime, "size": out.size,
                 "depth": stats(out).depth, "vtree_depth": lw.vtree.depth}))
    return 0


def cmd_multiply(args) -> int:
    a, b = _circuit(args.a), _circuit(args.b)
    if args.mode == "same-vtree":
        v = _vtree(args.vtree_b or args.vtree_a, b)
        out, z = _run("assembly", multiply_same_vtree, a, b, v)
    elif args.mode == "restructure":
        va, vb = _vtree(args.vtree_a, a), _vtree(args.vtree_b, b)
        out, z = _run("assembly", multiply, a, va, b, vb, args.budget)
    else:
        va = _vtree(args.vtree_a, a)
        out, z = _run("assembly", multiply_onthefly, a, b, va, args.budget)
    _write(args.out, serialize_circuit(out))
    print(_dump({"partition": z, "size": out.size}))
    return 0


def cmd_pcfg(args) -> int:
    try:
        g = parse_grammar(_read(args.grammar))
        c = compile_pcfg(g, args.length, renormalize=args.normalize)
    except GrammarError as exc:
        raise Failure("grammar", str(exc)) from None
    _write(args.out, serialize_circuit(c))
    print(_dump({"size": c.size, "nodes": len(c), "rules": g.num_rules}))
    return 0


def cmd_verify(args) -> int:
    a = _circuit(args.a)
    bs = [_circuit(p) for p in args.b]
    if not args.proportional:
        if len(bs) != 1:
            raise Failure("input", "equivalence check takes exactly one --b")
        dev, ok = _run("verify", check_equivalence, a, bs[0], args.tol)
        print(_dump({"max_deviation": dev, "passed": ok, "tol": args.tol}))
        return 0 if ok else 1
    try:
        target = np.ones(a.domains)
        for b in bs:
            if b.domains != a.domains:
                raise Failure("verify", "circuits are over different variables")
            target = target * joint_table(b)
        mine = joint_table(a)
    except ValueError as exc:
        raise Failure("verify", str(exc)) from None
    if mine.sum() <= 0 or target.sum() <= 0:
        raise Failure("verify", "a circuit has zero total mass")
    const = float(target.sum() / mine.sum())
    dev = float(relative_deviation(mine * const, target).max())
    ok = dev <= args.tol
    print(_dump({"constant": const, "max_deviation": dev, "passed": ok, "tol": args.tol}))
    return 0 if ok else 1


def cmd_gen(args) -> int:
    rng = generate.default_rng(args.seed)
    n = args.n
    makers = {
        "right-linear": lambda: Vtree.right_linear(n),
        "left-linear": lambda: Vtree.left_linear(n),
        "balanced": lambda: Vtree.balanced(n),
        "random": lambda: Vtree.random(n, rng),
        "random-contiguous": lambda: Vtree.random(n, rng, contiguous=True),
    }
    v = makers[args.vtree]()
    domains = args.domains
    if len(domains) == 1:
        domains = domains[0]
    elif len(domains) == 2 and n != 2:
        domains = tuple(domains)
    if args.kind == "structured":
        c = generate.random_structured_pc(v, args.h, rng, domains, density=args.density)
    elif args.kind == "deterministic":
        c = generate.random_deterministic_pc(v, args.h, rng, domains)
    else:
        v = Vtree.right_linear(n)
        c = from_logical(generate.random_obdd(n, rng))
    _write(args.out, serialize_circuit(c))
    if args.vtree_out:
        _write(args.vtree_out, serialize_vtree(v))
    print(_dump({"size": c.size, "num_vars": n}))
    return 0


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pcr", description="Restructure, multiply and check probabilistic circuits.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("check", help="report structural properties")
    s.add_argument("circuit")
    s.add_argument("--require", action="append", default=[],
                   help=f"comma-separated properties that must hold: {', '.join(PROPERTIES)}")
    s.add_argument("--skip-determinism", action="store_true", help="report determinism as unchecked")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("restructure", help="rebuild a circuit over a target vtree")
    s.add_argument("--circuit", required=True)
    s.add_argument("--source-vtree", help="defaults to the vtree inferred from the circuit")
    s.add_argument("--target-vtree", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--labels-out")
    s.add_argument("--report")
    s.add_argument("--labelling", choices=("general", "contiguous"), default="general")
    s.add_argument("--budget", type=float, default=DEFAULT_BUDGET)
    s.set_defaults(func=cmd_restructure)

    s = sub.add_parser("multiply", help="pointwise product of two circuits")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.add_argument("--mode", choices=("same-vtree", "restructure", "onthefly"), required=True)
    s.add_argument("--vtree-a")
    s.add_argument("--vtree-b")
    s.add_argument("--out", required=True)
    s.add_argument("--budget", type=float, default=DEFAULT_BUDGET)
    s.set_defaults(func=cmd_multiply)

    s = sub.add_parser("depth-reduce", help="logarithmic-depth equivalent circuit")
    s.add_argument("--circuit", required=True)
    s.add_argument("--source-vtree")
    s.add_argument("--out", required=True)
    s.add_argument("--labels-out")
    s.add_argument("--report")
    s.add_argument("--budget", type=float, default=DEFAULT_BUDGET)
    s.set_defaults(func=cmd_depth_reduce)

    s = sub.add_parser("pcfg", help="compile a grammar for strings of one length")
    s.add_argument("--grammar", required=True)
    s.add_argument("--length", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--normalize", action="store_true",
                   help="renormalize into a distribution over strings of this length")
    s.set_defaults(func=cmd_pcfg)

    s = sub.add_parser("verify", help="compare circuits by enumeration")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True, action="append",
                   help="repeat with --proportional to compare against a product")
    s.add_argument("--proportional", action="store_true")
    s.add_argument("--tol", type=float, default=1e-9)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("gen", help="random fixture (seed from --seed or PCR_SEED)")
    s.add_argument("--kind", choices=("structured", "deterministic", "obdd"), default="structured")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--h", type=int, default=2)
    s.add_argument("--domains", type=int, nargs="+", default=[2],
                   help="one size for all variables, LO HI for a random range, or one per variable")
    s.add_argument("--vtree", default="right-linear",
                   choices=("right-linear", "left-linear", "balanced", "random", "random-contiguous"))
    s.add_argument("--density", type=float, default=1.0)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.add_argument("--vtree-out")
    s.set_defaults(func=cmd_gen)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Failure as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
