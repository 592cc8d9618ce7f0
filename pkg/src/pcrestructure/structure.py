"""Structural properties of circuits and the canonical (alternating, binary) form."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import (Circuit, CircuitBuilder, CircuitError, Node, all_assignments, compact,
                      node_values)
from .vtree import Vtree

# exhaustive determinism check up to this many binary-variable equivalents
DETERMINISM_ENUM_BITS = 20


@dataclass
class PropertyReport:
    smooth: bool
    decomposable: bool
    structured: bool
    vtree: Vtree | None
    deterministic: bool | None  # None means "unchecked"
    alternating: bool
    binary_products: bool
    contiguous: bool
    problems: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "smooth": self.smooth,
            "decomposable": self.decomposable,
            "structured": self.structured,
            "vtree": None if self.vtree is None else self.vtree.to_json_obj(),
            "deterministic": "unchecked" if self.deterministic is None else self.deterministic,
            "alternating": self.alternating,
            "binary_products": self.binary_products,
            "contiguous": self.contiguous,
            "problems": list(self.problems),
        }


def scope_flags(c: Circuit, problems: list[str] | None = None) -> tuple[bool, bool]:
    """(smooth, decomposable), optionally collecting the offending nodes."""
    sc = c.scopes
    smooth = decomposable = True
    for i in sorted(c.nodes):
        nd = c.nodes[i]
        if nd.kind == "sum":
            if any(sc[ch] != sc[i] for ch in nd.children):
                smooth = False
                if problems is not None:
                    problems.append(f"sum node {i} is not smooth")
        elif nd.kind == "prod":
            total = sum(len(sc[ch]) for ch in nd.children)
            if total != len(sc[i]):
                decomposable = False
                if problems is not None:
                    problems.append(f"product node {i} is not decomposable")
    return smooth, decomposable


def _product_splits(c: Circuit):
    """Binary splits of every product, left-folded in child order."""
    sc = c.scopes
    for i in sorted(c.nodes):
        nd = c.nodes[i]
        if nd.kind != "prod" or len(nd.children) < 2:
            continue
        acc = sc[nd.children[0]]
        for ch in nd.children[1:]:
            yield i, acc, sc[ch]
            acc = acc | sc[ch]


def infer_vtree(c: Circuit) -> Vtree | None:
    """The vtree all product decompositions conform to, or None if there is none.

    Scopes that no product decomposes are completed by left-folding their
    maximal sub-scopes ordered by smallest variable.
    """
    full = frozenset(range(c.num_vars))
    if c.scopes[c.root] != full:
        return None
    splits: dict[frozenset, frozenset] = {}
    family = {full} | {frozenset((x,)) for x in full}
    for _, a, b in _product_splits(c):
        pair = frozenset((a, b))
        s = a | b
        if splits.setdefault(s, pair) != pair:
            return None
        family.update((s, a, b))
    fam = sorted(family, key=len)
    for i, s in enumerate(fam):
        for t in fam[i + 1:]:
            if s & t and not s <= t:
                return None

    def build(s: frozenset):
        if len(s) == 1:
            return next(iter(s))
        if s in splits:
            a, b = sorted(splits[s], key=min)
            return (build(a), build(b))
        inner = [t for t in fam if t < s]
        maximal = [t for t in inner if not any(t < u for u in inner)]
        parts = sorted(maximal, key=min)
        nested = build(parts[0])
        for p in parts[1:]:
            nested = (nested, build(p))
        return nested

    return Vtree(build(full))


def is_structured_wrt(c: Circuit, v: Vtree) -> bool:
    if c.num_vars != v.num_vars:
        return False
    inner = {frozenset(v.scope(u)): frozenset((v.scope(v.left[u]), v.scope(v.right[u])))
             for u in v.inner_nodes()}
    for _, a, b in _product_splits(c):
        if inner.get(a | b) != frozenset((a, b)):
            return False
    return True


def _supports(c: Circuit) -> dict[int, dict[int, frozenset]]:
    sup: dict[int, dict[int, frozenset]] = {}
    for i in c.order:
        nd = c.nodes[i]
        if nd.kind == "leaf":
            sup[i] = {nd.var: frozenset(k for k, p in enumerate(nd.probs) if p > 0)}
        elif nd.kind == "prod":
            d: dict[int, frozenset] = {}
            for ch in nd.children:
                d.update(sup[ch])
            sup[i] = d
        else:
            d = {}
            for w, ch in zip(nd.weights, nd.children):
                if w <= 0:
                    continue
                for var, s in sup[ch].items():
                    d[var] = d.get(var, frozenset()) | s
            sup[i] = d
    return sup


def check_determinism(c: Circuit, problems: list[str] | None = None) -> bool | None:
    """Semantic check on enumerable domains, else a syntactic sufficient check (None if inconclusive)."""
    bits = sum(math.log2(d) for d in c.domains)
    sums = [i for i in sorted(c.nodes) if c.nodes[i].kind == "sum"]
    if bits <= DETERMINISM_ENUM_BITS:
        X = all_assignments(c.domains)
        for start in range(0, len(X), 1 << 14):
            vals = node_values(c, X[start:start + (1 << 14)])
            for i in sums:
                nd = c.nodes[i]
                nz = np.zeros(len(vals[i]), dtype=np.int64)
                for w, ch in zip(nd.weights, nd.children):
                    if w > 0:
                        nz += vals[ch] > 0
                if np.any(nz > 1):
                    if problems is not None:
                        problems.append(f"sum node {i} is not deterministic")
                    return False
        return True
    sup = _supports(c)
    for i in sums:
        nd = c.nodes[i]
        kids = [ch for w, ch in zip(nd.weights, nd.children) if w > 0]
        for a in range(len(kids)):
            for b in range(a + 1, len(kids)):
                sa, sb = sup[kids[a]], sup[kids[b]]
                if not any(not (sa[x] & sb[x]) for x in sa.keys() & sb.keys()):
                    return None
    return True


def validate(c: Circuit, check_deterministic: bool = True) -> PropertyReport:
    problems: list[str] = []
    smooth, decomposable = scope_flags(c, problems)
    alternating = True
    binary = True
    for i in sorted(c.nodes):
        nd = c.nodes[i]
        kinds = {c.nodes[ch].kind for ch in nd.children}
        if nd.kind == "sum" and kinds - {"prod"}:
            alternating = False
        if nd.kind == "prod":
            if kinds - {"sum", "leaf"}:
                alternating = False
            if len(nd.children) != 2:
                binary = False
    contiguous = smooth and decomposable and all(
        max(s) - min(s) + 1 == len(s) for s in c.scopes.values())
    vt = infer_vtree(c) if decomposable else None
    if decomposable and vt is None:
        problems.append("no single vtree matches all product decompositions")
    det = check_determinism(c, problems) if check_deterministic else None
    return PropertyReport(smooth, decomposable, vt is not None, vt, det, alternating, binary,
                          contiguous, problems)


def normalize(c: Circuit) -> Circuit:
    """Rewrite into alternating sum/product layers with binary products.

    Sum-of-sum chains are collapsed with multiplied weights, sums over a single
    variable become mixed leaves, n-ary products are left-folded in child order
    and unit-weight sums are inserted between directly nested products.  The
    represented function is unchanged.
    """
    smooth, decomposable = scope_flags(c)
    if not decomposable:
        raise CircuitError("normalize requires a decomposable circuit")
    if not smooth:
        raise CircuitError("normalize requires a smooth circuit")
    sc = c.scopes
    b = CircuitBuilder()
    # rep[i] is ("leaf", var, probs) or ("mix", [(weight, new product id), ...])
    rep: dict[int, tuple] = {}
    operand: dict[int, int] = {}

    def as_operand(key, r) -> int:
        if key is not None and key in operand:
            return operand[key]
        if r[0] == "leaf":
            out = b.leaf(r[1], r[2], share=False)
        else:
            out = b.sum([p for _, p in r[1]], [w for w, _ in r[1]])
        if key is not None:
            operand[key] = out
        return out

    for i in c.order:
        nd = c.nodes[i]
        if nd.kind == "leaf":
            rep[i] = ("leaf", nd.var, nd.probs)
        elif nd.kind == "sum":
            if len(sc[i]) == 1:
                var = next(iter(sc[i]))
                mixed = np.zeros(c.domains[var])
                for w, ch in zip(nd.weights, nd.children):
                    mixed += w * np.asarray(rep[ch][2])
                rep[i] = ("leaf", var, tuple(mixed.tolist()))
            else:
                acc: dict[int, float] = {}
                for w, ch in zip(nd.weights, nd.children):
                    for w2, p in rep[ch][1]:
                        acc[p] = acc.get(p, 0.0) + w * w2
                rep[i] = ("mix", [(w, p) for p, w in acc.items()])
        else:
            kids = nd.children
            if len(kids) == 1:
                rep[i] = rep[kids[0]]
                continue
            left = as_operand(kids[0], rep[kids[0]])
            for k, ch in enumerate(kids[1:]):
                right = as_operand(ch, rep[ch])
                p = b.prod([left, right])
                if k < len(kids) - 2:
                    left = b.sum([p], [1.0])
            rep[i] = ("mix", [(1.0, p)])
    r = rep[c.root]
    root = as_operand(None, r)
    return b.build(root, c.num_vars, c.domains, normalized=c.normalized)


def is_canonical(c: Circuit) -> bool:
    """Alternating sum/product layers, binary products and a sum at the root (leaf if n = 1)."""
    rep = validate(c, check_deterministic=False)
    root_ok = c.nodes[c.root].kind == ("leaf" if c.num_vars == 1 else "sum")
    return root_ok and rep.smooth and rep.decomposable and rep.alternating and rep.binary_products


def renormalize(c: Circuit) -> tuple[Circuit, float]:
    """Turn a non-negative smooth decomposable circuit into a normalized one.

    Returns the normalized circuit and the partition constant (the total mass
    of the input).  Nodes with zero mass are dropped.
    """
    smooth, decomposable = scope_flags(c)
    if not (smooth and decomposable):
        raise CircuitError("renormalize requires a smooth and decomposable circuit")
    mass: dict[int, float] = {}
    for i in c.order:
        nd = c.nodes[i]
        if nd.kind == "leaf":
            mass[i] = float(sum(nd.probs))
        elif nd.kind == "prod":
            mass[i] = math.prod(mass[ch] for ch in nd.children)
        else:
            mass[i] = sum(w * mass[ch] for w, ch in zip(nd.weights, nd.children))
    z = mass[c.root]
    if not z > 0:
        raise CircuitError("circuit has zero total mass")
    nodes = {}
    for i in c.order:
        nd = c.nodes[i]
        if mass[i] <= 0:
            continue
        if nd.kind == "leaf":
            nodes[i] = Node(i, "leaf", var=nd.var, probs=tuple(p / mass[i] for p in nd.probs))
        elif nd.kind == "prod":
            nodes[i] = nd
        else:
            kids, ws = [], []
            for w, ch in zip(nd.weights, nd.children):
                if w > 0 and mass[ch] > 0:
                    kids.append(ch)
                    ws.append(w * mass[ch] / mass[i])
            t = sum(ws)
            nodes[i] = Node(i, "sum", tuple(kids), tuple(w / t for w in ws))
    return compact(nodes, c.root, c.num_vars, c.domains, normalized=True), z
