"""Pointwise products of circuits.

All entry points return ``(circuit, partition)`` where the circuit is
normalized and ``partition`` is the total mass of ``p_a * p_b``, so that
``p_a(x) p_b(x) = partition * p_out(x)``.
"""
from __future__ import annotations

import itertools
import sys

import numpy as np

from .bn import bn_leaf_conditional, conditional_table, pc_to_bn
from .circuit import Circuit, CircuitBuilder, CircuitError
from .labelling import contiguous_labelling, linear_label
from .restructure import DEFAULT_BUDGET, restructure_with_report
from .structure import is_canonical, is_structured_wrt, normalize, renormalize, scope_flags
from .vtree import Vtree


def _canonical(c: Circuit) -> Circuit:
    return c if is_canonical(c) else normalize(c)


def multiply_same_vtree(a: Circuit, b: Circuit, v: Vtree,
                        renormalized: bool = True) -> tuple[Circuit, float]:
    """Product of two circuits structured by the same vtree.

    Node pairs with equal scope are multiplied recursively and memoised.
    With ``renormalized=False`` the raw (unnormalized) product circuit is
    returned instead of its normalized version.
    """
    if a.domains != b.domains:
        raise ValueError("circuits are over different variables")
    if not (is_structured_wrt(a, v) and is_structured_wrt(b, v)):
        raise ValueError("both circuits must be structured with respect to the given vtree")
    a, b = _canonical(a), _canonical(b)
    sa, sb = a.scopes, b.scopes
    out = CircuitBuilder()
    memo: dict[tuple[int, int], int] = {}

    def mul(i: int, j: int) -> int:
        key = (i, j)
        if key in memo:
            return memo[key]
        x, y = a.nodes[i], b.nodes[j]
        if x.kind != y.kind:
            raise CircuitError(f"cannot pair {x.kind} node {i} with {y.kind} node {j}")
        if x.kind == "leaf":
            res = out.leaf(x.var, (np.asarray(x.probs) * np.asarray(y.probs)).tolist())
        elif x.kind == "sum":
            kids, ws = [], []
            for (wa, ca), (wb, cb) in itertools.product(zip(x.weights, x.children),
                                                        zip(y.weights, y.children)):
                if wa * wb > 0:
                    kids.append(mul(ca, cb))
                    ws.append(wa * wb)
            res = out.sum(kids, ws)
        else:
            by_scope = {sb[cb]: cb for cb in y.children}
            try:
                res = out.prod([mul(ca, by_scope[sa[ca]]) for ca in x.children])
            except KeyError:
                raise CircuitError(f"products {i} and {j} split their scope differently") from None
        memo[key] = res
        return res

    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 4 * (len(a) + len(b)) + 100))
    try:
        root = mul(a.root, b.root)
    finally:
        sys.setrecursionlimit(limit)
    raw = out.build(root, a.num_vars, a.domains, normalized=False)
    norm, z = renormalize(raw)
    return (norm if renormalized else raw), z


def multiply(a: Circuit, va: Vtree, b: Circuit, vb: Vtree,
             budget: float = DEFAULT_BUDGET) -> tuple[Circuit, float]:
    """Product of two contiguous structured circuits over possibly different vtrees.

    One side is restructured onto the other's vtree through the contiguous
    labelling, then the two are multiplied node by node.  ``a`` is moved
    unless moving ``b`` gives a strictly narrower labelling.
    """
    if not (va.is_contiguous() and vb.is_contiguous()):
        raise ValueError("both vtrees must be contiguous")
    if va.splits() == vb.splits():
        return multiply_same_vtree(a, b, vb)
    la = contiguous_labelling(va, vb)
    lb = contiguous_labelling(vb, va)
    if lb.widths[::-1] < la.widths[::-1]:
        moved, _ = restructure_with_report(b, vb, lb, budget)
        return multiply_same_vtree(a, moved, lb.vtree)
    moved, _ = restructure_with_report(a, va, la, budget)
    return multiply_same_vtree(moved, b, la.vtree)


def _intervals(c: Circuit) -> dict[int, tuple[int, int]]:
    out = {}
    for i, s in c.scopes.items():
        lo, hi = min(s), max(s)
        if hi - lo + 1 != len(s):
            raise ValueError(f"node {i} has a non-contiguous scope")
        out[i] = (lo, hi)
    return out


def multiply_onthefly(a: Circuit, b: Circuit, va: Vtree | None = None,
                      budget: float = DEFAULT_BUDGET) -> tuple[Circuit, float]:
    """Product of a linear-structured ``a`` with a contiguous, possibly unstructured ``b``.

    For every node ``q`` of ``b`` over ``X_lo..X_hi`` and every positive-mass
    state ``s`` of the two boundary latents of that interval in ``a``, a node
    computes ``p_q(x) * p_a(x | boundary = s)``.  Products of ``b`` are
    expanded over the boundary latents at their split point, weighted by
    ``p_a(new boundary states | s)``, which restructures ``a`` along ``b``
    while multiplying.
    """
    if va is None:
        va = Vtree.right_linear(a.num_vars)
    if not (va.is_right_linear() or va.is_left_linear()):
        raise ValueError("first circuit must be structured with respect to a linear vtree")
    if a.domains != b.domains:
        raise ValueError("circuits are over different variables")
    smooth, decomposable = scope_flags(b)
    if not (smooth and decomposable):
        raise ValueError("second circuit must be smooth and decomposable")
    span = _intervals(b)
    bn = pc_to_bn(_canonical(a), va)
    labels: dict[tuple[int, int], tuple[int, ...]] = {}

    def label(lo, hi):
        key = (lo, hi)
        if key not in labels:
            labels[key] = tuple(sorted(linear_label(va, lo, hi))) if a.num_vars > 1 else ()
        return labels[key]

    leaf_tables: dict[tuple[int, int], dict] = {}
    split_tables: dict[tuple, object] = {}
    out = CircuitBuilder()
    # fam[q][state of label(span[q])] -> node id
    fam: dict[int, dict[tuple, int]] = {}
    # products keyed by (left family key, right family key, left state, right state)
    prods: dict[tuple, int] = {}

    def combine(lfam, lspan, rfam, rspan, key_l, key_r):
        """Family over label(lo, hi) of the product of two adjacent pieces."""
        lo, hi = lspan[0], rspan[1]
        lab, ll, rl = label(lo, hi), label(*lspan), label(*rspan)
        joint = tuple(sorted(set(ll) | set(rl)))
        tkey = (lo, lspan[1], hi)
        if tkey not in split_tables:
            split_tables[tkey] = conditional_table(bn, joint, lab, budget)
        table = split_tables[tkey]
        pos = {z: i for i, z in enumerate(lab)}
        tpos = {z: i for i, z in enumerate(table.targets)}
        res = {}
        for g, row in table.rows.items():
            kids, ws = [], []
            for t, p in row.items():
                u = {z: (g[pos[z]] if z in pos else t[tpos[z]]) for z in joint}
                us_l = tuple(u[z] for z in ll)
                us_r = tuple(u[z] for z in rl)
                lid, rid = lfam.get(us_l), rfam.get(us_r)
                if lid is None or rid is None:
                    continue
                pk = (key_l, key_r, us_l, us_r)
                if pk not in prods:
                    prods[pk] = out.prod([lid, rid])
                kids.append(prods[pk])
                ws.append(p)
            if kids:
                res[g] = out.sum(kids, ws)
        return res

    for q in b.order:
        nd = b.nodes[q]
        lo, hi = span[q]
        if nd.kind == "leaf":
            key = (lo, hi)
            if key not in leaf_tables:
                leaf_tables[key] = bn_leaf_conditional(bn, nd.var, label(lo, hi))
            fam[q] = {g: out.leaf(nd.var, (np.asarray(nd.probs) * vec).tolist())
                      for g, vec in leaf_tables[key].items()}
        elif nd.kind == "sum":
            fam[q] = {}
            states = dict.fromkeys(g for ch in nd.children for g in fam[ch])
            for g in states:
                kids = [(w, fam[ch][g]) for w, ch in zip(nd.weights, nd.children)
                        if w > 0 and g in fam[ch]]
                if kids:
                    fam[q][g] = out.sum([k for _, k in kids], [w for w, _ in kids])
        else:
            kids = sorted(nd.children, key=lambda ch: span[ch][0])
            cur, cur_span, cur_key = fam[kids[0]], span[kids[0]], ("b", kids[0])
            for step, ch in enumerate(kids[1:]):
                cur = combine(cur, cur_span, fam[ch], span[ch], cur_key, ("b", ch))
                cur_span = (cur_span[0], span[ch][1])
                cur_key = ("p", q, step)
            fam[q] = cur
    root = fam[b.root].get(())
    if root is None:
        raise CircuitError("product of the two circuits is identically zero")
    raw = out.build(root, a.num_vars, a.domains, normalized=False)
    norm, z = renormalize(raw)
    return norm, z
