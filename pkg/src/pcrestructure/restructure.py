"""Rebuild a structured circuit over a different vtree.

The source circuit is read as a tree-shaped Bayesian network.  Every node
``w`` of the labelled target vtree gets one circuit node per positive-mass
assignment ``c`` of its label, representing ``p(X_w | label = c)``; inner
target nodes combine their children through a product layer indexed by
assignments of the children's joint labels.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from .bn import TreeBayesNet, bn_leaf_conditional, conditional_table, pc_to_bn
from .circuit import Circuit, CircuitBuilder, CircuitError
from .labelling import LabelledVtree, balanced_vtree, compute_label, validate_labelling
from .structure import is_canonical, normalize
from .vtree import Vtree

DEFAULT_BUDGET = 10 ** 7
DRIFT_TOL = 1e-12


@dataclass
class LayerPlan:
    """Sizes of the layers built for one inner target node."""
    node: int
    label: tuple[int, ...]
    joint_label: tuple[int, ...]
    products: int
    sums: int
    sum_edges: int
    product_bound: int
    edge_bound: int

    def as_dict(self) -> dict:
        return dict(self.__dict__, label=list(self.label), joint_label=list(self.joint_label))


@dataclass
class RestructureReport:
    M: int
    M_prime: int
    h: int
    layers: list[LayerPlan] = field(default_factory=list)
    size: int = 0

    @property
    def within_layer_bounds(self) -> bool:
        return all(p.products <= p.product_bound and p.sum_edges <= p.edge_bound
                   for p in self.layers)

    def as_dict(self) -> dict:
        return {"M": self.M, "M_prime": self.M_prime, "h": self.h, "size": self.size,
                "within_layer_bounds": self.within_layer_bounds,
                "layers": [p.as_dict() for p in self.layers]}


def restructure_with_report(c: Circuit, v_src: Vtree, lw: LabelledVtree,
                            budget: float = DEFAULT_BUDGET, dense: bool = False,
                            bn: TreeBayesNet | None = None) -> tuple[Circuit, RestructureReport]:
    """Restructure and also return per-layer size accounting.

    Non-canonical inputs are normalized first.  With ``dense`` every label assignment gets a node, including those of
    zero mass (for checking size bounds); the default prunes them.
    """
    if bn is None:
        if not is_canonical(c):
            c = normalize(c)
        bn = pc_to_bn(c, v_src)
    check = validate_labelling(v_src, lw)
    if not check.valid:
        raise ValueError("invalid labelling: " + "; ".join(check.problems))
    w_tree = lw.vtree
    labels = [tuple(sorted(s)) for s in lw.labels]
    h = max((bn.card[z] for z in bn.latents), default=1)
    report = RestructureReport(check.M, check.M_prime, h)
    b = CircuitBuilder()
    # nodes[w][assignment of labels[w]] -> circuit node id
    nodes: dict[int, dict[tuple, int]] = {}

    for w in reversed(range(w_tree.num_nodes)):  # children before parents
        lab = labels[w]
        if w_tree.is_leaf(w):
            var = w_tree.var[w]
            cond = bn_leaf_conditional(bn, var, lab)
            if dense:
                for g in _assignments(bn, lab):
                    cond.setdefault(g, None)
            nodes[w] = {}
            for g, vec in cond.items():
                if vec is None:  # zero-mass label state, only emitted when dense
                    vec = [1.0 / c.domains[var]] * c.domains[var]
                nodes[w][g] = b.leaf(var, [float(p) for p in vec])
            continue
        left, right = w_tree.children(w)
        ll, rl = labels[left], labels[right]
        joint = tuple(sorted(set(ll) | set(rl)))
        table = conditional_table(bn, joint, lab, budget)
        targets = table.targets
        pos = {z: i for i, z in enumerate(lab)}
        tpos = {z: i for i, z in enumerate(targets)}

        def pick(z, g, t):
            return g[pos[z]] if z in pos else t[tpos[z]]

        prods: dict[tuple, int] = {}
        sums: dict[tuple, int] = {}
        edges = 0
        rows = table.rows
        if dense:
            rows = {g: rows.get(g, {}) for g in _assignments(bn, lab)}
        for g, row in rows.items():
            kids, ws = [], []
            items = row.items()
            if dense:
                items = [(t, row.get(t, 0.0)) for t in _assignments(bn, targets)]
            for t, p in items:
                u = tuple(pick(z, g, t) for z in joint)
                if u not in prods:
                    lkey = tuple(u[joint.index(z)] for z in ll)
                    rkey = tuple(u[joint.index(z)] for z in rl)
                    lid, rid = nodes[left].get(lkey), nodes[right].get(rkey)
                    if lid is None or rid is None:
                        if dense:
                            continue
                        raise CircuitError(f"missing child state at target node {w}")
                    prods[u] = b.prod([lid, rid])
                kids.append(prods[u])
                ws.append(p)
            total = sum(ws)
            if not kids or total <= 0:
                if not dense:
                    continue
                kids, ws, total = [next(iter(prods.values()))], [1.0], 1.0
            if abs(total - 1.0) > DRIFT_TOL:
                ws = [x / total for x in ws]
            sums[g] = b.sum(kids, ws)
            edges += len(kids)
        nodes[w] = sums
        cards = [bn.card[z] for z in joint]
        report.layers.append(LayerPlan(
            w, lab, joint, len(prods), len(sums), edges,
            math.prod(cards), math.prod(cards) * math.prod(bn.card[z] for z in lab if z not in joint)))

    roots = nodes[w_tree.root]
    if list(roots) != [()]:
        raise CircuitError("root layer did not produce a single node")
    out = b.build(roots[()], c.num_vars, c.domains)
    report.size = out.size
    report.layers.reverse()
    return out, report


def _assignments(bn: TreeBayesNet, nodes) -> list[tuple]:
    return list(itertools.product(*(range(bn.card[z]) for z in nodes)))


def restructure(c: Circuit, v_src: Vtree, lw: LabelledVtree, budget: float = DEFAULT_BUDGET,
                dense: bool = False) -> Circuit:
    """Circuit with the same distribution as ``c``, structured by ``lw.vtree``."""
    return restructure_with_report(c, v_src, lw, budget, dense)[0]


def restructure_to_vtree(c: Circuit, v_src: Vtree, v_tgt: Vtree,
                         budget: float = DEFAULT_BUDGET) -> Circuit:
    return restructure(c, v_src, compute_label(v_src, v_tgt), budget)


def depth_reduce(c: Circuit, v_src: Vtree, budget: float = DEFAULT_BUDGET) -> Circuit:
    """Equivalent circuit over a logarithmic-depth vtree with ``O(n h^3)`` size."""
    return restructure(c, v_src, balanced_vtree(v_src), budget)
