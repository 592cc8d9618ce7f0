"""Tree-shaped Bayesian networks read off structured circuits.

The network has the shape of the circuit's vtree: inner vtree node ``v``
becomes the latent ``Z_v`` whose states index the product nodes with scope
``X_v``, and every vtree leaf is the observed variable stored there.  Node ids
of the network are vtree node ids throughout the package.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .circuit import Circuit, CircuitError, products_by_scope
from .structure import is_structured_wrt
from .vtree import Vtree

CPT_TOL = 1e-9


def augment_index(c: Circuit, v: Vtree) -> dict[int, list[int]]:
    """Map every inner vtree node to its product nodes; list position is the latent state."""
    if not is_structured_wrt(c, v):
        raise CircuitError("circuit is not structured with respect to the vtree")
    by_scope = products_by_scope(c)
    index = {}
    for u in v.inner_nodes():
        prods = by_scope.get(v.scope(u), [])
        if not prods:
            raise CircuitError(f"no product node has the scope of vtree node {u}")
        index[u] = prods
    return index


@dataclass(frozen=True, eq=False)
class TreeBayesNet:
    """CPTs over the vtree-shaped network.

    ``cpt[root]`` is the prior vector; for any other node ``u`` with parent
    ``p``, ``cpt[u][i, j] = p(u = i | p = j)``.
    """

    vtree: Vtree
    card: tuple[int, ...]
    cpt: dict

    def __post_init__(self):
        for u, table in self.cpt.items():
            if np.any(table < 0):
                raise ValueError(f"negative CPT entry at node {u}")
            col = table.sum(axis=0)
            if np.any(np.abs(col - 1.0) > CPT_TOL):
                raise ValueError(f"CPT of node {u} is not normalized")

    @property
    def root(self) -> int:
        return 0

    @property
    def latents(self) -> list[int]:
        return self.vtree.inner_nodes()

    def observed(self, var: int) -> int:
        return self.vtree.leaf_of(var)

    def is_latent(self, u: int) -> bool:
        return not self.vtree.is_leaf(u)

    def parent(self, u: int) -> int:
        return self.vtree.parent[u]

    @cached_property
    def marginals(self) -> dict[int, np.ndarray]:
        m = {0: self.cpt[0]}
        for u in range(1, self.vtree.num_nodes):
            m[u] = self.cpt[u] @ m[self.vtree.parent[u]]
        return m

    def dump(self) -> str:
        """Human-readable listing of edges and CPTs (debugging aid)."""
        lines = []
        for u in range(self.vtree.num_nodes):
            name = f"Z{u}" if self.is_latent(u) else f"X{self.vtree.var[u]}"
            par = self.vtree.parent[u]
            head = f"{name} (node {u}, card {self.card[u]})"
            if par >= 0:
                head += f" <- node {par}"
            lines.append(head)
            lines.append("  " + np.array2string(self.cpt[u], precision=6).replace("\n", "\n  "))
        return "\n".join(lines) + "\n"


def pc_to_bn(c: Circuit, v: Vtree) -> TreeBayesNet:
    """Build the tree Bayesian network of a canonical structured circuit."""
    if not c.normalized:
        raise CircuitError("pc_to_bn needs a normalized circuit")
    if v.num_vars != c.num_vars:
        raise CircuitError("circuit and vtree have different variables")
    card = [0] * v.num_nodes
    cpt: dict[int, np.ndarray] = {}
    if v.num_nodes == 1:
        root = c.nodes[c.root]
        if root.kind != "leaf":
            raise CircuitError("single-variable circuit must be normalized to a leaf", c.root)
        card[0] = c.domains[0]
        cpt[0] = np.asarray(root.probs, dtype=float)
        return TreeBayesNet(v, tuple(card), cpt)

    index = augment_index(c, v)
    idx = {t: i for prods in index.values() for i, t in enumerate(prods)}
    for u in range(v.num_nodes):
        card[u] = len(index[u]) if u in index else c.domains[v.var[u]]

    root = c.nodes[c.root]
    if root.kind != "sum":
        raise CircuitError("root must be a sum node; normalize the circuit first", c.root)
    prior = np.zeros(card[0])
    for w, t in zip(root.weights, root.children):
        if t not in index[0]:
            raise CircuitError("root sum child is not a root-scope product", t)
        prior[idx[t]] += w
    cpt[0] = prior

    for u in range(1, v.num_nodes):
        cpt[u] = np.zeros((card[u], card[v.parent[u]]))
    for p in v.inner_nodes():
        for j, t in enumerate(index[p]):
            node = c.nodes[t]
            if len(node.children) != 2:
                raise CircuitError("products must be binary; normalize the circuit first", t)
            for u in v.children(p):
                kids = [ch for ch in node.children if c.scopes[ch] == v.scope(u)]
                if len(kids) != 1:
                    raise CircuitError("product does not split along the vtree", t)
                ch = c.nodes[kids[0]]
                if v.is_leaf(u):
                    if ch.kind != "leaf":
                        raise CircuitError("expected a leaf child; normalize the circuit first", t)
                    cpt[u][:, j] = ch.probs
                else:
                    if ch.kind != "sum":
                        raise CircuitError(
                            "products of adjacent scopes joined by more than one path; "
                            "normalize the circuit first", t)
                    for w, t2 in zip(ch.weights, ch.children):
                        if c.nodes[t2].kind != "prod":
                            raise CircuitError("sum child is not a product; normalize first", ch.id)
                        cpt[u][idx[t2], j] += w
    return TreeBayesNet(v, tuple(card), cpt)


# -- exact inference on the tree ---------------------------------------------------


def _contract(factors: Sequence[tuple[np.ndarray, Sequence[int]]], out: Sequence[int]) -> np.ndarray:
    labels: dict[int, int] = {}
    args: list = []
    for arr, axes in factors:
        args.append(arr)
        args.append([labels.setdefault(a, len(labels)) for a in axes])
    args.append([labels.setdefault(a, len(labels)) for a in out])
    return np.einsum(*args, optimize=len(factors) > 2)


def _lca(v: Vtree, nodes: Iterable[int]) -> int:
    nodes = list(nodes)
    depth = v.node_depths
    cur = nodes[0]
    for u in nodes[1:]:
        a, b = cur, u
        while depth[a] > depth[b]:
            a = v.parent[a]
        while depth[b] > depth[a]:
            b = v.parent[b]
        while a != b:
            a, b = v.parent[a], v.parent[b]
        cur = a
    return cur


def bn_marginal(bn: TreeBayesNet, nodes: Sequence[int]) -> np.ndarray:
    """Joint marginal ``p(nodes)`` as a dense array with axes in the given order.

    Sum-product elimination from the leaves of the Steiner subtree spanning
    ``nodes`` towards their lowest common ancestor.
    """
    nodes = list(dict.fromkeys(nodes))
    if not nodes:
        return np.array(1.0)
    v = bn.vtree
    keep = set(nodes)
    top = _lca(v, nodes)
    steiner: set[int] = set()
    for u in nodes:
        while u not in steiner:
            steiner.add(u)
            if u == top:
                break
            u = v.parent[u]
    kids: dict[int, list[int]] = {u: [] for u in steiner}
    for u in steiner:
        if u != top:
            kids[v.parent[u]].append(u)

    # post-order: message of u is a factor over {u} and kept nodes strictly below u
    msgs: dict[int, tuple[np.ndarray, list[int]]] = {}
    stack = [(top, False)]
    while stack:
        u, done = stack.pop()
        if not done:
            stack.append((u, True))
            stack.extend((k, False) for k in kids[u])
            continue
        factors = [(np.ones(bn.card[u]), [u])]
        below: list[int] = []
        for k in kids[u]:
            arr, axes = msgs.pop(k)
            factors.append((arr, axes))
            factors.append((bn.cpt[k], [k, u]))
            below += [a for a in axes if a != k] + ([k] if k in keep else [])
        out = [u] + below
        msgs[u] = (_contract(factors, out), out)
    arr, axes = msgs[top]
    out_axes = [a for a in axes if a in keep]
    res = _contract([(arr, axes), (bn.marginals[top], [top])], out_axes)
    return np.transpose(res, [out_axes.index(a) for a in nodes])


@dataclass(frozen=True)
class SparseTable:
    """``p(targets | given)`` keyed by given-assignment, then target-assignment.

    Zero entries and conditioning assignments of zero prior mass are omitted.
    """

    targets: tuple[int, ...]
    given: tuple[int, ...]
    rows: dict

    def __len__(self) -> int:
        return sum(len(r) for r in self.rows.values())

    def get(self, given_value: tuple, target_value: tuple) -> float:
        return self.rows.get(given_value, {}).get(target_value, 0.0)


def conditional_table(bn: TreeBayesNet, targets: Sequence[int], given: Sequence[int],
                      budget: float | None = None) -> SparseTable:
    """Exact ``p(targets | given)`` for arbitrary network nodes."""
    given = tuple(sorted(set(given)))
    targets = tuple(sorted(set(targets) - set(given)))
    entries = float(np.prod([bn.card[u] for u in targets + given], dtype=float))
    if budget is not None and entries > budget:
        raise BudgetExceeded(f"table over {len(targets) + len(given)} variables needs "
                             f"{entries:.3g} entries, budget is {budget:.3g}")
    joint = bn_marginal(bn, given + targets)
    ng = len(given)
    rows: dict[tuple, dict[tuple, float]] = {}
    gshape = joint.shape[:ng]
    flat = joint.reshape(int(np.prod(gshape, dtype=np.int64)), -1)
    tshape = joint.shape[ng:]
    for gi, row in enumerate(flat):
        mass = row.sum()
        if mass <= 0:
            continue
        gval = tuple(int(x) for x in np.unravel_index(gi, gshape)) if ng else ()
        nz = np.flatnonzero(row)
        rows[gval] = {
            (tuple(int(x) for x in np.unravel_index(ti, tshape)) if targets else ()): float(row[ti] / mass)
            for ti in nz
        }
    return SparseTable(targets, given, rows)


class BudgetExceeded(RuntimeError):
    """A conditional table would exceed the configured entry budget."""


def bn_conditional_table(bn: TreeBayesNet, targets: Iterable[int], given: Iterable[int],
                         budget: float | None = None) -> SparseTable:
    """``p(targets | given)`` over latent variables."""
    targets, given = list(targets), list(given)
    for u in targets + given:
        if not bn.is_latent(u):
            raise ValueError(f"node {u} is not a latent variable")
    return conditional_table(bn, targets, given, budget)


def blocks(bn: TreeBayesNet, sources: Iterable[int], sinks: Iterable[int], blockers: Iterable[int]) -> bool:
    """Whether every tree path from ``sources`` to ``sinks`` meets ``blockers``.

    Endpoints count: a path is blocked if any of its nodes is a blocker.
    """
    blockers = set(blockers)
    sinks = set(sinks)
    seen = set()
    stack = [s for s in sources if s not in blockers]
    seen.update(stack)
    while stack:
        u = stack.pop()
        if u in sinks:
            return False
        for w in bn.vtree.neighbours(u):
            if w not in seen and w not in blockers:
                seen.add(w)
                stack.append(w)
    return True


def covers(v: Vtree, cover: Iterable[int], variables: Iterable[int]) -> bool:
    """Whether ``cover`` blocks all paths between ``variables`` and the other observed nodes."""
    variables = set(variables)
    inside = [v.leaf_of(x) for x in variables]
    outside = [v.leaf_of(x) for x in range(v.num_vars) if x not in variables]
    blockers = set(cover)
    seen = set(inside) - blockers
    stack = list(seen)
    outside = set(outside)
    while stack:
        u = stack.pop()
        if u in outside:
            return False
        for w in v.neighbours(u):
            if w not in seen and w not in blockers:
                seen.add(w)
                stack.append(w)
    return True


def bn_leaf_conditional(bn: TreeBayesNet, var: int, given: Iterable[int]) -> dict[tuple, np.ndarray]:
    """``p(X_var | given)`` as a map from given-assignment to a probability vector."""
    given = sorted(set(given))
    if not covers(bn.vtree, given, [var]):
        raise ValueError(f"given set does not cover variable {var}")
    x = bn.observed(var)
    table = conditional_table(bn, [x], given)
    out = {}
    for g, row in table.rows.items():
        vec = np.zeros(bn.card[x])
        for (val,), p in row.items():
            vec[val] = p
        out[g] = vec
    return out
