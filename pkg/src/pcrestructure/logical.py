"""Logical circuits (NNF over binary variables) and their probabilistic twins.

Mapping ``or -> sum`` and ``and -> product`` with positive weights gives a
circuit with exactly the same support, so logical circuits can be restructured
with the probabilistic machinery and mapped back.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuit import Circuit, CircuitBuilder, CircuitError, all_assignments
from .structure import scope_flags


@dataclass(frozen=True)
class LNode:
    id: int
    kind: str  # "or", "and", "lit"
    children: tuple[int, ...] = ()
    var: int = -1
    positive: bool = True


class LogicalCircuit:
    def __init__(self, nodes: Sequence[LNode], root: int, num_vars: int):
        self.nodes = {nd.id: nd for nd in nodes}
        self.root = root
        self.num_vars = num_vars
        order, seen = [], set()
        stack = [(root, False)]
        while stack:
            i, done = stack.pop()
            if done:
                order.append(i)
                continue
            if i in seen:
                continue
            seen.add(i)
            stack.append((i, True))
            stack.extend((ch, False) for ch in reversed(self.nodes[i].children) if ch not in seen)
        self.order = order

    def __len__(self) -> int:
        return len(self.nodes)

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X)
        val: dict[int, np.ndarray] = {}
        for i in self.order:
            nd = self.nodes[i]
            if nd.kind == "lit":
                val[i] = X[:, nd.var] == (1 if nd.positive else 0)
            elif nd.kind == "and":
                val[i] = np.logical_and.reduce([val[c] for c in nd.children])
            else:
                val[i] = np.logical_or.reduce([val[c] for c in nd.children])
        return val[self.root]

    def models(self) -> np.ndarray:
        X = all_assignments([2] * self.num_vars)
        return X[self.evaluate(X)]

    def model_count(self) -> int:
        """Exact count for smooth, deterministic, decomposable circuits (Python ints)."""
        count: dict[int, int] = {}
        scope: dict[int, frozenset] = {}
        for i in self.order:
            nd = self.nodes[i]
            if nd.kind == "lit":
                count[i], scope[i] = 1, frozenset((nd.var,))
            elif nd.kind == "and":
                count[i], scope[i] = 1, frozenset()
                for ch in nd.children:
                    count[i] *= count[ch]
                    scope[i] |= scope[ch]
            else:
                scope[i] = frozenset().union(*(scope[ch] for ch in nd.children))
                count[i] = sum(count[ch] for ch in nd.children)
        free = self.num_vars - len(scope[self.root])
        return count[self.root] * 2 ** free


def from_logical(lc: LogicalCircuit) -> Circuit:
    """Probabilistic circuit with the same support; or-weights are uniform."""
    b = CircuitBuilder()
    new: dict[int, int] = {}
    for i in lc.order:
        nd = lc.nodes[i]
        if nd.kind == "lit":
            new[i] = b.leaf(nd.var, (0.0, 1.0) if nd.positive else (1.0, 0.0))
        elif nd.kind == "and":
            new[i] = b.prod([new[c] for c in nd.children])
        else:
            k = len(nd.children)
            new[i] = b.sum([new[c] for c in nd.children], [1.0 / k] * k)
    c = b.build(new[lc.root], lc.num_vars, [2] * lc.num_vars)
    smooth, decomposable = scope_flags(c)
    if not decomposable:
        raise CircuitError("logical circuit is not decomposable")
    if not smooth:
        raise CircuitError("logical circuit is not smooth")
    return c


def to_logical(c: Circuit) -> LogicalCircuit:
    """Drop weights; leaves become the disjunction of the literals in their support."""
    if any(d != 2 for d in c.domains):
        raise CircuitError("logical circuits need binary variables")
    nodes: list[LNode] = []

    def add(kind, children=(), var=-1, positive=True) -> int:
        nodes.append(LNode(len(nodes), kind, tuple(children), var, positive))
        return len(nodes) - 1

    new: dict[int, int] = {}
    for i in c.order:
        nd = c.nodes[i]
        if nd.kind == "leaf":
            lits = [add("lit", var=nd.var, positive=bool(val))
                    for val, p in enumerate(nd.probs) if p > 0]
            if not lits:
                raise CircuitError("leaf with empty support", i)
            new[i] = lits[0] if len(lits) == 1 else add("or", lits)
        elif nd.kind == "prod":
            new[i] = add("and", [new[ch] for ch in nd.children])
        else:
            kids = [new[ch] for w, ch in zip(nd.weights, nd.children) if w > 0]
            new[i] = add("or", kids)
    return LogicalCircuit(nodes, new[c.root], c.num_vars)


def obdd_from_function(table: Sequence[bool], num_vars: int) -> LogicalCircuit:
    """Quasi-reduced OBDD with order ``x_0 < x_1 < ...`` as a smooth d-SDNNF.

    ``table`` is the truth table in lexicographic order (``x_0`` most
    significant).  Each decision node becomes
    ``(x_i and high) or (not x_i and low)`` with false branches dropped; equal
    sub-functions on the same level are shared.
    """
    table = tuple(bool(t) for t in table)
    if len(table) != 2 ** num_vars:
        raise ValueError("truth table has the wrong length")
    if not any(table):
        raise ValueError("unsatisfiable function has no circuit")
    nodes: list[LNode] = []
    cache: dict[tuple, int] = {}

    def add(kind, children=(), var=-1, positive=True) -> int:
        nodes.append(LNode(len(nodes), kind, tuple(children), var, positive))
        return len(nodes) - 1

    lits = {}
    for x in range(num_vars):
        lits[(x, False)] = add("lit", var=x, positive=False)
        lits[(x, True)] = add("lit", var=x, positive=True)

    def build(level: int, f: tuple) -> int:
        key = (level, f)
        if key in cache:
            return cache[key]
        half = len(f) // 2
        lo, hi = f[:half], f[half:]
        branches = []
        for val, sub in ((False, lo), (True, hi)):
            if not any(sub):
                continue
            lit = lits[(level, val)]
            if level == num_vars - 1:
                branches.append(lit)
            else:
                branches.append(add("and", (lit, build(level + 1, sub))))
        out = branches[0] if len(branches) == 1 else add("or", branches)
        cache[key] = out
        return out

    return LogicalCircuit(nodes, build(0, table), num_vars)
