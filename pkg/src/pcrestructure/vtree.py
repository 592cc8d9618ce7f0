"""Vtrees: rooted full binary trees whose leaves biject with variables.

Nodes are numbered ``0 .. 2n-2`` in preorder, so the root is always node 0.
The same numbering is reused by the tree Bayesian network built from a
circuit: inner node ``v`` is the latent ``Z_v`` and leaf ``v`` is the
observed variable stored at it.
"""
from __future__ import annotations

import json
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np


class Vtree:
    """Immutable vtree built from a nested structure.

    A nested structure is either a variable index or a pair ``(left, right)``
    of nested structures, e.g. ``(0, (1, (2, 3)))`` for the right-linear
    vtree over four variables.
    """

    def __init__(self, nested):
        left: list[int] = []
        right: list[int] = []
        var: list[int] = []
        parent: list[int] = []
        stack = [(nested, -1, None)]
        # iterative preorder so deep linear vtrees do not hit the recursion limit
        while stack:
            item, par, side = stack.pop()
            idx = len(var)
            parent.append(par)
            if par >= 0:
                if side == 0:
                    left[par] = idx
                else:
                    right[par] = idx
            if isinstance(item, (int, np.integer)):
                left.append(-1)
                right.append(-1)
                var.append(int(item))
            else:
                if len(item) != 2:
                    raise ValueError("vtree inner nodes must have exactly two children")
                left.append(-2)
                right.append(-2)
                var.append(-1)
                stack.append((item[1], idx, 1))
                stack.append((item[0], idx, 0))
        n = sum(1 for x in var if x >= 0)
        if sorted(x for x in var if x >= 0) != list(range(n)):
            raise ValueError("vtree leaves must biject with variables 0..n-1")
        self.left = tuple(left)
        self.right = tuple(right)
        self.var = tuple(var)
        self.parent = tuple(parent)
        self._leaf_of = {x: i for i, x in enumerate(var) if x >= 0}

    # -- construction helpers -------------------------------------------------

    @classmethod
    def right_linear(cls, order: int | Sequence[int]) -> Vtree:
        order = list(range(order)) if isinstance(order, int) else list(order)
        nested = order[-1]
        for x in reversed(order[:-1]):
            nested = (x, nested)
        return cls(nested)

    @classmethod
    def left_linear(cls, order: int | Sequence[int]) -> Vtree:
        order = list(range(order)) if isinstance(order, int) else list(order)
        nested = order[0]
        for x in order[1:]:
            nested = (nested, x)
        return cls(nested)

    @classmethod
    def balanced(cls, order: int | Sequence[int]) -> Vtree:
        order = list(range(order)) if isinstance(order, int) else list(order)

        def build(lo, hi):
            if hi - lo == 1:
                return order[lo]
            mid = (lo + hi + 1) // 2
            return (build(lo, mid), build(mid, hi))

        return cls(build(0, len(order)))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, contiguous: bool = False) -> Vtree:
        """Uniformly random split points over a random (or canonical) order."""
        order = list(range(n)) if contiguous else [int(x) for x in rng.permutation(n)]

        def build(lo, hi):
            if hi - lo == 1:
                return order[lo]
            mid = int(rng.integers(lo + 1, hi))
            return (build(lo, mid), build(mid, hi))

        return cls(build(0, n))

    @classmethod
    def from_json(cls, obj) -> Vtree:
        if isinstance(obj, str):
            obj = json.loads(obj)

        def conv(o):
            if "var" in o:
                return int(o["var"])
            return (conv(o["left"]), conv(o["right"]))

        return cls(conv(obj))

    # -- queries ----------------------------------------------------------------

    @property
    def root(self) -> int:
        return 0

    @property
    def num_nodes(self) -> int:
        return len(self.var)

    @property
    def num_vars(self) -> int:
        return len(self._leaf_of)

    def is_leaf(self, v: int) -> bool:
        return self.var[v] >= 0

    def children(self, v: int) -> tuple[int, int]:
        return self.left[v], self.right[v]

    def leaf_of(self, x: int) -> int:
        """Node id of the leaf holding variable ``x``."""
        return self._leaf_of[x]

    def inner_nodes(self) -> list[int]:
        return [v for v in range(self.num_nodes) if self.var[v] < 0]

    def leaves(self) -> list[int]:
        return [v for v in range(self.num_nodes) if self.var[v] >= 0]

    @cached_property
    def scopes(self) -> tuple[frozenset, ...]:
        scopes: list = [None] * self.num_nodes
        for v in reversed(range(self.num_nodes)):
            if self.var[v] >= 0:
                scopes[v] = frozenset((self.var[v],))
            else:
                scopes[v] = scopes[self.left[v]] | scopes[self.right[v]]
        return tuple(scopes)

    def scope(self, v: int) -> frozenset:
        return self.scopes[v]

    @cached_property
    def node_of_scope(self) -> dict[frozenset, int]:
        return {s: v for v, s in enumerate(self.scopes)}

    @cached_property
    def node_depths(self) -> tuple[int, ...]:
        d = [0] * self.num_nodes
        for v in range(1, self.num_nodes):
            d[v] = d[self.parent[v]] + 1
        return tuple(d)

    @property
    def depth(self) -> int:
        """Longest root-to-leaf path, counted in edges."""
        return max(self.node_depths)

    def subtree(self, v: int) -> Iterator[int]:
        stack = [v]
        while stack:
            u = stack.pop()
            yield u
            if self.var[u] < 0:
                stack.append(self.right[u])
                stack.append(self.left[u])

    def neighbours(self, v: int) -> list[int]:
        out = [] if self.parent[v] < 0 else [self.parent[v]]
        if self.var[v] < 0:
            out += [self.left[v], self.right[v]]
        return out

    def is_contiguous(self) -> bool:
        return all(max(s) - min(s) + 1 == len(s) for s in self.scopes)

    def interval(self, v: int) -> tuple[int, int]:
        s = self.scopes[v]
        return min(s), max(s)

    def is_right_linear(self) -> bool:
        """Right-linear in the canonical order: ``(0, (1, (2, ...)))``."""
        v = 0
        for x in range(self.num_vars - 1):
            if self.var[v] >= 0 or self.var[self.left[v]] != x:
                return False
            v = self.right[v]
        return self.var[v] == self.num_vars - 1

    def is_left_linear(self) -> bool:
        v = 0
        for x in reversed(range(1, self.num_vars)):
            if self.var[v] >= 0 or self.var[self.right[v]] != x:
                return False
            v = self.left[v]
        return self.var[v] == 0

    # -- conversion ----------------------------------------------------------

    def to_nested(self, v: int = 0):
        out: dict[int, object] = {}
        for u in reversed(list(self.subtree(v))):
            out[u] = self.var[u] if self.var[u] >= 0 else (out[self.left[u]], out[self.right[u]])
        return out[v]

    def to_json_obj(self, v: int = 0) -> dict:
        out: dict[int, dict] = {}
        for u in reversed(list(self.subtree(v))):
            if self.var[u] >= 0:
                out[u] = {"var": self.var[u]}
            else:
                out[u] = {"left": out[self.left[u]], "right": out[self.right[u]]}
        return out[v]

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True)

    def splits(self) -> frozenset:
        """Unordered (left scope, right scope) pairs; equal iff equal up to child swaps."""
        sc = self.scopes
        return frozenset(frozenset((sc[self.left[u]], sc[self.right[u]])) for u in self.inner_nodes())

    def __eq__(self, other) -> bool:
        return isinstance(other, Vtree) and self.var == other.var and self.left == other.left

    def __hash__(self) -> int:
        return hash((self.var, self.left))

    def __repr__(self) -> str:
        return f"Vtree({self.to_nested()!r})"
