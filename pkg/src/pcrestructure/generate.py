"""Random fixtures: structured circuits, deterministic circuits, grammars, OBDDs."""
from __future__ import annotations

import os
from typing import Sequence

import numpy as np

from .circuit import Circuit, CircuitBuilder
from .logical import LogicalCircuit, obdd_from_function
from .vtree import Vtree


def default_rng(seed: int | None = None) -> np.random.Generator:
    """RNG seeded from ``seed`` or, failing that, the ``PCR_SEED`` environment variable."""
    if seed is None and os.environ.get("PCR_SEED"):
        seed = int(os.environ["PCR_SEED"])
    return np.random.default_rng(seed)


def _domains(n: int, domains, rng) -> list[int]:
    if domains is None:
        return [2] * n
    if isinstance(domains, int):
        return [domains] * n
    if isinstance(domains, tuple) and len(domains) == 2 and n != 2:
        lo, hi = domains
        return [int(rng.integers(lo, hi + 1)) for _ in range(n)]
    return list(domains)


def _subset(rng, k: int, density: float) -> list[int]:
    picked = [i for i in range(k) if rng.random() < density]
    return picked or [int(rng.integers(k))]


def random_structured_pc(vtree: Vtree, h: int, rng: np.random.Generator, domains=None,
                         density: float = 1.0, exact_h: bool = True) -> Circuit:
    """Canonical circuit structured with respect to ``vtree``.

    Every inner vtree node gets ``h`` product nodes (or between 1 and ``h``
    when ``exact_h`` is false); each sum connects to a random subset of the
    products below it, each kept with probability ``density``.
    """
    n = vtree.num_vars
    doms = _domains(n, domains, rng)
    b = CircuitBuilder()
    if n == 1:
        return b.build(b.leaf(0, rng.dirichlet(np.ones(doms[0])), share=False), 1, doms)
    prods: dict[int, list[int]] = {}
    for u in reversed(range(vtree.num_nodes)):
        if vtree.is_leaf(u):
            continue
        k = h if exact_h else int(rng.integers(1, h + 1))
        # at least one scope reaches h so the hidden state size is exactly h
        if u == 0 and not exact_h:
            k = h
        prods[u] = []
        for _ in range(k):
            kids = []
            for ch in vtree.children(u):
                if vtree.is_leaf(ch):
                    x = vtree.var[ch]
                    kids.append(b.leaf(x, rng.dirichlet(np.ones(doms[x])), share=False))
                else:
                    sub = _subset(rng, len(prods[ch]), density)
                    kids.append(b.sum([prods[ch][i] for i in sub], rng.dirichlet(np.ones(len(sub)))))
            prods[u].append(b.prod(kids))
    sub = _subset(rng, len(prods[0]), density)
    root = b.sum([prods[0][i] for i in sub], rng.dirichlet(np.ones(len(sub))))
    return b.build(root, n, doms)


def random_hmm(n: int, h: int, rng: np.random.Generator, domains=None, density: float = 1.0) -> Circuit:
    """Structured circuit over the right-linear vtree (an HMM in disguise)."""
    return random_structured_pc(Vtree.right_linear(n), h, rng, domains, density)


def random_deterministic_pc(vtree: Vtree, h: int, rng: np.random.Generator, domains=None) -> Circuit:
    """Deterministic structured circuit built from disjoint-support pieces.

    For every vtree node the products of that scope have pairwise disjoint
    supports: their left inputs mix disjoint groups of the products (or leaf
    values) below the left child.
    """
    n = vtree.num_vars
    doms = _domains(n, domains, rng)
    b = CircuitBuilder()

    def leaf_on(x: int, values: Sequence[int]) -> int:
        probs = np.zeros(doms[x])
        probs[list(values)] = rng.dirichlet(np.ones(len(values)))
        return b.leaf(x, probs, share=False)

    if n == 1:
        return b.build(leaf_on(0, range(doms[0])), 1, doms)
    family: dict[int, list[int]] = {}
    for u in reversed(range(vtree.num_nodes)):
        if vtree.is_leaf(u):
            continue
        a, c = vtree.children(u)
        na = doms[vtree.var[a]] if vtree.is_leaf(a) else len(family[a])
        k = int(rng.integers(1, min(h, na) + 1))
        groups = [[] for _ in range(k)]
        perm = rng.permutation(na)
        for pos, item in enumerate(perm):
            groups[pos if pos < k else int(rng.integers(k))].append(int(item))
        family[u] = []
        for g in groups:
            if vtree.is_leaf(a):
                left = leaf_on(vtree.var[a], g)
            else:
                left = b.sum([family[a][i] for i in g], rng.dirichlet(np.ones(len(g))))
            if vtree.is_leaf(c):
                x = vtree.var[c]
                right = leaf_on(x, _subset(rng, doms[x], 0.7))
            else:
                sub = _subset(rng, len(family[c]), 0.7)
                right = b.sum([family[c][i] for i in sub], rng.dirichlet(np.ones(len(sub))))
            family[u].append(b.prod([left, right]))
    root = b.sum(family[0], rng.dirichlet(np.ones(len(family[0]))))
    return b.build(root, n, doms)


def random_obdd(num_vars: int, rng: np.random.Generator, density: float = 0.5) -> LogicalCircuit:
    """OBDD (order x_0 < x_1 < ...) of a random satisfiable Boolean function."""
    table = rng.random(2 ** num_vars) < density
    if not table.any():
        table[int(rng.integers(len(table)))] = True
    return obdd_from_function(table, num_vars)
