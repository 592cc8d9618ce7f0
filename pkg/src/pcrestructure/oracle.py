"""Brute-force reference computations used to check the fast paths.

Everything here enumerates: joint tables, path-based d-separation, induced
trees.  Enumeration is lexicographic with variable 0 most significant.
"""
from __future__ import annotations

import itertools
import math
from typing import Iterable, Sequence

import numpy as np

from .bn import TreeBayesNet, blocks
from .circuit import Circuit, all_assignments, evaluate_batch

MAX_STATES = 10 ** 6


def joint_table(c: Circuit) -> np.ndarray:
    """Dense array ``table[x_0, ..., x_{n-1}] = p(x)``."""
    states = math.prod(c.domains)
    if states > MAX_STATES:
        raise ValueError(f"joint table has {states} entries, limit is {MAX_STATES}")
    return evaluate_batch(c, all_assignments(c.domains)).reshape(c.domains)


def bn_joint_table(bn: TreeBayesNet) -> np.ndarray:
    """Dense joint over every network node, axes ordered by node id.

    Built as a plain product of CPT entries, independent of the elimination
    routine in :mod:`pcrestructure.bn`.
    """
    states = math.prod(bn.card)
    if states > MAX_STATES:
        raise ValueError(f"joint state space has {states} entries, limit is {MAX_STATES}")
    v = bn.vtree
    arr = np.asarray(bn.cpt[0], dtype=float)
    for u in range(1, v.num_nodes):
        p = v.parent[u]
        shape = [1] * arr.ndim + [bn.card[u]]
        shape[p] = bn.card[p]  # axis position equals node id (preorder)
        arr = arr[..., None] * bn.cpt[u].T.reshape(shape)
    return arr


def bn_observed_marginal(bn: TreeBayesNet, chunk: int = 256) -> np.ndarray:
    """Sum the brute-force joint over the latents; axes are variables 0..n-1.

    Small networks go through :func:`bn_joint_table`.  Larger ones enumerate
    latent assignments in chunks, each contributing the outer product of the
    leaf columns selected by the assignment.
    """
    v = bn.vtree
    if math.prod(bn.card) <= MAX_STATES:
        joint = bn_joint_table(bn)
        latent_axes = tuple(v.inner_nodes())
        marg = joint.sum(axis=latent_axes) if latent_axes else joint
        leaf_axes = v.leaves()  # ascending node id, remaining axes in this order
        return np.transpose(marg, np.argsort([v.var[u] for u in leaf_axes]))
    latents = v.inner_nodes()
    col = {z: i for i, z in enumerate(latents)}
    leaves = [v.leaf_of(x) for x in range(v.num_vars)]
    obs = math.prod(bn.card[u] for u in leaves)
    if obs > MAX_STATES:
        raise ValueError(f"observed table has {obs} entries, limit is {MAX_STATES}")
    total = np.zeros(obs)
    states = itertools.product(*(range(bn.card[z]) for z in latents))
    while True:
        block = np.array(list(itertools.islice(states, chunk)), dtype=np.int64)
        if len(block) == 0:
            break
        w = np.asarray(bn.cpt[0], dtype=float)[block[:, col[0]]]
        for z in latents[1:]:
            w = w * bn.cpt[z][block[:, col[z]], block[:, col[v.parent[z]]]]
        acc = w[:, None]
        for u in leaves:
            cols = bn.cpt[u][:, block[:, col[v.parent[u]]]].T
            acc = (acc[:, :, None] * cols[:, None, :]).reshape(len(block), -1)
        total += acc.sum(axis=0)
    return total.reshape([bn.card[u] for u in leaves])


def relative_deviation(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    den = np.maximum(np.abs(x), np.abs(y))
    diff = np.abs(x - y)
    return np.divide(diff, den, out=np.zeros_like(diff), where=den > 0)


def check_equivalence(a: Circuit, b: Circuit, tol: float = 1e-9) -> tuple[float, bool]:
    """Largest relative deviation between the two joint tables."""
    if a.domains != b.domains:
        raise ValueError("circuits are over different variables")
    dev = float(relative_deviation(joint_table(a), joint_table(b)).max())
    return dev, dev <= tol


def check_proportional(prod: Circuit, a: Circuit, b: Circuit,
                       tol: float = 1e-9) -> tuple[float, float, bool]:
    """(constant, deviation, passed) for ``prod * constant == p_a * p_b``.

    The constant is the total mass of the pointwise product.
    """
    if not (prod.domains == a.domains == b.domains):
        raise ValueError("circuits are over different variables")
    target = joint_table(a) * joint_table(b)
    const = float(target.sum())
    if const <= 0:
        raise ValueError("pointwise product is identically zero")
    dev = float(relative_deviation(joint_table(prod) * const, target).max())
    return const, dev, dev <= tol


def check_dsep(bn: TreeBayesNet, A: Iterable[int], B: Iterable[int], C: Iterable[int]) -> bool:
    """Path-blocking verdict: every tree path between ``A`` and ``B`` meets ``C``."""
    return blocks(bn, A, B, C)


def conditionally_independent(bn: TreeBayesNet, A: Sequence[int], B: Sequence[int],
                              C: Sequence[int], tol: float = 1e-9) -> bool:
    """Distributional test ``p(a,b,c) p(c) == p(a,c) p(b,c)`` on the brute-force joint.

    Nodes of ``C`` that also appear in ``A`` or ``B`` are fixed by the
    conditioning and dropped from the other two sets.
    """
    C = sorted(set(C))
    A = sorted(set(A) - set(C))
    B = sorted(set(B) - set(C))
    if not A or not B:
        return True
    joint = bn_joint_table(bn)
    keep = A + B + C
    other = tuple(u for u in range(joint.ndim) if u not in keep)
    m = joint.sum(axis=other)
    order = sorted(keep)
    m = np.transpose(m, [order.index(u) for u in keep])
    na, nb = len(A), len(B)
    pabc = m
    pac = m.sum(axis=tuple(range(na, na + nb)))
    pbc = m.sum(axis=tuple(range(na)))
    pc = pac.sum(axis=tuple(range(na)))
    lhs = pabc * pc[(None,) * (na + nb)]
    rhs = pac[(slice(None),) * na + (None,) * nb] * pbc[(None,) * na]
    return bool(np.all(np.abs(lhs - rhs) <= tol))


def count_induced_trees(c: Circuit) -> int:
    count: dict[int, int] = {}
    for i in c.order:
        nd = c.nodes[i]
        if nd.kind == "leaf":
            count[i] = 1
        elif nd.kind == "prod":
            count[i] = math.prod(count[ch] for ch in nd.children)
        else:
            count[i] = sum(count[ch] for ch in nd.children)
    return count[c.root]


def induced_trees(c: Circuit, node: int | None = None):
    """Yield every induced tree as ``(sum edge weights, leaf ids)``."""
    nd = c.nodes[c.root if node is None else node]
    if nd.kind == "leaf":
        yield (), (nd.id,)
    elif nd.kind == "sum":
        for w, ch in zip(nd.weights, nd.children):
            for ws, leaves in induced_trees(c, ch):
                yield (w,) + ws, leaves
    else:
        for combo in itertools.product(*(list(induced_trees(c, ch)) for ch in nd.children)):
            yield (sum((t[0] for t in combo), ()), sum((t[1] for t in combo), ()))


def induced_tree_sum(c: Circuit, x: Sequence[int], limit: int = 10 ** 4) -> float:
    """Sum over induced trees of (product of sum weights) * (product of leaf values)."""
    n = count_induced_trees(c)
    if n > limit:
        raise ValueError(f"{n} induced trees exceeds the limit of {limit}")
    total = 0.0
    for ws, leaves in induced_trees(c):
        val = math.prod(ws)
        for leaf in leaves:
            nd = c.nodes[leaf]
            val *= nd.probs[x[nd.var]]
        total += val
    return total
