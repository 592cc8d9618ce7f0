import numpy as np
import pytest

from pcrestructure.circuit import CircuitBuilder
from pcrestructure.vtree import Vtree


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def chain_pc(weights_root, trans, leaves):
    """Right-linear canonical circuit from explicit HMM-style parameters.

    ``weights_root``: prior over the top latent; ``trans[k]``: matrix
    ``[i, j] = p(Z_{k+1} = j | Z_k = i)``; ``leaves[x]``: per latent state of
    the parent, the table of ``X_x``.  Used for hand-checkable fixtures.
    """
    n = len(leaves)
    b = CircuitBuilder()
    below = None  # product ids of the next latent down
    for k in reversed(range(n - 1)):
        h = len(leaves[k])
        prods = []
        for i in range(h):
            left = b.leaf(k, leaves[k][i], share=False)
            if k == n - 2:
                right = b.leaf(n - 1, leaves[n - 1][i], share=False)
            else:
                right = b.sum(below, trans[k + 1][i])
            prods.append(b.prod([left, right]))
        below = prods
    root = b.sum(below, weights_root)
    return b.build(root, n)


@pytest.fixture
def four_step_chain():
    """Four binary variables over the right-linear vtree, two states per latent."""
    trans = [None,
             np.array([[0.7, 0.3], [0.2, 0.8]]),
             np.array([[0.6, 0.4], [0.1, 0.9]])]
    leaves = [
        [[0.9, 0.1], [0.3, 0.7]],
        [[0.8, 0.2], [0.4, 0.6]],
        [[0.5, 0.5], [0.25, 0.75]],
        [[0.35, 0.65], [0.95, 0.05]],
    ]
    return chain_pc([0.4, 0.6], trans, leaves), Vtree.right_linear(4)
