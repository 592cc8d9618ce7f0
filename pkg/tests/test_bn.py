import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcrestructure.bn import (BudgetExceeded, bn_conditional_table, bn_leaf_conditional,
                              bn_marginal, blocks, conditional_table, covers, pc_to_bn)
from pcrestructure.circuit import CircuitError
from pcrestructure.generate import random_structured_pc
from pcrestructure.oracle import (bn_joint_table, bn_observed_marginal, conditionally_independent,
                                  joint_table, relative_deviation)
from pcrestructure.vtree import Vtree


def test_chain_network_parameters(four_step_chain):
    c, v = four_step_chain
    bn = pc_to_bn(c, v)
    assert bn.latents == [0, 2, 4]
    np.testing.assert_allclose(bn.cpt[0], [0.4, 0.6])
    # p(Z_2 = j | Z_0 = i) is the transition matrix, stored as [j, i]
    np.testing.assert_allclose(bn.cpt[2], [[0.7, 0.2], [0.3, 0.8]])
    np.testing.assert_allclose(bn.cpt[1][:, 1], [0.3, 0.7])
    np.testing.assert_allclose(bn_observed_marginal(bn), joint_table(c), rtol=1e-12)


def test_single_variable_network():
    from pcrestructure.circuit import CircuitBuilder
    b = CircuitBuilder()
    c = b.build(b.leaf(0, [0.25, 0.75]), 1)
    bn = pc_to_bn(c, Vtree(0))
    np.testing.assert_allclose(bn.cpt[0], [0.25, 0.75])


def test_non_canonical_circuit_is_rejected():
    from pcrestructure.circuit import CircuitBuilder
    b = CircuitBuilder()
    c = b.build(b.prod([b.leaf(0, [0.5, 0.5]), b.leaf(1, [0.5, 0.5])]), 2)
    with pytest.raises(CircuitError, match="normalize"):
        pc_to_bn(c, Vtree((0, 1)))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(1, 3), st.integers(0, 2 ** 32 - 1))
def test_latent_marginalization_matches_circuit(n, h, seed):
    rng = np.random.default_rng(seed)
    v = Vtree.random(n, rng)
    c = random_structured_pc(v, h, rng, domains=(2, 3), density=0.7, exact_h=False)
    bn = pc_to_bn(c, v)
    assert relative_deviation(bn_observed_marginal(bn), joint_table(c)).max() <= 1e-9
    assert bn_joint_table(bn).sum() == pytest.approx(1.0)


def test_marginal_matches_brute_force(rng):
    v = Vtree.random(5, rng)
    bn = pc_to_bn(random_structured_pc(v, 3, rng, domains=(2, 3)), v)
    joint = bn_joint_table(bn)
    for nodes in ([0], [3, 1], [v.num_nodes - 1, 0, 2], list(range(v.num_nodes))[::-1][:4]):
        others = tuple(u for u in range(joint.ndim) if u not in nodes)
        ref = joint.sum(axis=others)
        ref = np.transpose(ref, np.argsort(np.argsort(nodes)))
        np.testing.assert_allclose(bn_marginal(bn, nodes), ref, rtol=1e-10, atol=1e-15)


def test_conditional_table_rows_sum_to_one(rng):
    v = Vtree.balanced(6)
    bn = pc_to_bn(random_structured_pc(v, 3, rng, density=0.5), v)
    lat = bn.latents
    table = bn_conditional_table(bn, lat[1:3], lat[:1])
    for row in table.rows.values():
        assert sum(row.values()) == pytest.approx(1.0)
        assert all(p > 0 for p in row.values())
    with pytest.raises(ValueError):
        bn_conditional_table(bn, [v.leaves()[0]], [])
    with pytest.raises(BudgetExceeded):
        conditional_table(bn, lat, [], budget=2)


def test_leaf_conditional_needs_cover(four_step_chain):
    c, v = four_step_chain
    bn = pc_to_bn(c, v)
    table = bn_leaf_conditional(bn, 0, [0])
    np.testing.assert_allclose(table[(1,)], [0.3, 0.7])
    with pytest.raises(ValueError, match="cover"):
        bn_leaf_conditional(bn, 0, [])


def test_blocks_agrees_with_independence(rng):
    # positive parameters, so path blocking and distributional independence coincide
    for _ in range(15):
        v = Vtree.random(4, rng)
        bn = pc_to_bn(random_structured_pc(v, 2, rng), v)
        nodes = list(range(v.num_nodes))
        a, b = rng.choice(nodes, 2, replace=False)
        cset = [int(u) for u in rng.choice(bn.latents, int(rng.integers(0, 3)), replace=False)
                if u not in (a, b)]
        assert blocks(bn, [a], [b], cset) == conditionally_independent(bn, [a], [b], cset, 1e-12)


def test_covers():
    v = Vtree.right_linear(4)
    assert covers(v, [2], [1, 2, 3])
    assert not covers(v, [4], [1, 2, 3])
    assert covers(v, [0], range(4))


def test_chunked_latent_sum_matches_dense_table(rng, monkeypatch):
    import pcrestructure.oracle as oracle
    v = Vtree.random(5, rng)
    bn = pc_to_bn(random_structured_pc(v, 3, rng, domains=(2, 3)), v)
    dense = bn_observed_marginal(bn)
    monkeypatch.setattr(oracle, "MAX_STATES", int(np.prod(dense.shape)))
    np.testing.assert_allclose(bn_observed_marginal(bn, chunk=7), dense, rtol=1e-13)
