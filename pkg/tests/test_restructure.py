import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcrestructure.bn import BudgetExceeded, bn_marginal, pc_to_bn
from pcrestructure.circuit import CircuitBuilder, hidden_state_size, marginalize_evaluate, stats
from pcrestructure.generate import random_deterministic_pc, random_hmm, random_obdd, random_structured_pc
from pcrestructure.labelling import LabelledVtree, balanced_vtree, compute_label
from pcrestructure.logical import from_logical, to_logical
from pcrestructure.oracle import check_equivalence
from pcrestructure.restructure import (depth_reduce, restructure, restructure_to_vtree,
                                       restructure_with_report)
from pcrestructure.structure import check_determinism, validate
from pcrestructure.vtree import Vtree


def test_chain_to_balanced_root_weights_are_latent_marginal(four_step_chain):
    c, v = four_step_chain
    tgt = Vtree(((0, 1), (2, 3)))
    lw = compute_label(v, tgt)
    out = restructure(c, v, lw)
    assert check_equivalence(c, out)[1]
    root = out.nodes[out.root]
    # the root mixes over the shared child label {node 2}
    np.testing.assert_allclose(sorted(root.weights), sorted(bn_marginal(pc_to_bn(c, v), [2])), rtol=1e-12)
    assert validate(out).vtree.splits() == tgt.splits()


def test_chain_leaf_mixes_original_leaves(four_step_chain):
    c, v = four_step_chain
    out = restructure(c, v, compute_label(v, Vtree(((0, 1), (2, 3)))))
    bn = pc_to_bn(c, v)
    # p(X0 | Z_2 = j) = sum_i p(Z_0 = i | Z_2 = j) p(X0 | Z_0 = i)
    joint = bn_marginal(bn, [0, 2])
    post = joint / joint.sum(axis=0)
    expected = {tuple(np.round(post[:, j] @ np.array([[0.9, 0.1], [0.3, 0.7]]), 12))
                for j in range(2)}
    got = {tuple(np.round(out.nodes[i].probs, 12)) for i in out.nodes
           if out.nodes[i].kind == "leaf" and out.nodes[i].var == 0}
    assert got == expected


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 7), st.integers(1, 4), st.integers(0, 2 ** 32 - 1))
def test_restructure_preserves_distribution(n, h, seed):
    rng = np.random.default_rng(seed)
    src, tgt = Vtree.random(n, rng), Vtree.random(n, rng)
    c = random_structured_pc(src, h, rng, domains=(2, 3), density=0.6)
    out, rep = restructure_with_report(c, src, compute_label(src, tgt))
    assert check_equivalence(c, out, 1e-9)[1]
    assert validate(out, check_deterministic=False).vtree.splits() == tgt.splits()
    assert rep.within_layer_bounds
    assert all(w > 0 for nd in out.nodes.values() for w in nd.weights)


def test_identity_restructure(rng):
    for _ in range(10):
        v = Vtree.random(6, rng)
        c = random_structured_pc(v, 3, rng, domains=3)
        out = restructure_to_vtree(c, v, v)
        assert check_equivalence(c, out)[1]
        assert hidden_state_size(out, v) <= 3
        assert out.size <= 2 * c.size


def test_linear_to_reversed_linear(rng):
    c = random_hmm(6, 3, rng)
    out = restructure_to_vtree(c, Vtree.right_linear(6), Vtree.right_linear([5, 4, 3, 2, 1, 0]))
    assert check_equivalence(c, out)[1]


def test_all_latents_labelling_blows_up_but_stays_exact(rng):
    n, h = 5, 2
    src, tgt = Vtree.right_linear(n), Vtree.balanced(n)
    c = random_hmm(n, h, rng)
    everything = frozenset(src.inner_nodes())
    lw = LabelledVtree(tgt, tuple(frozenset() if w == 0 else everything for w in range(tgt.num_nodes)))
    out, rep = restructure_with_report(c, src, lw)
    assert check_equivalence(c, out)[1]
    narrow = restructure(c, src, compute_label(src, tgt))
    assert rep.M_prime == n - 1 and out.size > narrow.size


def test_dense_mode_keeps_distribution(rng):
    src = Vtree.random(5, rng)
    c = random_structured_pc(src, 3, rng, density=0.4)
    lw = compute_label(src, Vtree.random(5, rng))
    sparse = restructure(c, src, lw)
    dense, rep = restructure_with_report(c, src, lw, dense=True)
    assert check_equivalence(c, dense)[1]
    assert dense.size >= sparse.size
    assert rep.within_layer_bounds


def test_invalid_labelling_and_budget_errors(rng):
    src = Vtree.right_linear(4)
    c = random_hmm(4, 3, rng)
    tgt = Vtree.balanced(4)
    bad = LabelledVtree(tgt, tuple(frozenset() for _ in range(tgt.num_nodes)))
    with pytest.raises(ValueError, match="invalid labelling"):
        restructure(c, src, bad)
    with pytest.raises(BudgetExceeded):
        restructure(c, src, compute_label(src, tgt), budget=3)


def test_depth_reduce_two_variables(rng):
    c = random_structured_pc(Vtree((0, 1)), 3, rng)
    out = depth_reduce(c, Vtree((0, 1)))
    assert stats(out).depth == stats(c).depth
    assert check_equivalence(c, out)[1]


def test_depth_reduce_long_chain(rng):
    n, h = 64, 4
    c = random_hmm(n, h, rng)
    out = depth_reduce(c, Vtree.right_linear(n))
    edges_depth = stats(out).depth - 1
    assert edges_depth <= 2 * (math.ceil(math.log(n, 1.5)) + 2)
    assert out.size <= 3 * n * h ** 3
    for _ in range(25):
        vars_ = rng.choice(n, 8, replace=False)
        ev = {int(x): int(rng.integers(2)) for x in vars_}
        assert marginalize_evaluate(out, ev) == pytest.approx(marginalize_evaluate(c, ev), rel=1e-9)


def test_determinism_preserved(rng):
    for _ in range(10):
        n = int(rng.integers(2, 7))
        src = Vtree.random(n, rng)
        c = random_deterministic_pc(src, 3, rng, domains=(2, 3))
        out = restructure_to_vtree(c, src, Vtree.random(n, rng))
        assert check_determinism(out) is True
        assert check_determinism(depth_reduce(c, src)) is True


def test_obdd_reverse_order_keeps_model_count(rng):
    for n in (3, 6, 9):
        lc = random_obdd(n, rng)
        pc = from_logical(lc)
        out = restructure_to_vtree(pc, Vtree.right_linear(n), Vtree.right_linear(list(range(n))[::-1]))
        assert to_logical(out).model_count() == lc.model_count()
