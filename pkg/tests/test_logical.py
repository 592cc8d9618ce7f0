import numpy as np
import pytest

from pcrestructure.circuit import CircuitError
from pcrestructure.generate import random_obdd
from pcrestructure.logical import LNode, LogicalCircuit, from_logical, obdd_from_function, to_logical
from pcrestructure.oracle import joint_table
from pcrestructure.structure import validate


def test_obdd_matches_truth_table(rng):
    for n in range(1, 7):
        table = rng.random(2 ** n) < 0.5
        table[0] = True
        lc = obdd_from_function(table, n)
        X = np.array(list(np.ndindex(*(2,) * n)))
        np.testing.assert_array_equal(lc.evaluate(X), table)
        assert lc.model_count() == int(table.sum())


def test_obdd_is_smooth_deterministic_structured(rng):
    pc = from_logical(random_obdd(6, rng))
    rep = validate(pc)
    assert rep.smooth and rep.decomposable and rep.deterministic and rep.structured


def test_support_is_preserved(rng):
    lc = random_obdd(5, rng)
    pc = from_logical(lc)
    support = joint_table(pc).reshape(-1) > 0
    np.testing.assert_array_equal(support, lc.evaluate(np.array(list(np.ndindex(*(2,) * 5)))))
    assert to_logical(pc).model_count() == lc.model_count()


def test_non_decomposable_logical_circuit_rejected():
    nodes = [LNode(0, "lit", var=0), LNode(1, "lit", var=0, positive=False), LNode(2, "and", (0, 1))]
    with pytest.raises(CircuitError):
        from_logical(LogicalCircuit(nodes, 2, 1))


def test_unsatisfiable_function_rejected():
    with pytest.raises(ValueError):
        obdd_from_function([False] * 4, 2)
