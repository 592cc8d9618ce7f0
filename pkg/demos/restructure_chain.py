"""Move a four-variable chain onto a balanced vtree and look at what comes out."""
import numpy as np

from pcrestructure import Vtree, compute_label, pc_to_bn, restructure_with_report
from pcrestructure.oracle import check_equivalence
from pcrestructure.circuit import CircuitBuilder, evaluate

# a chain X0 - X1 - X2 - X3 with two hidden states per step
b = CircuitBuilder()
emit = [[[0.9, 0.1], [0.3, 0.7]], [[0.8, 0.2], [0.4, 0.6]], [[0.5, 0.5], [0.1, 0.9]], [[0.7, 0.3], [0.2, 0.8]]]
trans = [[[0.7, 0.3], [0.2, 0.8]], [[0.6, 0.4], [0.1, 0.9]]]


def states(step):
    # one sum per hidden state of the step, over the rest of the chain
    if step == 2:
        return [b.prod([b.leaf(2, emit[2][i]), b.leaf(3, emit[3][i])]) for i in range(2)]
    rest = states(step + 1)
    tail = [b.sum(rest, trans[step - 1][i]) for i in range(2)]
    return [b.prod([b.leaf(step, emit[step][i]), tail[i]]) for i in range(2)]


first = states(1)
top = [b.sum(first, trans[0][i]) for i in range(2)]
root = b.sum([b.prod([b.leaf(0, emit[0][i]), top[i]]) for i in range(2)], [0.4, 0.6])
chain = b.build(root, 4)
source = Vtree.right_linear(4)
print("source:", source.to_nested(), "size", chain.size)

target = Vtree(((0, 1), (2, 3)))
labels = compute_label(source, target)
for w, lab in enumerate(labels.labels):
    print(f"  target node {w} scope {sorted(target.scope(w))} label {sorted(lab)}")

balanced, report = restructure_with_report(chain, source, labels)
print("M =", report.M, " M' =", report.M_prime, " size", balanced.size)

# the root now mixes over the latent shared by both halves
bn = pc_to_bn(chain, source)
print("root weights", np.round(balanced.nodes[balanced.root].weights, 4))
print("marginal of latent 2", np.round(bn.marginals[2], 4))

dev, ok = check_equivalence(chain, balanced)
print(f"same distribution: {ok} (max relative deviation {dev:.1e})")
print("p(0,1,1,0) =", evaluate(chain, [0, 1, 1, 0]), evaluate(balanced, [0, 1, 1, 0]))
