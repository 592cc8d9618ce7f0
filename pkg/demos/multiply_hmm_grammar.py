"""Weight a grammar's parses by a hidden Markov model.

The compiled grammar is contiguous but not structured, so it cannot be
multiplied node by node with the chain.  The on-the-fly product restructures
the chain along the grammar while multiplying.
"""
import numpy as np

from pcrestructure import compile_pcfg, cyk_inside, evaluate, multiply_onthefly, parse_grammar
from pcrestructure.generate import random_hmm
from pcrestructure.structure import validate

grammar = parse_grammar("""
start: S
terminals: a b
rule: S -> A B @ 0.5
rule: S -> S S @ 0.2
lex: S -> a @ 0.3
rule: A -> A A @ 0.3
lex: A -> a @ 0.7
rule: B -> B B @ 0.4
lex: B -> b @ 0.6
""")
n = 4
parses = compile_pcfg(grammar, n)
props = validate(parses)
print(f"grammar circuit: size {parses.size}, contiguous {props.contiguous}, structured {props.structured}")

chain = random_hmm(n, 2, np.random.default_rng(3), domains=2)
product, z = multiply_onthefly(chain, parses)
print(f"product circuit: size {product.size}, partition {z:.6f}")

for s in ["aabb", "abab", "aaab", "abbb"]:
    x = ["ab".index(ch) for ch in s]
    direct = cyk_inside(grammar, s) * evaluate(chain, x)
    print(f"  {s}: inside x chain = {direct:.3e}   product circuit x partition = {evaluate(product, x) * z:.3e}")
