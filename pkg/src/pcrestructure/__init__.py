"""Structured probabilistic circuits: restructuring, multiplication, depth reduction."""
from .bn import TreeBayesNet, bn_conditional_table, bn_marginal, conditional_table, pc_to_bn
from .circuit import (Circuit, CircuitBuilder, CircuitError, Node, evaluate, evaluate_batch,
                      marginalize_evaluate, parse_circuit, parse_vtree, serialize_circuit,
                      serialize_vtree, stats)
from .grammar import Pcfg, compile_pcfg, cyk_inside, parse_grammar
from .labelling import (LabelledVtree, balanced_vtree, compute_label, contiguous_labelling,
                        minimum_separator, segment_cover, validate_labelling)
from .product import multiply, multiply_onthefly, multiply_same_vtree
from .restructure import depth_reduce, restructure, restructure_to_vtree, restructure_with_report
from .structure import normalize, renormalize, validate
from .vtree import Vtree

__all__ = [
    "Circuit", "CircuitBuilder", "CircuitError", "LabelledVtree", "Node", "Pcfg", "TreeBayesNet",
    "Vtree", "balanced_vtree", "bn_conditional_table", "bn_marginal", "compile_pcfg",
    "compute_label", "conditional_table", "contiguous_labelling", "cyk_inside", "depth_reduce",
    "evaluate", "evaluate_batch", "marginalize_evaluate", "minimum_separator", "multiply",
    "multiply_onthefly", "multiply_same_vtree", "normalize", "parse_circuit", "parse_grammar",
    "parse_vtree", "pc_to_bn", "renormalize", "restructure", "restructure_to_vtree",
    "restructure_with_report", "segment_cover", "serialize_circuit", "serialize_vtree", "stats",
    "validate", "validate_labelling",
]
