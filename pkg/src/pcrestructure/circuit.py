"""Circuit data types, the JSON file format, and feed-forward evaluation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .vtree import Vtree

WEIGHT_TOL = 1e-9
FORMAT_VERSION = 1


class CircuitError(ValueError):
    """Raised for malformed circuits; ``node`` names the offending node when known."""

    def __init__(self, message: str, node: int | None = None):
        super().__init__(message if node is None else f"node {node}: {message}")
        self.node = node


@dataclass(frozen=True)
class Node:
    id: int
    kind: str  # "sum", "prod" or "leaf"
    children: tuple[int, ...] = ()
    weights: tuple[float, ...] = ()
    var: int = -1
    probs: tuple[float, ...] = ()

    @property
    def is_leaf(self) -> bool:
        return self.kind == "leaf"


class Circuit:
    """A rooted DAG of sum, product and categorical leaf nodes.

    ``normalized=False`` relaxes the sum-to-one checks on sum weights and leaf
    tables to plain non-negativity; products of circuits and compiled grammars
    are built that way before an explicit renormalization.
    """

    def __init__(
        self,
        nodes: Iterable[Node],
        root: int,
        num_vars: int | None = None,
        domains: Sequence[int] | None = None,
        normalized: bool = True,
    ):
        self.nodes: dict[int, Node] = {}
        for nd in nodes:
            if nd.id in self.nodes:
                raise CircuitError("duplicate node id", nd.id)
            self.nodes[nd.id] = nd
        if root not in self.nodes:
            raise CircuitError("root is not a node", root)
        self.root = root
        self.normalized = normalized

        leaf_dom: dict[int, int] = {}
        for nd in self.nodes.values():
            _check_node(nd, self.nodes, normalized)
            if nd.kind == "leaf":
                if leaf_dom.setdefault(nd.var, len(nd.probs)) != len(nd.probs):
                    raise CircuitError("inconsistent domain size for variable", nd.id)
        if num_vars is None:
            num_vars = len(domains) if domains is not None else max(leaf_dom, default=-1) + 1
        self.num_vars = num_vars
        if domains is None:
            domains = [leaf_dom.get(i, 2) for i in range(num_vars)]
        self.domains = tuple(int(d) for d in domains)
        if len(self.domains) != num_vars:
            raise CircuitError("domains length differs from num_vars")
        for x, d in leaf_dom.items():
            if not 0 <= x < num_vars:
                raise CircuitError(f"leaf variable {x} outside 0..{num_vars - 1}")
            if d != self.domains[x]:
                raise CircuitError(f"leaf table for variable {x} has wrong length")
        self.order = _topological_order(self.nodes, root)
        if len(self.order) != len(self.nodes):
            unreachable = sorted(set(self.nodes) - set(self.order))
            raise CircuitError("node unreachable from root", unreachable[0])

    def __len__(self) -> int:
        return len(self.nodes)

    def __getitem__(self, i: int) -> Node:
        return self.nodes[i]

    def __repr__(self) -> str:
        return f"Circuit(nodes={len(self.nodes)}, num_vars={self.num_vars}, root={self.root})"

    @property
    def size(self) -> int:
        """Number of edges."""
        return sum(len(nd.children) for nd in self.nodes.values())

    @property
    def scopes(self) -> dict[int, frozenset]:
        if not hasattr(self, "_scopes"):
            sc: dict[int, frozenset] = {}
            for i in self.order:
                nd = self.nodes[i]
                if nd.kind == "leaf":
                    sc[i] = frozenset((nd.var,))
                else:
                    sc[i] = frozenset().union(*(sc[c] for c in nd.children))
            self._scopes = sc
        return self._scopes

    def parents(self) -> dict[int, list[int]]:
        par: dict[int, list[int]] = {i: [] for i in self.nodes}
        for nd in self.nodes.values():
            for c in nd.children:
                par[c].append(nd.id)
        return par

    def with_uniform_weights(self, value: float = 1.0) -> Circuit:
        """Copy with every sum weight replaced by ``value`` (unnormalized)."""
        nodes = [
            Node(nd.id, nd.kind, nd.children, (value,) * len(nd.children), nd.var, nd.probs)
            if nd.kind == "sum" else nd
            for nd in self.nodes.values()
        ]
        return Circuit(nodes, self.root, self.num_vars, self.domains, normalized=False)


def _check_node(nd: Node, nodes: Mapping[int, Node], normalized: bool) -> None:
    if nd.kind not in ("sum", "prod", "leaf"):
        raise CircuitError(f"unknown node kind {nd.kind!r}", nd.id)
    if nd.kind == "leaf":
        if nd.children:
            raise CircuitError("leaf with children", nd.id)
        if nd.var < 0 or len(nd.probs) < 1:
            raise CircuitError("leaf needs a variable and a probability table", nd.id)
        if any(p < 0 for p in nd.probs) or (normalized and any(p > 1 + WEIGHT_TOL for p in nd.probs)):
            raise CircuitError("leaf table entries outside [0, 1]", nd.id)
        if normalized and abs(sum(nd.probs) - 1.0) > WEIGHT_TOL:
            raise CircuitError("leaf table not normalized", nd.id)
        return
    if not nd.children:
        raise CircuitError(f"{nd.kind} node without children", nd.id)
    for c in nd.children:
        if c not in nodes:
            raise CircuitError(f"child {c} does not exist", nd.id)
    if nd.kind == "sum":
        if len(nd.weights) != len(nd.children):
            raise CircuitError("weight vector length mismatch", nd.id)
        if any(w < 0 for w in nd.weights):
            raise CircuitError("negative weight", nd.id)
        if normalized and abs(sum(nd.weights) - 1.0) > WEIGHT_TOL:
            raise CircuitError("weights not normalized", nd.id)
    elif nd.weights:
        raise CircuitError("product nodes carry no weights", nd.id)


def _topological_order(nodes: Mapping[int, Node], root: int) -> list[int]:
    """Children-before-parents order of the nodes reachable from ``root``."""
    order: list[int] = []
    state: dict[int, int] = {}  # 1 = on stack, 2 = done
    stack = [(root, 0)]
    state[root] = 1
    while stack:
        i, k = stack.pop()
        ch = nodes[i].children
        if k < len(ch):
            stack.append((i, k + 1))
            c = ch[k]
            s = state.get(c)
            if s == 1:
                raise CircuitError("cyclic reference", c)
            if s is None:
                state[c] = 1
                stack.append((c, 0))
        else:
            state[i] = 2
            order.append(i)
    return order


class CircuitBuilder:
    """Allocates dense ids; ``build`` drops nodes unreachable from the root."""

    def __init__(self):
        self._nodes: list[Node] = []
        self._leaf_cache: dict[tuple, int] = {}

    def __len__(self) -> int:
        return len(self._nodes)

    def leaf(self, var: int, probs: Sequence[float], share: bool = True) -> int:
        probs = tuple(float(p) for p in probs)
        key = (var, probs)
        if share and key in self._leaf_cache:
            return self._leaf_cache[key]
        i = len(self._nodes)
        self._nodes.append(Node(i, "leaf", var=var, probs=probs))
        if share:
            self._leaf_cache[key] = i
        return i

    def prod(self, children: Sequence[int]) -> int:
        i = len(self._nodes)
        self._nodes.append(Node(i, "prod", tuple(children)))
        return i

    def sum(self, children: Sequence[int], weights: Sequence[float]) -> int:
        i = len(self._nodes)
        self._nodes.append(Node(i, "sum", tuple(children), tuple(float(w) for w in weights)))
        return i

    def build(self, root: int, num_vars: int, domains: Sequence[int] | None = None,
              normalized: bool = True) -> Circuit:
        return compact(self._nodes, root, num_vars, domains, normalized)


def compact(nodes: Sequence[Node] | Mapping[int, Node], root: int, num_vars: int,
            domains=None, normalized: bool = True) -> Circuit:
    """Keep the nodes reachable from ``root`` and renumber them densely."""
    table = nodes if isinstance(nodes, Mapping) else {nd.id: nd for nd in nodes}
    reach = _topological_order(table, root)
    keep = sorted(reach)
    remap = {old: new for new, old in enumerate(keep)}
    out = []
    for old in keep:
        nd = table[old]
        out.append(Node(remap[old], nd.kind, tuple(remap[c] for c in nd.children),
                        nd.weights, nd.var, nd.probs))
    return Circuit(out, remap[root], num_vars, domains, normalized)


# -- file format -----------------------------------------------------------------


def parse_circuit(text: str, renormalize: bool = False) -> Circuit:
    """Parse the JSON circuit format.

    With ``renormalize=True`` sum weights and leaf tables are rescaled to sum
    to one instead of being rejected.
    """
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CircuitError(f"malformed syntax: {exc}") from None
    if not isinstance(obj, dict) or "nodes" not in obj or "root" not in obj:
        raise CircuitError("malformed syntax: expected an object with 'nodes' and 'root'")
    if obj.get("format_version", FORMAT_VERSION) != FORMAT_VERSION:
        raise CircuitError(f"unsupported format_version {obj.get('format_version')}")
    normalized = bool(obj.get("normalized", True))
    nodes = []
    for rec in obj["nodes"]:
        try:
            i = int(rec["id"])
            kind = rec["kind"]
        except (KeyError, TypeError, ValueError):
            raise CircuitError(f"malformed node record {rec!r}") from None
        children = tuple(int(c) for c in rec.get("children", ()))
        weights = tuple(float(w) for w in rec.get("weights", ()))
        probs = tuple(float(p) for p in rec.get("probs", ()))
        if renormalize and kind == "sum" and weights and sum(weights) > 0:
            t = sum(weights)
            weights = tuple(w / t for w in weights)
        if renormalize and kind == "leaf" and probs and sum(probs) > 0:
            t = sum(probs)
            probs = tuple(p / t for p in probs)
        nodes.append(Node(i, kind, children, weights, int(rec.get("var", -1)), probs))
    return Circuit(nodes, int(obj["root"]), obj.get("num_vars"), obj.get("domains"), normalized)


def serialize_circuit(c: Circuit) -> str:
    obj: dict = {"format_version": FORMAT_VERSION, "num_vars": c.num_vars, "domains": list(c.domains)}
    if not c.normalized:
        # sum weights and leaf tables may total less than one
        obj["normalized"] = False
    obj["root"] = c.root
    recs = []
    for i in sorted(c.nodes):
        nd = c.nodes[i]
        rec: dict = {"id": nd.id, "kind": nd.kind}
        if nd.kind == "leaf":
            rec["var"] = nd.var
            rec["probs"] = list(nd.probs)
        else:
            rec["children"] = list(nd.children)
            if nd.kind == "sum":
                rec["weights"] = list(nd.weights)
        recs.append(rec)
    obj["nodes"] = recs
    return json.dumps(obj, indent=1) + "\n"


def parse_vtree(text: str) -> Vtree:
    return Vtree.from_json(text)


def serialize_vtree(v: Vtree) -> str:
    return v.to_json() + "\n"


# -- evaluation ------------------------------------------------------------------


def node_values(c: Circuit, X: np.ndarray) -> dict[int, np.ndarray]:
    """Values of every node on a batch of (partial) assignments.

    ``X`` has shape ``(N, num_vars)``; an entry ``-1`` marks a marginalized
    variable, whose leaves then evaluate to their total mass.
    """
    X = np.asarray(X, dtype=np.int64)
    if X.ndim != 2 or X.shape[1] != c.num_vars:
        raise ValueError(f"assignments must have shape (N, {c.num_vars})")
    for x in range(c.num_vars):
        col = X[:, x]
        if np.any((col < -1) | (col >= c.domains[x])):
            raise ValueError(f"value out of domain for variable {x}")
    vals: dict[int, np.ndarray] = {}
    for i in c.order:
        nd = c.nodes[i]
        if nd.kind == "leaf":
            table = np.append(np.asarray(nd.probs), sum(nd.probs))
            vals[i] = table[X[:, nd.var]]  # index -1 picks the appended mass
        elif nd.kind == "prod":
            out = vals[nd.children[0]].copy()
            for ch in nd.children[1:]:
                out *= vals[ch]
            vals[i] = out
        else:
            out = np.zeros(X.shape[0])
            for w, ch in zip(nd.weights, nd.children):
                out += w * vals[ch]
            vals[i] = out
    return vals


def evaluate_batch(c: Circuit, X: np.ndarray) -> np.ndarray:
    return node_values(c, X)[c.root]


def evaluate(c: Circuit, x: Sequence[int]) -> float:
    """Value of the circuit on one full assignment."""
    x = list(x)
    if len(x) != c.num_vars:
        raise ValueError(f"missing variables: expected {c.num_vars} values, got {len(x)}")
    if any(v < 0 for v in x):
        raise ValueError("full assignment required; use marginalize_evaluate for partial evidence")
    return float(evaluate_batch(c, np.array([x]))[0])


def marginalize_evaluate(c: Circuit, partial: Mapping[int, int]) -> float:
    """Marginal probability of the evidence ``{var: value}``.

    Correct for smooth and decomposable circuits, which is checked.
    """
    from .structure import scope_flags

    smooth, decomposable = scope_flags(c)
    if not (smooth and decomposable):
        raise CircuitError("marginalization requires a smooth and decomposable circuit")
    x = np.full((1, c.num_vars), -1, dtype=np.int64)
    for var, val in partial.items():
        if not 0 <= var < c.num_vars:
            raise ValueError(f"unknown variable {var}")
        x[0, var] = val
    return float(evaluate_batch(c, x)[0])


def all_assignments(domains: Sequence[int]) -> np.ndarray:
    """Every full assignment, lexicographic with variable 0 most significant."""
    if len(domains) == 0:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.indices(tuple(domains)).reshape(len(domains), -1).T
    return np.ascontiguousarray(grids, dtype=np.int64)


# -- summaries -------------------------------------------------------------------


@dataclass
class Stats:
    size: int
    depth: int
    num_sum: int
    num_prod: int
    num_leaf: int
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"size": self.size, "depth": self.depth, "sum": self.num_sum,
                "prod": self.num_prod, "leaf": self.num_leaf}


def stats(c: Circuit) -> Stats:
    """Edge count, depth (longest root-to-leaf path in nodes) and node counts."""
    depth: dict[int, int] = {}
    counts = {"sum": 0, "prod": 0, "leaf": 0}
    for i in c.order:
        nd = c.nodes[i]
        counts[nd.kind] += 1
        depth[i] = 1 + max((depth[ch] for ch in nd.children), default=0)
    return Stats(c.size, depth[c.root], counts["sum"], counts["prod"], counts["leaf"])


def products_by_scope(c: Circuit) -> dict[frozenset, list[int]]:
    out: dict[frozenset, list[int]] = {}
    for i in sorted(c.nodes):
        if c.nodes[i].kind == "prod":
            out.setdefault(c.scopes[i], []).append(i)
    return out


def hidden_state_size(c: Circuit, v: Vtree) -> int:
    """Largest number of product nodes sharing the scope of one vtree node."""
    if c.num_vars != v.num_vars:
        raise CircuitError("circuit and vtree have different variables")
    by_scope = products_by_scope(c)
    inner = {v.scope(u) for u in v.inner_nodes()}
    for s, prods in by_scope.items():
        if s not in inner:
            raise CircuitError("product scope is not a vtree node scope", prods[0])
    return max((len(p) for p in by_scope.values()), default=0)
