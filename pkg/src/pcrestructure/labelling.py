"""Labelled target vtrees: which source latents each target node conditions on.

A labelling assigns every node ``w`` of the target vtree a set ``labels[w]``
of latent nodes of the source network (identified by source vtree node id).
It is valid when

* ``labels[w]`` separates the variables of ``w`` from every other variable,
* for an inner ``w`` with children ``l, r``: ``labels[l]`` separates the
  variables of ``l`` from ``labels[r] | labels[w]``, and symmetrically,
* the root label is empty.

The restructuring size depends on ``M = max |labels[l] | labels[r]|`` and
``M' = max |labels[l] | labels[r] | labels[w]|`` over inner target nodes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .vtree import Vtree


@dataclass(frozen=True)
class LabelledVtree:
    vtree: Vtree
    labels: tuple[frozenset, ...]
    # for depth reduction: the source node each target node was split at
    source_node: tuple[int, ...] | None = None

    def label(self, w: int) -> frozenset:
        return self.labels[w]

    @property
    def widths(self) -> tuple[int, int]:
        """(M, M') as defined in the module docstring."""
        m = mp = 0
        v = self.vtree
        for w in v.inner_nodes():
            cl, cr = self.labels[v.left[w]], self.labels[v.right[w]]
            m = max(m, len(cl | cr))
            mp = max(mp, len(cl | cr | self.labels[w]))
        return m, mp

    def to_json_obj(self) -> dict:
        return {"vtree": self.vtree.to_json_obj(),
                "labels": [sorted(s) for s in self.labels]}

    @classmethod
    def from_json_obj(cls, obj: dict) -> LabelledVtree:
        v = Vtree.from_json(obj["vtree"])
        labels = tuple(frozenset(int(z) for z in s) for s in obj["labels"])
        if len(labels) != v.num_nodes:
            raise ValueError("one label per target vtree node is required")
        return cls(v, labels)


# ---------------------------------------------------------------- separators

@dataclass(frozen=True)
class Separators:
    """Minimum separators: ``sep_a`` blocks A from the root side, ``sep_b`` likewise, ``sep`` blocks A from B."""
    sep_a: frozenset
    sep_b: frozenset
    sep: frozenset


def _smaller(first: frozenset, second: frozenset) -> frozenset:
    # ties go to ``first``; callers pass the root-containing candidate first
    return first if len(first) <= len(second) else second


def _component_children(v: Vtree, nodes: frozenset | None):
    if nodes is None:
        return lambda u: () if v.is_leaf(u) else v.children(u)
    return lambda u: tuple(c for c in (() if v.is_leaf(u) else v.children(u)) if c in nodes)


def minimum_separator(v: Vtree, A: Iterable[int], B: Iterable[int], top: int | None = None,
                      nodes: Iterable[int] | None = None, lift: bool = True) -> Separators:
    """Smallest node sets separating ``A`` from ``B`` inside a subtree.

    Works on the subtree of ``v`` rooted at ``top`` restricted to ``nodes``
    (default: the whole tree).  Bottom-up dynamic programme; on equal sizes
    the set containing the current subtree root wins, which keeps separators
    as high as possible.  With ``lift`` observed (leaf) nodes in the result
    are replaced by their parent latent.
    """
    A, B = frozenset(A), frozenset(B)
    if A & B:
        raise ValueError("A and B overlap")
    nodes = None if nodes is None else frozenset(nodes)
    if top is None:
        top = v.root
    kids = _component_children(v, nodes)
    empty = frozenset()
    res: dict[int, tuple] = {}
    stack = [(top, False)]
    while stack:
        u, done = stack.pop()
        if not done:
            stack.append((u, True))
            stack.extend((k, False) for k in kids(u))
            continue
        ch = kids(u)
        has_a = u in A or any(res[k][3] for k in ch)
        has_b = u in B or any(res[k][4] for k in ch)
        me = frozenset((u,))
        if not has_a and not has_b:
            out = (empty, empty, empty)
        elif not has_b:
            out = (me, empty, empty)
        elif not has_a:
            out = (empty, me, empty)
        else:
            c_all = frozenset().union(*(res[k][2] for k in ch)) | me
            c_a = _smaller(c_all, frozenset().union(*(res[k][0] for k in ch)))
            c_b = _smaller(c_all, frozenset().union(*(res[k][1] for k in ch)))
            if u in c_b and u not in c_a:
                out = (c_a, c_b, _smaller(c_b, c_a))
            else:
                out = (c_a, c_b, _smaller(c_a, c_b))
        res[u] = out + (has_a, has_b)
        for k in ch:
            del res[k]
    sa, sb, s = res[top][:3]
    if lift:
        sa, sb, s = (_lift(v, x) for x in (sa, sb, s))
    return Separators(sa, sb, s)


def _lift(v: Vtree, nodes: Iterable[int]) -> frozenset:
    return frozenset(v.parent[u] if v.is_leaf(u) and u != v.root else u for u in nodes)


@dataclass(frozen=True)
class Component:
    top: int
    nodes: frozenset
    boundary: frozenset


def connected_components(v: Vtree, removed: Iterable[int]) -> list[Component]:
    """Components of the tree with ``removed`` deleted, ordered by top node."""
    removed = frozenset(removed)
    seen: set[int] = set()
    out = []
    for start in range(v.num_nodes):
        if start in removed or start in seen:
            continue
        comp = {start}
        boundary = set()
        stack = [start]
        while stack:
            u = stack.pop()
            for w in v.neighbours(u):
                if w in removed:
                    boundary.add(w)
                elif w not in comp:
                    comp.add(w)
                    stack.append(w)
        seen |= comp
        # preorder ids: the smallest id is the component's top
        out.append(Component(min(comp), frozenset(comp), frozenset(boundary)))
    return out


def trace_first_blocked(v: Vtree, sources: Iterable[int], blockers: Iterable[int]) -> frozenset:
    """Blockers hit first on paths leaving ``sources``."""
    blockers = frozenset(blockers)
    hit = set()
    seen = set()
    stack = []
    for s in sources:
        if s in blockers:
            hit.add(s)
        elif s not in seen:
            seen.add(s)
            stack.append(s)
    while stack:
        u = stack.pop()
        for w in v.neighbours(u):
            if w in blockers:
                hit.add(w)
            elif w not in seen:
                seen.add(w)
                stack.append(w)
    return frozenset(hit)


def _reaches(v: Vtree, sources: Iterable[int], sinks: Iterable[int], blockers: Iterable[int]) -> bool:
    sinks, blockers = frozenset(sinks), frozenset(blockers)
    stack = [s for s in sources if s not in blockers]
    seen = set(stack)
    while stack:
        u = stack.pop()
        if u in sinks:
            return True
        for w in v.neighbours(u):
            if w not in seen and w not in blockers:
                seen.add(w)
                stack.append(w)
    return False


def _leaves_for(v: Vtree, variables: Iterable[int]) -> list[int]:
    return [v.leaf_of(x) for x in variables]


def compute_label(source: Vtree, target: Vtree) -> LabelledVtree:
    """Valid labelling of ``target`` in the network shaped like ``source``.

    Top-down: the blocked set of a target node is split into components, each
    component gets a minimum separator between the variables going left and
    right, and each child's label is the set of blockers first reached from
    its variables.
    """
    if source.num_vars != target.num_vars:
        raise ValueError("vtrees are over different numbers of variables")
    labels: list[frozenset] = [frozenset()] * target.num_nodes
    for w in range(target.num_nodes):  # preorder: parents first
        if target.is_leaf(w):
            continue
        cw = labels[w]
        l, r = target.children(w)
        left_leaves = set(_leaves_for(source, target.scope(l)))
        right_leaves = set(_leaves_for(source, target.scope(r)))
        blocked = set(cw)
        for comp in connected_components(source, cw):
            a = comp.nodes & left_leaves
            b = comp.nodes & right_leaves
            if a and b:
                blocked |= minimum_separator(source, a, b, comp.top, comp.nodes).sep
        cl = trace_first_blocked(source, left_leaves, blocked)
        cr = trace_first_blocked(source, right_leaves, blocked)
        assert cl | cr <= blocked
        assert not _reaches(source, left_leaves, right_leaves, blocked)
        labels[l], labels[r] = cl, cr
    return LabelledVtree(target, tuple(labels))


# ---------------------------------------------------------------- validation

@dataclass
class LabellingReport:
    valid: bool
    M: int
    M_prime: int
    # per target node: (covers own variables, left condition, right condition)
    per_node: dict[int, tuple[bool, bool, bool]] = field(default_factory=dict)
    problems: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"valid": self.valid, "M": self.M, "M_prime": self.M_prime,
                "per_node": {str(w): list(p) for w, p in self.per_node.items()},
                "problems": list(self.problems)}


def validate_labelling(source: Vtree, lv: LabelledVtree) -> LabellingReport:
    target = lv.vtree
    problems = []
    if source.num_vars != target.num_vars:
        raise ValueError("vtrees are over different numbers of variables")
    if lv.labels[target.root]:
        problems.append("root label is not empty")
    for w, lab in enumerate(lv.labels):
        bad = [z for z in lab if not 0 <= z < source.num_nodes or source.is_leaf(z)]
        if bad:
            problems.append(f"label of node {w} contains non-latent nodes {sorted(bad)}")
    per_node = {}
    if not problems:
        all_leaves = set(source.leaves())
        for w in range(target.num_nodes):
            mine = set(_leaves_for(source, target.scope(w)))
            cov = not _reaches(source, mine, all_leaves - mine, lv.labels[w])
            left_ok = right_ok = True
            if not target.is_leaf(w):
                l, r = target.children(w)
                cl, cr, cw = lv.labels[l], lv.labels[r], lv.labels[w]
                ll = _leaves_for(source, target.scope(l))
                rl = _leaves_for(source, target.scope(r))
                left_ok = not _reaches(source, ll, (cr | cw) - cl, cl)
                right_ok = not _reaches(source, rl, (cl | cw) - cr, cr)
            per_node[w] = (cov, left_ok, right_ok)
            for name, ok in zip(("does not cover its variables", "left condition fails",
                                 "right condition fails"), per_node[w]):
                if not ok:
                    problems.append(f"node {w}: {name}")
    m, mp = lv.widths
    return LabellingReport(not problems, m, mp, per_node, problems)


# ---------------------------------------------------------------- contiguous vtrees

def segment_cover(v: Vtree, a: int, b: int) -> frozenset:
    """Subtree roots whose scopes partition the variable interval ``[a, b]`` (inclusive, 0-based).

    Segment-tree descent from the root: a node whose interval lies inside
    ``[a, b]`` is taken whole, otherwise the search continues into the
    children that overlap the segment.
    """
    if not v.is_contiguous():
        raise ValueError("segment cover needs a contiguous vtree")
    if not 0 <= a <= b < v.num_vars:
        raise ValueError(f"segment [{a}, {b}] is outside 0..{v.num_vars - 1}")
    out = set()
    stack = [v.root]
    while stack:
        u = stack.pop()
        lo, hi = v.interval(u)
        if hi < a or lo > b:
            continue
        if a <= lo and hi <= b:
            out.add(u)
        else:
            stack.extend(v.children(u))
    return frozenset(out)


def linear_label(source: Vtree, lo: int, hi: int) -> frozenset:
    """Two-boundary label of the interval ``[lo, hi]`` in a linear source vtree.

    Right-linear: the latents directly above ``X_lo`` and ``X_{hi+1}``; a
    left-linear source is the mirror image (above ``X_hi`` and ``X_{lo-1}``).
    Boundaries falling off either end are dropped.  The last two variables
    share a parent, which is where indexing caps.
    """
    n = source.num_vars
    right = source.is_right_linear()
    if not right and not source.is_left_linear():
        raise ValueError("source vtree is not linear")

    def up(x):
        return source.parent[source.leaf_of(x)]

    lab = set()
    if lo > 0:
        lab.add(up(lo) if right else up(lo - 1))
    if hi < n - 1:
        lab.add(up(hi + 1) if right else up(hi))
    return frozenset(lab)


def _linear_labels(source: Vtree, target: Vtree) -> list[frozenset]:
    return [linear_label(source, *target.interval(w)) for w in range(target.num_nodes)]


def contiguous_labelling(source, target: Vtree) -> LabelledVtree:
    """Labelling for contiguous source and target vtrees.

    ``source`` may be a vtree or a network built on one.  Linear sources use
    the two-boundary labels (``M' <= 3``) unless the segment cover of each
    target interval is narrower; other contiguous sources always use the
    segment cover.
    """
    source = getattr(source, "vtree", source)
    if not source.is_contiguous() or not target.is_contiguous():
        raise ValueError("contiguous labelling needs contiguous source and target vtrees")
    if source.num_vars != target.num_vars:
        raise ValueError("vtrees are over different numbers of variables")
    best = LabelledVtree(target, tuple(
        frozenset() if w == target.root else _lift(source, segment_cover(source, *target.interval(w)))
        for w in range(target.num_nodes)))
    if source.num_vars > 1 and (source.is_right_linear() or source.is_left_linear()):
        # keep whichever is narrower; the cover wins e.g. when target == source
        lin = LabelledVtree(target, tuple(_linear_labels(source, target)))
        if _width_key(lin) < _width_key(best):
            best = lin
    return best


def _width_key(lv: LabelledVtree) -> tuple[int, int, int]:
    m, mp = lv.widths
    return mp, m, sum(len(s) for s in lv.labels)


# ---------------------------------------------------------------- depth reduction

def balanced_vtree(v: Vtree) -> LabelledVtree:
    """Logarithmic-depth target vtree with a labelling of width ``M' <= 3``.

    Repeatedly removes one latent from the current piece of the source tree.
    A piece is a set of source nodes joined by contracted edges; its label is
    its boundary, the already removed latents adjacent to it.  Removing ``u``
    with contracted children ``l, r`` splits the piece into the part above
    ``u`` joined with ``l``'s side, and ``r``'s side.  Among the splits that
    keep both boundaries at two latents or fewer, the most balanced one is
    taken.  Each target node corresponds to exactly one source node.
    """
    n = v.num_vars
    # output records in preorder: [label, var, left, right, source node]
    out: list[list] = []

    def emit(label, var, src) -> int:
        out.append([label, var, -1, -1, src])
        return len(out) - 1

    root_kids = {u: v.children(u) for u in v.inner_nodes()}
    # frames: (slot to patch as (record, side) or None, piece root, kids, boundary)
    stack = [(None, v.root, root_kids, frozenset())]
    while stack:
        slot, top, kids, boundary = stack.pop()
        if v.is_leaf(top):
            w = emit(boundary, v.var[top], top)
        else:
            u, a_kids, a_top, r = _best_split(v, top, kids, boundary)
            w = emit(boundary, -1, u)
            b_nodes = _piece_nodes(r, kids)
            b_kids = {x: kids[x] for x in b_nodes if x in kids}
            a_nodes = _piece_nodes(a_top, a_kids)
            # push right first so the left piece is emitted next (preorder)
            stack.append(((w, 3), r, b_kids, _boundary(v, b_nodes)))
            stack.append(((w, 2), a_top, a_kids, _boundary(v, a_nodes)))
        if slot is not None:
            out[slot[0]][slot[1]] = w

    def nested(w):
        rec = out[w]
        return rec[1] if rec[1] >= 0 else (nested(rec[2]), nested(rec[3]))

    target = Vtree(nested(0))
    # Vtree renumbers in its own preorder, which is the emission order
    assert all(target.var[w] == out[w][1] for w in range(len(out)))
    return LabelledVtree(target, tuple(rec[0] for rec in out), tuple(rec[4] for rec in out))


def _piece_nodes(top: int, kids: dict) -> list[int]:
    nodes, stack = [], [top]
    while stack:
        x = stack.pop()
        nodes.append(x)
        stack.extend(kids.get(x, ()))
    return nodes


def _boundary(v: Vtree, nodes: Sequence[int]) -> frozenset:
    inside = set(nodes)
    return frozenset(z for x in nodes for z in v.neighbours(x) if z not in inside)


def _best_split(v: Vtree, top: int, kids: dict, boundary: frozenset):
    """Pick the removal ``(u, kept-side kids, kept-side top, split-off child)``."""
    order = _piece_nodes(top, kids)
    # contracted parent, subtree leaf counts and Euler intervals
    cpar = {top: -1}
    for x in order:
        for k in kids.get(x, ()):
            cpar[k] = x
    size = {}
    for x in reversed(order):
        size[x] = sum(size[k] for k in kids[x]) if x in kids else 1
    tin, tout, clock = {}, {}, 0
    stack = [(top, False)]
    while stack:
        x, done = stack.pop()
        if done:
            tout[x] = clock
            continue
        tin[x] = clock
        clock += 1
        stack.append((x, True))
        stack.extend((k, False) for k in kids.get(x, ()))
    inside = set(order)
    attach = {z: [x for x in v.neighbours(z) if x in inside] for z in boundary}

    def under(x, y):  # x in the contracted subtree of y
        return tin[y] <= tin[x] < tout[y]

    total = size[top]
    best = None
    for u in order:
        if u not in kids:
            continue
        near = [x for x in v.neighbours(u) if x in inside]
        for r, l in (kids[u][::-1], kids[u]):
            bnd_b = bnd_a = 0
            for z, xs in list(attach.items()) + [(u, near)]:
                if any(under(x, r) for x in xs):
                    bnd_b += 1
                if any(under(x, l) or not under(x, u) for x in xs if x != u):
                    bnd_a += 1
            if bnd_a > 2 or bnd_b > 2:
                continue
            key = (max(size[r], total - size[r]), u, r != kids[u][1])
            if best is None or key < best[0]:
                best = (key, u, l, r)
    if best is None:
        raise AssertionError("no admissible split; boundary invariant violated")
    _, u, l, r = best
    a_kids = {x: ks for x, ks in kids.items() if not under(x, u) or under(x, l)}
    if u == top:
        a_top = l
    else:
        a_top = top
        p = cpar[u]
        a_kids[p] = tuple(l if k == u else k for k in kids[p])
    return u, a_kids, a_top, r
