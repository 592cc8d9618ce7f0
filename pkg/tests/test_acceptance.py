"""Acceptance criteria 1-11, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines are
printed even when output capture is on.
"""
import itertools
import math
import time

import numpy as np
import pytest

from pcrestructure.bn import pc_to_bn
from pcrestructure.circuit import all_assignments, evaluate_batch, hidden_state_size
from pcrestructure.generate import (random_deterministic_pc, random_hmm, random_obdd,
                                    random_structured_pc)
from pcrestructure.grammar import compile_pcfg, cyk_inside, random_pcfg
from pcrestructure.labelling import (_lift, balanced_vtree, compute_label, contiguous_labelling,
                                     minimum_separator, segment_cover, validate_labelling)
from pcrestructure.logical import from_logical, to_logical
from pcrestructure.oracle import (bn_observed_marginal, check_equivalence, check_proportional,
                                  induced_tree_sum, joint_table, relative_deviation)
from pcrestructure.product import multiply, multiply_onthefly
from pcrestructure.restructure import restructure_with_report
from pcrestructure.structure import check_determinism
from pcrestructure.vtree import Vtree

# one constant for every size bound below
C0 = 3.0
TOL = 1e-9


@pytest.fixture
def verdict(capsys):
    def emit(k: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {k}: {detail}")
        assert ok, detail
    return emit


def rng_for(k: int) -> np.random.Generator:
    return np.random.default_rng(1000 + k)


def separates(v, A, B, S):
    S = set(S)
    seen = {a for a in A if a not in S}
    stack = list(seen)
    while stack:
        u = stack.pop()
        if u in B:
            return False
        for w in v.neighbours(u):
            if w not in seen and w not in S:
                seen.add(w)
                stack.append(w)
    return True


def smallest_latent_separator(v, A, B):
    # a separating leaf can always be swapped for its parent, so latents suffice
    latents = v.inner_nodes()
    for k in range(len(latents) + 1):
        if any(separates(v, A, B, S) for S in itertools.combinations(latents, k)):
            return k


def all_bracketings(lo, hi):
    if lo == hi:
        yield lo
        return
    for m in range(lo, hi):
        for left in all_bracketings(lo, m):
            for right in all_bracketings(m + 1, hi):
                yield (left, right)


def test_1_bn_faithfulness(verdict):
    rng = rng_for(1)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        n, h = int(rng.integers(2, 9)), int(rng.integers(1, 5))
        v = Vtree.random(n, rng)
        c = random_structured_pc(v, h, rng, domains=(2, 3))
        worst = max(worst, relative_deviation(bn_observed_marginal(pc_to_bn(c, v)), joint_table(c)).max())
    dt = time.perf_counter() - t0
    verdict(1, worst <= TOL and dt < 60, f"200 circuits, max rel dev {worst:.2e}, {dt:.1f}s")


def test_2_restructure_correctness(verdict):
    rng = rng_for(2)
    t0 = time.perf_counter()
    worst, invalid = 0.0, 0
    for _ in range(200):
        n, h = int(rng.integers(2, 9)), int(rng.integers(1, 5))
        src, tgt = Vtree.random(n, rng), Vtree.random(n, rng)
        c = random_structured_pc(src, h, rng, domains=(2, 3))
        lw = compute_label(src, tgt)
        invalid += not validate_labelling(src, lw).valid
        out, _ = restructure_with_report(c, src, lw)
        worst = max(worst, check_equivalence(c, out)[0])
    dt = time.perf_counter() - t0
    verdict(2, worst <= TOL and invalid == 0 and dt < 300,
            f"200 pairs, max rel dev {worst:.2e}, {invalid} invalid labellings, {dt:.1f}s")


def test_3_linear_source_width(verdict):
    rng = rng_for(3)
    widest, targets = 0, 0
    # every contiguous target up to 8 variables, random ones beyond
    for n in range(1, 17):
        trees = (Vtree(t) for t in all_bracketings(0, n - 1)) if n <= 8 else \
            (Vtree.random(n, rng, contiguous=True) for _ in range(40))
        for tgt in trees:
            for src in (Vtree.right_linear(n), Vtree.left_linear(n)):
                rep = validate_labelling(src, contiguous_labelling(src, tgt))
                assert rep.valid
                widest = max(widest, rep.M_prime)
                targets += 1
    fitted = 0.0
    for _ in range(60):
        n, h = int(rng.integers(2, 17)), int(rng.integers(2, 5))
        src = Vtree.right_linear(n) if rng.random() < 0.5 else Vtree.left_linear(n)
        c = random_structured_pc(src, h, rng, domains=(2, 3))
        h_src = hidden_state_size(c, src)
        out, _ = restructure_with_report(c, src, contiguous_labelling(src, Vtree.random(n, rng, contiguous=True)))
        fitted = max(fitted, out.size / (n * h_src ** 3))
    verdict(3, widest <= 3 and fitted <= C0,
            f"{targets} (source, target) pairs, max M' {widest}; fitted c0 {fitted:.3f} (bound {C0})")


def test_4_segment_cover(verdict):
    rng = rng_for(4)
    checked, worst_ratio = 0, 0.0
    ok = True
    for depth in range(1, 7):
        trees = 0
        while trees < 5:
            v = Vtree.random(int(rng.integers(depth + 1, 2 ** depth + 1)), rng, contiguous=True)
            if v.depth != depth:
                continue
            trees += 1
            n = v.num_vars
            for a in range(n):
                for b in range(a, n):
                    cover = segment_cover(v, a, b)
                    scopes = [v.scope(u) for u in cover]
                    inside = {v.leaf_of(x) for x in range(a, b + 1)}
                    ok &= sum(map(len, scopes)) == b - a + 1
                    ok &= frozenset().union(*scopes) == frozenset(range(a, b + 1))
                    ok &= len(cover) <= 4 * v.depth
                    ok &= separates(v, inside, set(v.leaves()) - inside, _lift(v, cover))
                    worst_ratio = max(worst_ratio, len(cover) / v.depth)
                    checked += 1
    verdict(4, bool(ok), f"{checked} segments on 30 trees of depth 1..6, max |cover|/depth {worst_ratio:.2f}")


def test_5_minimum_separator(verdict):
    rng = rng_for(5)
    bad = []
    for trial in range(500):
        n = int(rng.integers(2, 14))  # at most 12 latents
        v = Vtree.random(n, rng)
        side = rng.integers(0, 3, size=n)  # 0: A, 1: B, 2: neither
        A = {v.leaf_of(x) for x in range(n) if side[x] == 0}
        B = {v.leaf_of(x) for x in range(n) if side[x] == 1}
        res = minimum_separator(v, A, B, lift=False)
        lifted = minimum_separator(v, A, B)
        top = {v.root}
        fine = (separates(v, A, B, res.sep)
                and len(res.sep) == smallest_latent_separator(v, A, B)
                and separates(v, A, B, lifted.sep) and len(lifted.sep) == len(res.sep)
                and separates(v, A, B | top, res.sep_a)
                and separates(v, B, A | top, res.sep_b)
                and len(res.sep_a) == smallest_latent_separator(v, A, B | top)
                and len(res.sep_b) == smallest_latent_separator(v, B, A | top))
        if not fine:
            bad.append(trial)
    verdict(5, not bad, f"500 trees, {len(bad)} failures {bad[:5]}")


def test_6_depth_reduction(verdict):
    rng = rng_for(6)
    t0 = time.perf_counter()
    ok, rows, fitted = True, [], 0.0
    for n in (8, 16, 32, 64):
        for h in (2, 4):
            src = Vtree.right_linear(n)
            c = random_hmm(n, h, rng)
            lw = balanced_vtree(src)
            out, rep = restructure_with_report(c, src, lw)
            bound = math.ceil(math.log(n, 1.5)) + 2
            fitted = max(fitted, out.size / (n * h ** 3))
            if n <= 10:
                dev = check_equivalence(c, out)[0]
            else:
                X = np.where(rng.random((1000, n)) < 0.5, -1, rng.integers(0, 2, (1000, n)))
                dev = relative_deviation(evaluate_batch(out, X), evaluate_batch(c, X)).max()
            ok &= lw.vtree.depth <= bound and rep.M_prime <= 3 and out.size <= C0 * n * h ** 3 and dev <= TOL
            rows.append(f"n={n} h={h} depth {lw.vtree.depth}/{bound} M'={rep.M_prime} dev {dev:.1e}")
    dt = time.perf_counter() - t0
    verdict(6, bool(ok) and dt < 300, "; ".join(rows) + f"; fitted c0 {fitted:.3f}; {dt:.1f}s")


def test_7_multiplication(verdict):
    rng = rng_for(7)
    worst, fitted = 0.0, 0.0
    ok = True
    for _ in range(100):
        n, h = int(rng.integers(1, 7)), int(rng.integers(1, 4))
        va = Vtree.right_linear(n) if rng.random() < 0.5 else Vtree.left_linear(n)
        vb = Vtree.random(n, rng, contiguous=True)
        a = random_structured_pc(va, h, rng, domains=(2, 3))
        b = random_structured_pc(vb, h, rng, domains=a.domains)
        p1, z1 = multiply(a, va, b, vb)
        p2, z2 = multiply_onthefly(a, b, va)
        d1, d2 = check_proportional(p1, a, b)[1], check_proportional(p2, a, b)[1]
        agree = check_equivalence(p1, p2)[0]
        worst = max(worst, d1, d2, agree, abs(z1 - z2) / max(z1, z2))
        bound = max(a.size, 1) ** 2 * max(b.size, 1)  # a one-leaf circuit has no edges
        fitted = max(fitted, p1.size / bound, p2.size / bound)
    ok = worst <= TOL and fitted <= C0
    verdict(7, ok, f"100 pairs, max deviation {worst:.2e}, fitted c0 {fitted:.3f} (bound {C0})")


def test_8_pcfg(verdict):
    rng = rng_for(8)
    worst, fitted, strings = 0.0, 0.0, 0
    for _ in range(20):
        g = random_pcfg(int(rng.integers(1, 7)), int(rng.integers(1, 4)), rng, max_rules=12)
        assert len(g.nonterminals) <= 6 and g.num_rules <= 12
        for n in range(1, 5):
            try:
                c = compile_pcfg(g, n)
            except ValueError:
                continue  # no derivation of this length
            X = all_assignments(c.domains)
            ref = np.array([cyk_inside(g, list(x)) for x in X])
            worst = max(worst, relative_deviation(evaluate_batch(c, X), ref).max())
            fitted = max(fitted, c.size / (g.num_rules * n ** 3))
            strings += len(X)
    verdict(8, worst <= TOL and fitted <= C0,
            f"20 grammars, {strings} strings, max rel dev {worst:.2e}, fitted c0 {fitted:.3f}")


def test_9_determinism(verdict):
    rng = rng_for(9)
    failures = 0
    for _ in range(50):
        n = int(rng.integers(2, 8))
        src = Vtree.random(n, rng)
        c = random_deterministic_pc(src, int(rng.integers(1, 4)), rng, domains=(2, 3))
        assert check_determinism(c) is True
        out, _ = restructure_with_report(c, src, compute_label(src, Vtree.random(n, rng)))
        failures += check_determinism(out) is not True
    verdict(9, failures == 0, f"50 deterministic circuits, {failures} lost determinism")


def test_10_logical_bridge(verdict):
    rng = rng_for(10)
    mismatches = []
    for _ in range(20):
        n = int(rng.integers(2, 11))
        lc = random_obdd(n, rng)
        src, tgt = Vtree.right_linear(n), Vtree.right_linear(list(range(n))[::-1])
        out, _ = restructure_with_report(from_logical(lc), src, compute_label(src, tgt))
        before, after = lc.model_count(), to_logical(out).model_count()
        if before != after:
            mismatches.append((before, after))
    verdict(10, not mismatches, f"20 OBDDs up to 10 variables, mismatched counts {mismatches}")


def test_11_induced_trees(verdict):
    rng = rng_for(11)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 5))
        c = random_structured_pc(Vtree.random(n, rng), int(rng.integers(1, 3)), rng, domains=(2, 3))
        X = all_assignments(c.domains)
        ref = np.array([induced_tree_sum(c, x) for x in X])
        worst = max(worst, relative_deviation(evaluate_batch(c, X), ref).max())
    verdict(11, worst <= TOL, f"100 circuits, max rel dev {worst:.2e}")
