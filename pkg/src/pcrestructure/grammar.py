"""Probabilistic context-free grammars compiled into contiguous circuits.

The compiled circuit computes the raw derivation probability of a
length-``n`` string, so its sum weights are rule probabilities and need not
total one (mass can go to strings of other lengths).  Such circuits are
built with ``normalized=False``; pass ``renormalize=True`` to get a proper
distribution over length-``n`` strings instead.

Grammar text format, one record per line (``#`` starts a comment)::

    start: S
    terminals: a b          # optional, fixes the value order of terminals
    rule: S -> A B @ 0.7
    lex: A -> a @ 1.0
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuit import Circuit, CircuitBuilder
from .structure import renormalize as _renormalize

RULE_TOL = 1e-9


class GrammarError(ValueError):
    pass


@dataclass
class Pcfg:
    start: str
    terminals: list[str]
    binary: dict[str, list[tuple[str, str, float]]] = field(default_factory=dict)
    lexical: dict[str, list[tuple[str, float]]] = field(default_factory=dict)

    def __post_init__(self):
        self.check()

    @property
    def nonterminals(self) -> list[str]:
        return sorted(set(self.binary) | set(self.lexical) | {self.start})

    @property
    def num_rules(self) -> int:
        return sum(map(len, self.binary.values())) + sum(map(len, self.lexical.values()))

    def check(self) -> None:
        nts = set(self.binary) | set(self.lexical)
        if self.start not in nts:
            raise GrammarError(f"start symbol {self.start!r} has no rules")
        clash = nts & set(self.terminals)
        if clash:
            raise GrammarError(f"symbols used as both terminal and nonterminal: {sorted(clash)}")
        for a in nts:
            total = 0.0
            for b, c, p in self.binary.get(a, []):
                for sym in (b, c):
                    if sym not in nts:
                        raise GrammarError(f"rule {a} -> {b} {c}: {sym!r} is not a nonterminal")
                total += self._prob(p, a)
            for t, p in self.lexical.get(a, []):
                if t not in self.terminals:
                    raise GrammarError(f"rule {a} -> {t}: unknown terminal")
                total += self._prob(p, a)
            if abs(total - 1.0) > RULE_TOL:
                raise GrammarError(f"rules of {a} sum to {total}, not 1")

    @staticmethod
    def _prob(p: float, a: str) -> float:
        if not 0.0 <= p <= 1.0:
            raise GrammarError(f"rule probability {p} of {a} is outside [0, 1]")
        return p

    def encode(self, s: Sequence) -> list[int]:
        """Terminal symbols (or their indices) as variable values."""
        out = []
        for t in s:
            if isinstance(t, (int, np.integer)):
                if not 0 <= t < len(self.terminals):
                    raise GrammarError(f"terminal index {t} out of range")
                out.append(int(t))
            elif t in self.terminals:
                out.append(self.terminals.index(t))
            else:
                raise GrammarError(f"unknown terminal {t!r}")
        return out

    def to_text(self) -> str:
        lines = [f"start: {self.start}", "terminals: " + " ".join(self.terminals)]
        for a in sorted(self.binary):
            lines += [f"rule: {a} -> {b} {c} @ {p!r}" for b, c, p in self.binary[a]]
        for a in sorted(self.lexical):
            lines += [f"lex: {a} -> {t} @ {p!r}" for t, p in self.lexical[a]]
        return "\n".join(lines) + "\n"


_RULE = re.compile(r"^(\S+)\s*->\s*(\S+)\s+(\S+)\s*@\s*(\S+)$")
_LEX = re.compile(r"^(\S+)\s*->\s*(\S+)\s*@\s*(\S+)$")


def parse_grammar(text: str) -> Pcfg:
    start = None
    terminals: list[str] | None = None
    seen_terms: list[str] = []
    binary: dict[str, list] = {}
    lexical: dict[str, list] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        kind, sep, body = line.partition(":")
        body = body.strip()
        kind = kind.strip()
        if not sep:
            raise GrammarError(f"line {lineno}: expected 'kind: ...'")
        try:
            if kind == "start":
                start = body
            elif kind == "terminals":
                terminals = body.split()
            elif kind == "rule":
                m = _RULE.match(body)
                if not m:
                    raise GrammarError(f"line {lineno}: binary rule must be 'A -> B C @ p' (CNF)")
                binary.setdefault(m[1], []).append((m[2], m[3], float(m[4])))
            elif kind == "lex":
                m = _LEX.match(body)
                if not m:
                    raise GrammarError(f"line {lineno}: lexical rule must be 'A -> t @ p'")
                lexical.setdefault(m[1], []).append((m[2], float(m[3])))
                if m[2] not in seen_terms:
                    seen_terms.append(m[2])
            else:
                raise GrammarError(f"line {lineno}: unknown record {kind!r}")
        except ValueError as exc:
            if isinstance(exc, GrammarError):
                raise
            raise GrammarError(f"line {lineno}: bad probability") from None
    if start is None:
        raise GrammarError("missing 'start:' record")
    if terminals is None:
        terminals = seen_terms
    return Pcfg(start, terminals, binary, lexical)


def cyk_inside(g: Pcfg, s: Sequence) -> float:
    """Inside probability of ``s`` from the start symbol (plain CYK chart)."""
    x = g.encode(s)
    n = len(x)
    if n == 0:
        return 0.0
    nts = g.nonterminals
    chart = [[dict.fromkeys(nts, 0.0) for _ in range(n)] for _ in range(n)]
    for j, t in enumerate(x):
        for a in nts:
            chart[j][j][a] = sum(p for term, p in g.lexical.get(a, []) if g.terminals.index(term) == t)
    for length in range(2, n + 1):
        for i in range(n - length + 1):
            k = i + length - 1
            cell = chart[i][k]
            for a in nts:
                cell[a] = sum(p * chart[i][m][b] * chart[m + 1][k][c]
                              for b, c, p in g.binary.get(a, []) for m in range(i, k))
    return chart[0][n - 1][g.start]


def compile_pcfg(g: Pcfg, n: int, renormalize: bool = False) -> Circuit:
    """Circuit over ``n`` variables whose value at ``x`` is the inside probability of ``x``.

    One node per (nonterminal, span) that derives something: a leaf holding
    the lexical probabilities for spans of length one, otherwise a sum over
    (binary rule, split point) products.  Only nodes reachable from the start
    symbol are kept.
    """
    if n < 1:
        raise GrammarError("string length must be at least 1")
    nts = g.nonterminals
    k = len(g.terminals)
    b = CircuitBuilder()
    node: dict[tuple[str, int, int], int] = {}
    for j in range(n):
        for a in nts:
            probs = np.zeros(k)
            for t, p in g.lexical.get(a, []):
                probs[g.terminals.index(t)] += p
            if probs.any():
                node[(a, j, j)] = b.leaf(j, probs.tolist(), share=False)
    for length in range(2, n + 1):
        for i in range(n - length + 1):
            e = i + length - 1
            for a in nts:
                kids, ws = [], []
                for left, right, p in g.binary.get(a, []):
                    if p <= 0:
                        continue
                    for m in range(i, e):
                        lk, rk = node.get((left, i, m)), node.get((right, m + 1, e))
                        if lk is not None and rk is not None:
                            kids.append(b.prod([lk, rk]))
                            ws.append(p)
                if kids:
                    node[(a, i, e)] = b.sum(kids, ws)
    root = node.get((g.start, 0, n - 1))
    if root is None:
        raise GrammarError(f"start symbol derives no string of length {n}")
    # build() keeps only what the root reaches
    c = b.build(root, n, [k] * n, normalized=False)
    if renormalize:
        c, _ = _renormalize(c)
    return c


def random_pcfg(num_nonterminals: int, num_terminals: int, rng: np.random.Generator,
                lexical_share: float = 0.5, max_rules: int | None = None) -> Pcfg:
    """Random CNF grammar; every nonterminal gets at least one lexical rule.

    ``max_rules`` caps the total rule count by dropping random binary rules
    first and then surplus lexical ones.
    """
    if max_rules is not None and max_rules < num_nonterminals:
        raise ValueError("need at least one rule per nonterminal")
    nts = [f"N{i}" for i in range(num_nonterminals)]
    terms = [f"t{i}" for i in range(num_terminals)]
    rules = {a: [(bb, cc) for bb in nts for cc in nts if rng.random() < 0.5] or [(a, a)] for a in nts}
    lex = {a: [t for t in terms if rng.random() < 0.7] or [terms[0]] for a in nts}
    if max_rules is not None:
        pool = [(a, i) for a in nts for i in range(len(rules[a]))]
        excess = sum(map(len, rules.values())) + sum(map(len, lex.values())) - max_rules
        for a, i in sorted(pool, key=lambda _: rng.random())[:max(excess, 0)]:
            rules[a][i] = None
        rules = {a: [r for r in rs if r is not None] for a, rs in rules.items()}
        excess -= len(pool) - sum(map(len, rules.values()))
        while excess > 0:
            a = max(nts, key=lambda s: len(lex[s]))
            lex[a].pop(int(rng.integers(len(lex[a]))))
            excess -= 1
    binary, lexical = {}, {}
    for a in nts:
        share = lexical_share if rules[a] else 1.0
        wb = rng.dirichlet(np.ones(len(rules[a]))) * (1 - share) if rules[a] else []
        wl = rng.dirichlet(np.ones(len(lex[a]))) * share
        binary[a] = [(bb, cc, float(p)) for (bb, cc), p in zip(rules[a], wb)]
        lexical[a] = [(t, float(p)) for t, p in zip(lex[a], wl)]
    # exact normalization after float rounding
    for a in nts:
        total = math.fsum(p for *_, p in binary[a]) + math.fsum(p for _, p in lexical[a])
        binary[a] = [(bb, cc, p / total) for bb, cc, p in binary[a]]
        lexical[a] = [(t, p / total) for t, p in lexical[a]]
    binary = {a: r for a, r in binary.items() if r}
    return Pcfg(nts[0], terms, binary, lexical)
