"""Provenance polynomials, semiring kinds and K-explanations."""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from functools import total_ordering

from .errors import MissingAnnotation, NegationPresent
from .graph import ProvGraph
from .labels import GOAL, REL, RULE

BAR = "_bar"


class Kind(str, Enum):
    NX = "NX"
    BX = "BX"
    TRIO = "Trio"
    WHY = "Why"
    POSBOOL = "PosBool"
    WHICH = "Which"

    @classmethod
    def parse(cls, text) -> "Kind":
        if isinstance(text, Kind):
            return text
        name = str(text).strip().lower()
        for suffix in ("[x]", "(x)"):
            name = name.removesuffix(suffix)
        name = {"lineage": "which", "n": "nx", "b": "bx"}.get(name, name)
        for k in cls:
            if k.value.lower() == name:
                return k
        raise ValueError(f"unknown semiring kind {text!r}")


def _mono(factors) -> tuple:
    """Canonical monomial: sorted ((var, exponent), ...)."""
    c = Counter()
    for v, e in factors:
        c[v] += e
    return tuple(sorted((v, e) for v, e in c.items() if e))


def _expanded(mono) -> list:
    out = []
    for v, e in mono:
        out.extend([v] * e)
    return out


@total_ordering
class Polynomial:
    """Polynomial with natural coefficients, stored as {monomial: coefficient}."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms=None):
        clean = {}
        for m, c in (terms or {}).items():
            m = _mono(m) if m and not isinstance(m[0], tuple) else tuple(m)
            if c:
                clean[m] = clean.get(m, 0) + c
        self._terms = {m: c for m, c in clean.items() if c}
        self._hash = None

    @classmethod
    def zero(cls) -> "Polynomial":
        return cls()

    @classmethod
    def one(cls) -> "Polynomial":
        return cls({(): 1})

    @classmethod
    def var(cls, name: str) -> "Polynomial":
        return cls({((name, 1),): 1})

    @classmethod
    def const(cls, n: int) -> "Polynomial":
        return cls({(): n}) if n else cls()

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def variables(self) -> set:
        return {v for m in self._terms for v, _ in m}

    def is_zero(self) -> bool:
        return not self._terms

    def __add__(self, other):
        other = _coerce(other)
        t = dict(self._terms)
        for m, c in other._terms.items():
            t[m] = t.get(m, 0) + c
        return Polynomial(t)

    __radd__ = __add__

    def __mul__(self, other):
        other = _coerce(other)
        t = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = _mono(m1 + m2)
                t[m] = t.get(m, 0) + c1 * c2
        return Polynomial(t)

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, (int, str)):
            other = _coerce(other)
        return isinstance(other, Polynomial) and self._terms == other._terms

    def __lt__(self, other):
        return str(self) < str(other)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def substitute(self, values: dict) -> "Polynomial":
        """Replace variables by polynomials (or ints)."""
        out = Polynomial()
        for m, c in self._terms.items():
            term = Polynomial.const(c)
            for v, e in m:
                base = _coerce(values[v]) if v in values else Polynomial.var(v)
                for _ in range(e):
                    term = term * base
            out = out + term
        return out

    def monomials(self) -> list:
        return sorted(self._terms.items(), key=lambda mc: (-sum(e for _, e in mc[0]), _expanded(mc[0])))

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for m, c in self.monomials():
            factors = [v if e == 1 else f"{v}^{e}" for v, e in m]
            if not factors:
                parts.append(str(c))
            elif c == 1:
                parts.append("*".join(factors))
            else:
                parts.append(f"{c}*" + "*".join(factors))
        return " + ".join(parts)

    def __repr__(self):
        return f"Polynomial({str(self)!r})"

    @classmethod
    def parse(cls, text: str) -> "Polynomial":
        """Parse sums of products such as ``p^3 + 2*p*q*r`` or ``(a+b)*c``."""
        return _PolyParser(text).parse()


def _coerce(x) -> Polynomial:
    if isinstance(x, Polynomial):
        return x
    if isinstance(x, int):
        return Polynomial.const(x)
    if isinstance(x, str):
        return Polynomial.parse(x)
    raise TypeError(x)


class _PolyParser:
    _tok = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z0-9_]*)|(.))")

    def __init__(self, text):
        self.toks = []
        for m in self._tok.finditer(text):
            if m.group(1):
                self.toks.append(("num", int(m.group(1))))
            elif m.group(2):
                self.toks.append(("var", m.group(2)))
            elif m.group(3) and not m.group(3).isspace():
                self.toks.append(("op", m.group(3)))
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else ("eof", None)

    def take(self):
        t = self.peek()
        self.i += 1
        return t

    def parse(self):
        p = self.sum()
        if self.peek()[0] != "eof":
            raise ValueError(f"unexpected token {self.peek()[1]!r} in polynomial")
        return p

    def sum(self):
        p = self.product()
        while self.peek() == ("op", "+"):
            self.take()
            p = p + self.product()
        return p

    def product(self):
        p = self.power()
        while self.peek() in (("op", "*"), ("op", "·")):
            self.take()
            p = p * self.power()
        return p

    def power(self):
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            kind, n = self.take()
            if kind != "num":
                raise ValueError("exponent must be a number")
            out = Polynomial.one()
            for _ in range(n):
                out = out * base
            return out
        return base

    def atom(self):
        kind, v = self.take()
        if kind == "num":
            return Polynomial.const(v)
        if kind == "var":
            return Polynomial.var(v)
        if (kind, v) == ("op", "("):
            p = self.sum()
            if self.take() != ("op", ")"):
                raise ValueError("missing ')' in polynomial")
            return p
        raise ValueError(f"unexpected token {v!r} in polynomial")


# -- normal forms ----------------------------------------------------------------

def drop_dual_pairs(poly: Polynomial) -> Polynomial:
    """Apply x * x_bar = 0."""
    keep = {}
    for m, c in poly.terms.items():
        names = {v for v, _ in m}
        if any(v + BAR in names for v in names):
            continue
        keep[m] = c
    return Polynomial(keep)


def normalize(poly: Polynomial, kind) -> Polynomial:
    kind = Kind.parse(kind)
    terms = poly.terms
    if kind is Kind.NX:
        return poly
    if kind is Kind.BX:
        return Polynomial({m: 1 for m in terms})
    if kind is Kind.TRIO:
        out = {}
        for m, c in terms.items():
            k = tuple((v, 1) for v, _ in m)
            out[k] = out.get(k, 0) + c
        return Polynomial(out)
    sets = {frozenset(v for v, _ in m) for m in terms}
    if kind is Kind.WHY:
        return Polynomial({tuple(sorted((v, 1) for v in s)): 1 for s in sets})
    if kind is Kind.POSBOOL:
        minimal = {s for s in sets if not any(o < s for o in sets)}
        return Polynomial({tuple(sorted((v, 1) for v in s)): 1 for s in minimal})
    if kind is Kind.WHICH:
        vs = set().union(*sets) if sets else set()
        if not sets:
            return Polynomial()
        if not vs:
            return Polynomial.one()
        return Polynomial({((v, 1),): 1 for v in vs})
    raise ValueError(kind)


# -- extraction --------------------------------------------------------------------

def _is_edb_leaf(graph: ProvGraph, node) -> bool:
    return node.kind == REL and not graph.successors[node]


def _check_positive(graph: ProvGraph, nodes):
    for n in nodes:
        if n.status != "T":
            raise NegationPresent(f"node {n} is not successful; only positive explanations are supported")
        if n.kind == GOAL:
            for c in graph.successors[n]:
                if c.status != n.status:
                    raise NegationPresent(f"goal {n} is negated")


def _lookup_annotation(annots, node):
    v = annots.get((node.name, node.args))
    if v is None:
        raise MissingAnnotation(f"no annotation for {node.name}({','.join(node.args)})")
    return v


def _root_node(expl: ProvGraph, root):
    if hasattr(root, "kind"):
        return root
    pred, args = root
    n = expl.tuple_node(pred, args)
    if n is None:
        raise KeyError(f"no tuple node {pred}{tuple(args)}")
    return n


def extract_polynomial(expl: ProvGraph, root, annots: dict) -> Polynomial:
    """N[X] polynomial of ``root``: IDB tuple = +, rule = *, goal = +, leaves = annotations."""
    start = _root_node(expl, root)
    sub = expl.reachable([start])
    _check_positive(sub, sub.nodes)
    memo = {}

    def value(n):
        if n in memo:
            return memo[n]
        kids = sub.successors[n]
        if _is_edb_leaf(sub, n):
            v = Polynomial.var(_lookup_annotation(annots, n))
        elif n.kind == RULE:
            v = Polynomial.one()
            for c in kids:
                v = v * value(c)
        else:
            v = Polynomial.zero()
            for c in kids:
                v = v + value(c)
            if n.kind == GOAL and not kids:
                v = Polynomial.one()
        memo[n] = v
        return v

    return _with_stack(lambda: value(start))


def _with_stack(fn):
    import sys
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 20000))
    try:
        return fn()
    finally:
        sys.setrecursionlimit(limit)


# -- operator graphs ------------------------------------------------------------------

@dataclass(frozen=True)
class OpNode:
    id: str
    op: str            # "+", "*" or "var"
    label: str         # variable name for leaves, source node label otherwise
    children: tuple    # child ids, duplicates allowed


@dataclass(frozen=True)
class OpGraph:
    nodes: dict        # id -> OpNode
    root: str

    def read(self, kind=Kind.NX) -> Polynomial:
        """Evaluate the graph in the given semiring."""
        kind = Kind.parse(kind)
        memo = {}

        def value(i):
            if i in memo:
                return memo[i]
            n = self.nodes[i]
            if n.op == "var":
                v = Polynomial.var(n.label)
            elif n.op == "*":
                v = Polynomial.one()
                for c in n.children:
                    v = v * value(c)
            else:
                v = Polynomial.zero()
                for c in n.children:
                    v = v + value(c)
            v = normalize(v, kind)
            memo[i] = v
            return v

        return _with_stack(lambda: value(self.root))

    def reachable_ids(self) -> list:
        seen, order, stack = set(), [], [self.root]
        while stack:
            i = stack.pop()
            if i in seen:
                continue
            seen.add(i)
            order.append(i)
            stack.extend(self.nodes[i].children)
        return order

    def size(self) -> int:
        """Operator nodes plus leaf occurrences (each reference to a leaf counts)."""
        total = 0
        for i in self.reachable_ids():
            n = self.nodes[i]
            if n.op != "var":
                total += 1 + sum(1 for c in n.children if self.nodes[c].op == "var")
        return total

    def factorized(self) -> str:
        """Compact expression: single-child operators elided, children sorted."""
        memo = {}

        def text(i):
            if i in memo:
                return memo[i]
            n = self.nodes[i]
            if n.op == "var":
                s = n.label
            else:
                parts = [text(c) for c in n.children]
                if n.op == "*":
                    parts = [q for q in parts if q != "1"]
                if not parts:
                    s = "1" if n.op == "*" else "0"
                elif len(parts) == 1:
                    s = parts[0]
                elif n.op == "+":
                    s = "+".join(sorted(parts))
                else:
                    counts = Counter(_wrap(p) for p in parts)
                    s = "*".join(f"{p}^{k}" if k > 1 else p for p, k in sorted(counts.items()))
            memo[i] = s
            return s

        return _with_stack(lambda: text(self.root))

    def to_dot(self) -> str:
        out = ["digraph semiring {"]
        for i in sorted(self.reachable_ids()):
            n = self.nodes[i]
            if n.op == "var":
                out.append(f'  "{i}" [label="{n.label}", shape=ellipse];')
            else:
                sym = "+" if n.op == "+" else "·"
                out.append(f'  "{i}" [label="{sym}", shape=circle];')
        for i in sorted(self.reachable_ids()):
            for c in self.nodes[i].children:
                out.append(f'  "{i}" -> "{c}";')
        out.append("}")
        return "\n".join(out) + "\n"


def _wrap(s: str) -> str:
    depth = 0
    for ch in s:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "+" and depth == 0:
            return f"({s})"
    return s


class _Builder:
    def __init__(self):
        self.nodes = {}

    def add(self, op, label, children, ident=None):
        ident = ident or f"n{len(self.nodes)}"
        self.nodes[ident] = OpNode(ident, op, label, tuple(children))
        return ident


def _nx_graph(sub: ProvGraph, start, annots, drop_goals: bool) -> OpGraph:
    b = _Builder()
    ids = {}

    def build(n):
        if n in ids:
            return ids[n]
        kids = sub.successors[n]
        if _is_edb_leaf(sub, n):
            i = b.add("var", _lookup_annotation(annots, n), (), str(n))
        elif n.kind == RULE:
            ch = []
            for g in kids:
                if drop_goals:
                    ch.extend(build(t) for t in sub.successors[g])
                else:
                    ch.append(build(g))
            i = b.add("*", str(n), ch, str(n))
        elif n.kind == GOAL and not kids:
            # comparison goal: empty product
            i = b.add("*", str(n), [], str(n))
        else:
            i = b.add("+", str(n), [build(c) for c in kids], str(n))
        ids[n] = i
        return i

    root = _with_stack(lambda: build(start))
    return OpGraph(b.nodes, root)


def _canonical(graph: OpGraph, dedupe_sums: bool) -> OpGraph:
    """Share structurally identical subgraphs; optionally make sums idempotent."""
    sig, rep, nodes = {}, {}, {}

    def visit(i):
        if i in rep:
            return rep[i]
        n = graph.nodes[i]
        kids = [visit(c) for c in n.children]
        if n.op == "var":
            key = ("var", n.label)
        else:
            if n.op == "+" and dedupe_sums:
                kids = sorted(set(kids))
            else:
                kids = sorted(kids)
            key = (n.op, tuple(kids))
        if key not in sig:
            sig[key] = i
            nodes[i] = OpNode(i, n.op, n.label, tuple(kids))
        rep[i] = sig[key]
        return rep[i]

    root = _with_stack(lambda: visit(graph.root))
    return OpGraph(nodes, root)


def _absorb(graph: OpGraph) -> OpGraph:
    """Drop product children of a sum whose PosBool value is absorbed by a sibling."""
    values = {}

    def val(i):
        if i not in values:
            values[i] = OpGraph(graph.nodes, i).read(Kind.POSBOOL)
        return values[i]

    def absorbed(a: Polynomial, b: Polynomial) -> bool:
        sa = [frozenset(v for v, _ in m) for m in a.terms]
        sb = [frozenset(v for v, _ in m) for m in b.terms]
        return all(any(t <= s for t in sb) for s in sa)

    nodes = dict(graph.nodes)
    for i, n in graph.nodes.items():
        if n.op != "+" or len(n.children) < 2:
            continue
        kids = list(n.children)
        keep = []
        for c in kids:
            vc = val(c)
            dominated = any(
                d != c and absorbed(vc, val(d)) and (val(d) != vc or d < c)
                for d in kids
            )
            if not dominated:
                keep.append(c)
        nodes[i] = OpNode(i, n.op, n.label, tuple(keep))
    return OpGraph(nodes, graph.root)


def _which_graph(sub: ProvGraph, start, annots) -> OpGraph:
    b = _Builder()
    ids = {}

    def tuples_below(n):
        out = set()
        for r in sub.successors[n]:
            if r.kind == REL:
                out.add(r)
                continue
            for g in sub.successors[r]:
                out.update(sub.successors[g])
        return out

    def build(n):
        if n in ids:
            return ids[n]
        if _is_edb_leaf(sub, n):
            i = b.add("var", _lookup_annotation(annots, n), (), str(n))
        else:
            i = b.add("+", str(n), sorted(build(t) for t in tuples_below(n)), str(n))
        ids[n] = i
        return i

    root = _with_stack(lambda: build(start))
    return OpGraph(b.nodes, root)


def transform_graph(expl: ProvGraph, kind, annots: dict, root=None) -> OpGraph:
    """K-explanation of ``root`` (default: the unique source node of ``expl``)."""
    kind = Kind.parse(kind)
    if root is None:
        targets = {d for _, d in expl.edges}
        sources = sorted(n for n in expl.nodes if n not in targets and n.kind == REL)
        if len(sources) != 1:
            raise ValueError("explanation has several roots; pass root explicitly")
        start = sources[0]
    else:
        start = _root_node(expl, root)
    sub = expl.reachable([start])
    _check_positive(sub, sub.nodes)
    if kind is Kind.WHICH:
        return _which_graph(sub, start, annots)
    drop = kind in (Kind.TRIO, Kind.WHY, Kind.POSBOOL)
    g = _nx_graph(sub, start, annots, drop)
    if kind in (Kind.NX, Kind.TRIO):
        return g
    g = _canonical(g, dedupe_sums=True)
    if kind is Kind.WHY or kind is Kind.POSBOOL:
        g = _set_products(g, leaves_only=kind is Kind.WHY)
    if kind is Kind.POSBOOL:
        g = _canonical(_absorb(g), dedupe_sums=True)
    return g


def _set_products(graph: OpGraph, leaves_only: bool) -> OpGraph:
    # a repeated sum is only idempotent under PosBool; under Why, A*A != A
    nodes = {}
    for i, n in graph.nodes.items():
        kids = n.children
        if n.op == "*":
            seen, kids = set(), []
            for c in n.children:
                if c in seen and (graph.nodes[c].op == "var" or not leaves_only):
                    continue
                seen.add(c)
                kids.append(c)
            kids = tuple(sorted(kids))
        nodes[i] = OpNode(i, n.op, n.label, kids)
    return _canonical(OpGraph(nodes, graph.root), dedupe_sums=True)


def explanation_size(expl: ProvGraph) -> int:
    """Node count of the expression an explanation encodes: one operator per
    IDB tuple and per rule, plus one leaf per rule goal over an EDB tuple."""
    total = 0
    succ = expl.successors
    for n in expl.nodes:
        if n.kind == REL and succ[n]:
            total += 1
        elif n.kind == RULE:
            total += 1
            for g in succ[n]:
                total += sum(1 for c in succ[g] if c.kind == REL and not succ[c])
    return total
