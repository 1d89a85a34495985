"""Provenance graphs: the data model, a brute-force constructor, question
matching and explanation extraction."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property

from .datalog.evaluate import compare, evaluate3
from .datalog.instance import DomainAssignment, Instance
from .datalog.syntax import Comparison, Const, Program, Question, Var
from .errors import ConstantOutsideDomain, DomainTooLarge, NotUndetermined
from .labels import GOAL, REL, RULE, Node, parse_node

INVERT = {"T": "F", "F": "T", "U": "U"}

DEFAULT_NODE_CAP = 10**6


def meet(statuses) -> str:
    """Conjunction in three-valued logic."""
    out = "T"
    for s in statuses:
        if s == "F":
            return "F"
        if s == "U":
            out = "U"
    return out


@dataclass(frozen=True)
class ProvGraph:
    nodes: frozenset
    edges: frozenset
    # keys of goal nodes whose literal is negated; needed to re-derive
    # statuses after resolving undetermined facts
    negated_goals: frozenset = field(default=frozenset(), compare=False)

    @classmethod
    def from_edges(cls, edges, extra_nodes=(), negated_goals=frozenset()):
        edges = frozenset(edges)
        nodes = set(extra_nodes)
        for s, d in edges:
            nodes.add(s)
            nodes.add(d)
        return cls(frozenset(nodes), edges, frozenset(negated_goals))

    @cached_property
    def successors(self) -> dict:
        out = {n: [] for n in self.nodes}
        for s, d in self.edges:
            out[s].append(d)
        for v in out.values():
            v.sort()
        return out

    @cached_property
    def by_key(self) -> dict:
        return {n.key: n for n in self.nodes}

    def find(self, kind, name, args):
        return self.by_key.get((kind, name, tuple(args)))

    def tuple_node(self, pred, args):
        return self.find(REL, pred, args)

    def count(self, kind=None, status=None) -> int:
        return sum(1 for n in self.nodes if (kind is None or n.kind == kind) and (status is None or n.status == status))

    def reachable(self, roots) -> "ProvGraph":
        """Subgraph induced by everything reachable from ``roots``."""
        seen, stack = set(), [r for r in roots if r in self.nodes]
        while stack:
            n = stack.pop()
            if n in seen:
                continue
            seen.add(n)
            stack.extend(self.successors[n])
        edges = frozenset((s, d) for s, d in self.edges if s in seen)
        keys = {n.key for n in seen}
        neg = frozenset(k for k in self.negated_goals if k in keys)
        return ProvGraph(frozenset(seen), edges, neg)

    def edge_lines(self) -> list:
        return sorted(f"{s} -> {d}" for s, d in self.edges)

    def to_edgelist(self) -> str:
        lines = self.edge_lines()
        isolated = sorted(str(n) for n in self.nodes if not any(n in e for e in self.edges))
        return "".join(line + "\n" for line in lines + isolated)

    def to_json(self) -> str:
        data = {
            "nodes": sorted(str(n) for n in self.nodes),
            "edges": [[str(s), str(d)] for s, d in sorted(self.edges)],
            "negatedGoals": sorted(f"{k}:{n}({','.join(a)})" for k, n, a in self.negated_goals),
        }
        return json.dumps(data, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ProvGraph":
        data = json.loads(text)
        nodes = {parse_node(s) for s in data.get("nodes", ())}
        edges = {(parse_node(s), parse_node(d)) for s, d in data.get("edges", ())}
        neg = set()
        for s in data.get("negatedGoals", ()):
            neg.add(parse_node(s + ":T").key)
        return cls.from_edges(edges, nodes, neg)

    def to_dot(self, name: str = "provenance") -> str:
        return to_dot(self.nodes, self.edges, name)


_FILL = {
    "T": ("green", "black"),
    "W": ("green", "black"),
    "F": ("darkred", "white"),
    "L": ("darkred", "white"),
    "U": ("lightyellow", "black"),
}


def display_text(node: Node) -> str:
    args = ",".join(node.args)
    if node.kind == GOAL:
        rid, j = node.name.rsplit(".", 1)
        return f"g{j}^{rid}({args})"
    if node.kind == "NOT_REL":
        return f"¬{node.name}({args})"
    if node.kind == "FACT":
        return f"r_{node.name}({args})"
    return f"{node.name}({args})"


def _dot_quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(nodes, edges, name="provenance") -> str:
    out = [f"digraph {name} {{", "  node [style=filled];"]
    for n in sorted(nodes, key=str):
        fill, font = _FILL.get(n.status, ("white", "black"))
        if n.kind == RULE:
            shape = 'shape=box'
        elif n.kind == GOAL:
            shape = 'shape=box, style="rounded,filled"'
        else:
            shape = "shape=ellipse"
        out.append(
            f"  {_dot_quote(str(n))} [label={_dot_quote(display_text(n))}, {shape}, "
            f"fillcolor={fill}, fontcolor={font}];"
        )
    for s, d in sorted(edges, key=lambda e: (str(e[0]), str(e[1]))):
        out.append(f"  {_dot_quote(str(s))} -> {_dot_quote(str(d))};")
    out.append("}")
    return "\n".join(out) + "\n"


# -- domains -----------------------------------------------------------------

def complete_domains(program: Program, dom: DomainAssignment) -> DomainAssignment:
    """Add IDB attribute domains: each head position gets the union of the
    domains of the body attributes its variable binds to (or the constant)."""
    extra = {}
    current = dom
    for pred in program.topological_order():
        arity = program.arities()[pred]
        sets = [set() for _ in range(arity)]
        for rule in program.rules_for(pred):
            for i, t in enumerate(rule.head.args):
                if isinstance(t, Const):
                    sets[i].add(t.value)
                    continue
                for _, lit in rule.relational():
                    for k, u in enumerate(lit.atom.args):
                        if u == t:
                            sets[i] |= current[(lit.atom.pred, k)]
        for i, s in enumerate(sets):
            extra[(pred, i)] = frozenset(s)
        current = dom.extended(extra)
    return dom.extended(extra)


def variable_ranges(rule, dom: DomainAssignment) -> list:
    """Domain-grounded range of each rule variable: the intersection of the
    domains of all attributes it binds to."""
    ranges = []
    for v in rule.variables():
        rng = None
        for _, lit in rule.relational():
            for k, u in enumerate(lit.atom.args):
                if isinstance(u, Var) and u.name == v:
                    d = dom[(lit.atom.pred, k)]
                    rng = set(d) if rng is None else rng & d
        ranges.append(sorted(rng or ()))
    return ranges


def ground(term, env):
    return env[term.name] if isinstance(term, Var) else term.value


def tup_of(program: Program, dom: DomainAssignment, pred: str):
    arity = program.arities()[pred]
    return itertools.product(*(sorted(dom[(pred, i)]) for i in range(arity)))


# -- full graph ----------------------------------------------------------------

def build_full_graph(program: Program, instance: Instance, dom: DomainAssignment,
                     node_cap: int = DEFAULT_NODE_CAP) -> ProvGraph:
    """Materialize PG(P, I) by enumerating every domain-grounded derivation."""
    dom = complete_domains(program, dom)
    arities = program.arities()
    budget = 0
    for pred, n in arities.items():
        size = 1
        for i in range(n):
            size *= len(dom[(pred, i)])
        budget += size
    rule_ranges = {}
    for rule in program.rules:
        rng = variable_ranges(rule, dom)
        rule_ranges[rule.id] = rng
        size = 1
        for r in rng:
            size *= len(r)
        budget += size * (1 + len(rule.body))
    if budget > node_cap:
        raise DomainTooLarge(f"full graph would need about {budget} nodes (cap {node_cap})")

    status = evaluate3(program, instance)
    nodes, edges, negated = set(), set(), set()
    for pred in arities:
        for t in tup_of(program, dom, pred):
            nodes.add(Node(REL, pred, t, status[(pred, t)]))

    for rule in program.rules:
        names = rule.variables()
        for values in itertools.product(*rule_ranges[rule.id]):
            env = dict(zip(names, values))
            goals = []
            for j, item in enumerate(rule.body, 1):
                gid = f"{rule.id}.{j}"
                if isinstance(item, Comparison):
                    l, r = ground(item.left, env), ground(item.right, env)
                    gs = "T" if compare(l, item.op, r) else "F"
                    goals.append((Node(GOAL, gid, (l, r), gs), None))
                    continue
                t = tuple(ground(a, env) for a in item.atom.args)
                ts = status[(item.atom.pred, t)]
                gs = INVERT[ts] if item.negated else ts
                g = Node(GOAL, gid, t, gs)
                if item.negated:
                    negated.add(g.key)
                goals.append((g, Node(REL, item.atom.pred, t, ts)))
            rs = meet(g.status for g, _ in goals)
            head_t = tuple(ground(a, env) for a in rule.head.args)
            hs = status[(rule.head.pred, head_t)]
            if rs == "F" and hs == "T":
                continue
            head = Node(REL, rule.head.pred, head_t, hs)
            rnode = Node(RULE, rule.id, tuple(values), rs)
            nodes.update((head, rnode))
            edges.add((head, rnode))
            for g, child in goals:
                if rs == "F" and g.status == "T":
                    continue
                nodes.add(g)
                edges.add((rnode, g))
                if child is not None:
                    nodes.add(child)
                    edges.add((g, child))
    return ProvGraph(frozenset(nodes), frozenset(edges), frozenset(negated))


# -- questions -----------------------------------------------------------------

def check_pattern(question: Question, program: Program, dom: DomainAssignment, instance=None):
    atom = question.atom
    if atom.pred not in program.idb:
        raise ValueError(f"{atom.pred} is not an IDB predicate of the program")
    arity = program.arities()[atom.pred]
    if arity != atom.arity:
        from .errors import ArityMismatch
        raise ArityMismatch(f"question uses {atom.pred} with arity {atom.arity}, program uses {arity}")
    full = complete_domains(program, dom)
    for i, t in enumerate(atom.args):
        if isinstance(t, Const) and t.value not in full[(atom.pred, i)]:
            name = instance.attribute_name(atom.pred, i) if instance else f"{atom.pred}.{i + 1}"
            raise ConstantOutsideDomain(name, t.value)
    return full


def pattern_matches(atom, tup) -> bool:
    env = {}
    for t, c in zip(atom.args, tup):
        if isinstance(t, Const):
            if t.value != c:
                return False
        elif env.setdefault(t.name, c) != c:
            return False
    return True


def match(question: Question, program: Program, instance: Instance, dom: DomainAssignment) -> set:
    """Ground atoms (pred, tuple) matched by the question.

    Why matches tuples with status T or U, WhyNot tuples with status F or U.
    """
    full = check_pattern(question, program, dom, instance)
    status = evaluate3(program, instance)
    pred = question.atom.pred
    wanted = ("T", "U") if question.is_why else ("F", "U")
    out = set()
    if question.is_why:
        cands = [t for (p, t) in status if p == pred]
    else:
        cands = tup_of(program, full, pred)
    for t in cands:
        if pattern_matches(question.atom, t) and status[(pred, t)] in wanted:
            out.add((pred, t))
    return out


def extract_explanation(graph: ProvGraph, matched) -> ProvGraph:
    """Everything reachable from the matched tuple nodes."""
    roots = []
    for pred, t in matched:
        n = graph.tuple_node(pred, t)
        if n is None:
            raise KeyError(f"no tuple node for {pred}{tuple(t)}")
        roots.append(n)
    return graph.reachable(roots)


# -- undetermined facts --------------------------------------------------------

def _choice_key(k):
    if isinstance(k, Node):
        return k.key
    if isinstance(k, str):
        text = k if k.count(":") >= 2 else k + ":U"
        if not text.startswith(REL + ":"):
            text = f"{REL}:{text}"
        return parse_node(text).key
    pred, t = k
    return (REL, pred, tuple(t))


def resolve_undetermined(graph: ProvGraph, choices: dict) -> ProvGraph:
    """Fix undetermined EDB facts to T or F and re-derive statuses bottom-up."""
    chosen = {}
    for k, v in choices.items():
        key = _choice_key(k)
        node = graph.by_key.get(key)
        if node is None or node.status != "U" or graph.successors[node]:
            raise NotUndetermined(f"{k} is not an undetermined EDB tuple of the graph")
        v = {True: "T", False: "F"}.get(v, v)
        if v not in ("T", "F"):
            raise ValueError(f"choice for {k} must be T or F")
        chosen[key] = v

    new = {}

    def visit(n):
        if n in new:
            return new[n]
        kids = graph.successors[n]
        for c in kids:
            visit(c)
        if n.status != "U":
            st = n.status
        elif n.kind == REL:
            if not kids:
                st = chosen.get(n.key, "U")
            else:
                sts = [new[c] for c in kids]
                st = "T" if "T" in sts else ("U" if "U" in sts else "F")
        elif n.kind == RULE:
            st = meet(new[c] for c in kids)
        else:
            if kids:
                cs = new[kids[0]]
                st = INVERT[cs] if n.key in graph.negated_goals else cs
            else:
                st = n.status
        new[n] = st
        return st

    import sys
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 10000))
    try:
        for n in graph.nodes:
            visit(n)
    finally:
        sys.setrecursionlimit(limit)
    remap = {n: n.with_status(new[n]) for n in graph.nodes}
    return ProvGraph(
        frozenset(remap.values()),
        frozenset((remap[s], remap[d]) for s, d in graph.edges),
        graph.negated_goals,
    )
