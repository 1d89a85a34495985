"""Abstract syntax for non-recursive Datalog with negation and comparisons."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

from ..errors import ArityMismatch, DuplicateRuleId, RecursionDetected, UnsafeRule

_BARE_CONST = re.compile(r"[a-z][A-Za-z0-9_]*|-?[0-9]+")

COMPARISON_OPS = ("=", "!=", "<", "<=", ">", ">=")
NEGATED_OP = {"=": "!=", "!=": "=", "<": ">=", ">=": "<", ">": "<=", "<=": ">"}


def format_const(value: str) -> str:
    if _BARE_CONST.fullmatch(value) and value not in ("not",):
        return value
    escaped = value.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Const:
    value: str

    def __str__(self) -> str:
        return format_const(self.value)


@dataclass(frozen=True)
class Skolem:
    """Node constructor usable in rule heads; evaluates to a labels.Node."""

    kind: str
    name: str
    args: tuple
    status: str

    def __str__(self) -> str:
        inner = ",".join(str(a) for a in self.args)
        return f"{self.kind}_{self.name}_{self.status}({inner})"


Term = Union[Var, Const, Skolem]


def term_vars(term) -> list:
    if isinstance(term, Var):
        return [term.name]
    if isinstance(term, Skolem):
        out = []
        for a in term.args:
            out.extend(term_vars(a))
        return out
    return []


@dataclass(frozen=True)
class Atom:
    pred: str
    args: tuple

    @property
    def arity(self) -> int:
        return len(self.args)

    def variables(self) -> list:
        out = []
        for a in self.args:
            for v in term_vars(a):
                if v not in out:
                    out.append(v)
        return out

    def __str__(self) -> str:
        return f"{self.pred}({','.join(str(a) for a in self.args)})"


@dataclass(frozen=True)
class Literal:
    atom: Atom
    negated: bool = False

    def variables(self) -> list:
        return self.atom.variables()

    def __str__(self) -> str:
        return f"not {self.atom}" if self.negated else str(self.atom)


@dataclass(frozen=True)
class Comparison:
    left: Term
    op: str
    right: Term

    def variables(self) -> list:
        out = []
        for t in (self.left, self.right):
            for v in term_vars(t):
                if v not in out:
                    out.append(v)
        return out

    def negate(self) -> "Comparison":
        return Comparison(self.left, NEGATED_OP[self.op], self.right)

    def __str__(self) -> str:
        return f"{self.left} {self.op} {self.right}"


BodyItem = Union[Literal, Comparison]


@dataclass(frozen=True)
class Rule:
    id: str
    head: Atom
    body: tuple

    def variables(self) -> list:
        """Rule variables: head variables first, then body order."""
        out = list(self.head.variables())
        for item in self.body:
            for v in item.variables():
                if v not in out:
                    out.append(v)
        return out

    def positive_atoms(self) -> list:
        return [b.atom for b in self.body if isinstance(b, Literal) and not b.negated]

    def relational(self) -> list:
        return [(j, b) for j, b in enumerate(self.body, 1) if isinstance(b, Literal)]

    def __str__(self) -> str:
        body = ", ".join(str(b) for b in self.body)
        return f"{self.id}: {self.head} :- {body}."


@dataclass(frozen=True)
class Program:
    rules: tuple
    answer: str
    # predicates introduced as universal-quantifier helpers by fo.translate
    forall_aux: Optional[frozenset] = field(default=None, compare=False)

    @property
    def idb(self) -> set:
        return {r.head.pred for r in self.rules}

    @property
    def edb(self) -> set:
        idb = self.idb
        out = set()
        for r in self.rules:
            for b in r.body:
                if isinstance(b, Literal) and b.atom.pred not in idb:
                    out.add(b.atom.pred)
        return out

    def rules_for(self, pred: str) -> list:
        return [r for r in self.rules if r.head.pred == pred]

    def rule(self, rid: str) -> Rule:
        for r in self.rules:
            if r.id == rid:
                return r
        raise KeyError(rid)

    def arities(self) -> dict:
        out = {}
        for r in self.rules:
            atoms = [r.head] + [b.atom for b in r.body if isinstance(b, Literal)]
            for a in atoms:
                if out.setdefault(a.pred, a.arity) != a.arity:
                    raise ArityMismatch(
                        f"predicate {a.pred} used with arity {out[a.pred]} and {a.arity}"
                    )
        return out

    def dependencies(self) -> dict:
        deps = {p: set() for p in self.idb}
        for r in self.rules:
            for b in r.body:
                if isinstance(b, Literal):
                    deps[r.head.pred].add(b.atom.pred)
        return deps

    def topological_order(self) -> list:
        """IDB predicates ordered so every predicate follows its dependencies."""
        deps = self.dependencies()
        order, state = [], {}

        def visit(p, stack):
            if state.get(p) == 2:
                return
            if state.get(p) == 1:
                raise RecursionDetected(stack[stack.index(p):] + [p])
            state[p] = 1
            for q in sorted(deps.get(p, ())):
                if q in deps:
                    visit(q, stack + [p])
            state[p] = 2
            order.append(p)

        for r in self.rules:
            visit(r.head.pred, [])
        return order

    def validate(self) -> "Program":
        seen = set()
        for r in self.rules:
            if r.id in seen:
                raise DuplicateRuleId(f"duplicate rule id {r.id}")
            seen.add(r.id)
            check_safety(r)
        self.arities()
        self.topological_order()
        if self.answer not in self.idb:
            raise ValueError(f"answer predicate {self.answer} has no rule")
        return self

    def __str__(self) -> str:
        return "\n".join(str(r) for r in self.rules)


def check_safety(rule: Rule) -> None:
    if not rule.body:
        raise UnsafeRule(rule.id, "<empty body>")
    bound = set()
    for a in rule.positive_atoms():
        bound.update(a.variables())
    for v in rule.variables():
        if v not in bound:
            raise UnsafeRule(rule.id, v)


def default_answer(rules) -> str:
    """The first head predicate that no rule body mentions."""
    used = {b.atom.pred for r in rules for b in r.body if isinstance(b, Literal)}
    for r in rules:
        if r.head.pred not in used:
            return r.head.pred
    return rules[0].head.pred


@dataclass(frozen=True)
class Question:
    """Provenance question: ``WHY`` or ``WHYNOT`` plus a pattern atom."""

    kind: str
    atom: Atom

    @property
    def is_why(self) -> bool:
        return self.kind == "WHY"

    def __str__(self) -> str:
        return f"{self.kind} {self.atom}"
