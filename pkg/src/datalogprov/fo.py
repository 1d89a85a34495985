"""First-order formulas, their translation to Datalog, K-interpretations and
dual polynomials over positive and negated literal variables."""
from __future__ import annotations

import csv
import io
import itertools
import re
import sys
from dataclasses import dataclass
from typing import Union

from .datalog.evaluate import compare
from .datalog.instance import DomainAssignment, Instance
from .datalog.syntax import NEGATED_OP, Atom, Comparison, Const, Literal, Program, Rule, Var
from .errors import IllegalInterpretation, NotTranslatedProgram, ProgramSyntaxError
from .graph import ProvGraph, build_full_graph
from .labels import GOAL, RULE
from .semiring import BAR, Polynomial, drop_dual_pairs

DOM = "Dom"


# -- syntax ----------------------------------------------------------------------

@dataclass(frozen=True)
class FVar:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class FConst:
    value: str

    def __str__(self):
        return "'" + self.value.replace("'", "\\'") + "'"


FTerm = Union[FVar, FConst]


@dataclass(frozen=True)
class FAtom:
    pred: str
    args: tuple

    def __str__(self):
        return f"{self.pred}({','.join(str(a) for a in self.args)})"


@dataclass(frozen=True)
class FCmp:
    left: FTerm
    op: str
    right: FTerm

    def __str__(self):
        return f"{self.left} {self.op} {self.right}"


@dataclass(frozen=True)
class FNot:
    sub: "Formula"

    def __str__(self):
        return f"!{_paren(self.sub)}"


@dataclass(frozen=True)
class FAnd:
    left: "Formula"
    right: "Formula"

    def __str__(self):
        return f"{_paren(self.left)} & {_paren(self.right)}"


@dataclass(frozen=True)
class FOr:
    left: "Formula"
    right: "Formula"

    def __str__(self):
        return f"{_paren(self.left)} | {_paren(self.right)}"


@dataclass(frozen=True)
class FExists:
    var: str
    sub: "Formula"

    def __str__(self):
        return f"exists {self.var}. {self.sub}"


@dataclass(frozen=True)
class FForall:
    var: str
    sub: "Formula"

    def __str__(self):
        return f"forall {self.var}. {self.sub}"


Formula = Union[FAtom, FCmp, FNot, FAnd, FOr, FExists, FForall]


def _paren(f) -> str:
    return str(f) if isinstance(f, (FAtom, FCmp, FNot)) else f"({f})"


def free_vars(f) -> set:
    if isinstance(f, FAtom):
        return {a.name for a in f.args if isinstance(a, FVar)}
    if isinstance(f, FCmp):
        return {a.name for a in (f.left, f.right) if isinstance(a, FVar)}
    if isinstance(f, FNot):
        return free_vars(f.sub)
    if isinstance(f, (FAnd, FOr)):
        return free_vars(f.left) | free_vars(f.right)
    return free_vars(f.sub) - {f.var}


# -- parsing ---------------------------------------------------------------------

_FTOKEN = re.compile(
    r"\s*(?:(?P<string>'(?:[^'\\]|\\.)*'|\"(?:[^\"\\]|\\.)*\")|(?P<int>-?\d+)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<op><=|>=|!=|[≤≥≠=<>])|(?P<p>[().,&|!~∀∃¬∧∨]))"
)


class _FParser:
    def __init__(self, text):
        self.toks, pos = [], 0
        text = text.rstrip()
        while pos < len(text):
            m = _FTOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise ProgramSyntaxError("unexpected character in formula", 1, pos + 1, text[pos])
            self.toks.append((m.lastgroup, m.group(m.lastgroup), m.start(m.lastgroup) + 1))
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else ("eof", "", -1)

    def take(self):
        t = self.peek()
        self.i += 1
        return t

    def fail(self, msg):
        kind, text, col = self.peek()
        raise ProgramSyntaxError(msg, 1, col, text or "<eof>")

    def expect(self, text):
        if self.peek()[1] != text:
            self.fail(f"expected {text!r}")
        self.i += 1

    def formula(self):
        return self.disj()

    def disj(self):
        f = self.conj()
        while self.peek()[1] in ("|", "∨"):
            self.take()
            f = FOr(f, self.conj())
        return f

    def conj(self):
        f = self.unary()
        while self.peek()[1] in ("&", "∧"):
            self.take()
            f = FAnd(f, self.unary())
        return f

    def unary(self):
        kind, text, _ = self.peek()
        if text in ("!", "~", "¬"):
            self.take()
            return FNot(self.unary())
        if text in ("forall", "exists", "∀", "∃"):
            self.take()
            names = [self.var_name()]
            while self.peek()[1] == ",":
                self.take()
                names.append(self.var_name())
            if self.peek()[1] == ".":
                self.take()
            body = self.formula()
            ctor = FForall if text in ("forall", "∀") else FExists
            for n in reversed(names):
                body = ctor(n, body)
            return body
        return self.primary()

    def var_name(self):
        kind, text, _ = self.peek()
        if kind != "ident":
            self.fail("expected a variable name")
        self.take()
        return text

    def term(self):
        kind, text, _ = self.take()
        if kind == "ident":
            return FVar(text)
        if kind == "string":
            return FConst(re.sub(r"\\(.)", r"\1", text[1:-1]))
        if kind == "int":
            return FConst(text)
        self.i -= 1
        self.fail("expected a term")

    def primary(self):
        kind, text, _ = self.peek()
        if text == "(":
            self.take()
            f = self.formula()
            self.expect(")")
            return f
        if kind == "ident" and self.i + 1 < len(self.toks) and self.toks[self.i + 1][1] == "(":
            self.take()
            self.take()
            args = []
            if self.peek()[1] != ")":
                args.append(self.term())
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.term())
            self.expect(")")
            return FAtom(text, tuple(args))
        left = self.term()
        kind, op, _ = self.take()
        if kind != "op":
            self.i -= 1
            self.fail("expected a comparison operator")
        op = {"≤": "<=", "≥": ">=", "≠": "!="}.get(op, op)
        return FCmp(left, op, self.term())


def parse_formula(text: str):
    p = _FParser(text)
    f = p.formula()
    if p.peek()[0] != "eof":
        p.fail("trailing input in formula")
    return f


# -- normal forms ------------------------------------------------------------------

def nnf(f):
    """Push negations down to atoms; negated comparisons flip their operator."""
    if isinstance(f, (FAtom, FCmp)):
        return f
    if isinstance(f, FAnd):
        return FAnd(nnf(f.left), nnf(f.right))
    if isinstance(f, FOr):
        return FOr(nnf(f.left), nnf(f.right))
    if isinstance(f, FExists):
        return FExists(f.var, nnf(f.sub))
    if isinstance(f, FForall):
        return FForall(f.var, nnf(f.sub))
    g = f.sub
    if isinstance(g, FAtom):
        return f
    if isinstance(g, FCmp):
        return FCmp(g.left, NEGATED_OP[g.op], g.right)
    if isinstance(g, FNot):
        return nnf(g.sub)
    if isinstance(g, FAnd):
        return FOr(nnf(FNot(g.left)), nnf(FNot(g.right)))
    if isinstance(g, FOr):
        return FAnd(nnf(FNot(g.left)), nnf(FNot(g.right)))
    if isinstance(g, FExists):
        return FForall(g.var, nnf(FNot(g.sub)))
    return FExists(g.var, nnf(FNot(g.sub)))


def _all_names(f, out):
    if isinstance(f, FAtom):
        out.update(a.name for a in f.args if isinstance(a, FVar))
    elif isinstance(f, FCmp):
        out.update(a.name for a in (f.left, f.right) if isinstance(a, FVar))
    elif isinstance(f, FNot):
        _all_names(f.sub, out)
    elif isinstance(f, (FAnd, FOr)):
        _all_names(f.left, out)
        _all_names(f.right, out)
    else:
        out.add(f.var)
        _all_names(f.sub, out)
    return out


def rename_apart(f):
    """Give every quantifier its own variable, distinct from the free ones."""
    used = set(free_vars(f))
    taken = _all_names(f, set())

    def fresh(base):
        stem = base.rstrip("0123456789") or base
        i = 1
        while f"{stem}{i}" in taken:
            i += 1
        name = f"{stem}{i}"
        taken.add(name)
        return name

    def term(t, env):
        return FVar(env.get(t.name, t.name)) if isinstance(t, FVar) else t

    def go(g, env):
        if isinstance(g, FAtom):
            return FAtom(g.pred, tuple(term(a, env) for a in g.args))
        if isinstance(g, FCmp):
            return FCmp(term(g.left, env), g.op, term(g.right, env))
        if isinstance(g, FNot):
            return FNot(go(g.sub, env))
        if isinstance(g, (FAnd, FOr)):
            return type(g)(go(g.left, env), go(g.right, env))
        name = g.var
        if name in used:
            name = fresh(name)
        used.add(name)
        return type(g)(name, go(g.sub, {**env, g.var: name}))

    return go(f, {})


# -- translation -------------------------------------------------------------------

def dl_var(name: str) -> Var:
    return Var(name[0].upper() + name[1:])


def _dl_term(t):
    return dl_var(t.name) if isinstance(t, FVar) else Const(t.value)


def _head(name, f) -> Atom:
    return Atom(name, tuple(dl_var(v) for v in sorted(free_vars(f))))


def _dom(vs):
    return [Literal(Atom(DOM, (dl_var(v),))) for v in sorted(vs)]


def translate(formula, answer: str = "Q_phi") -> Program:
    """Datalog program whose answer predicate holds the satisfying valuations
    of the formula's free variables (in lexicographic order)."""
    f = rename_apart(nnf(formula))
    names = {}
    counter = itertools.count(1)

    def number(g, path, root=False):
        names[path] = answer if root else f"{answer}{next(counter)}"
        if isinstance(g, (FAnd, FOr)):
            number(g.left, path + (0,))
            number(g.right, path + (1,))
        elif isinstance(g, (FExists, FForall)):
            number(g.sub, path + (0,))
        elif isinstance(g, FNot) and not isinstance(g.sub, FAtom):
            raise ValueError("formula is not in negation normal form")

    number(f, (), root=True)
    rules, aux = [], set()

    def emit(head, body):
        rules.append(Rule(f"r{len(rules) + 1}", head, tuple(body)))

    def go(g, path):
        name = names[path]
        head = _head(name, g)
        fv = free_vars(g)
        if isinstance(g, FAtom):
            emit(head, [Literal(Atom(g.pred, tuple(_dl_term(a) for a in g.args)))])
        elif isinstance(g, FNot):
            a = g.sub
            emit(head, _dom(fv) + [Literal(Atom(a.pred, tuple(_dl_term(t) for t in a.args)), True)])
        elif isinstance(g, FCmp):
            emit(head, _dom(fv) + [Comparison(_dl_term(g.left), g.op, _dl_term(g.right))])
        elif isinstance(g, FAnd):
            emit(head, [Literal(_head(names[path + (0,)], g.left)), Literal(_head(names[path + (1,)], g.right))])
            go(g.left, path + (0,))
            go(g.right, path + (1,))
        elif isinstance(g, FOr):
            for k, sub in ((0, g.left), (1, g.right)):
                emit(head, _dom(fv - free_vars(sub)) + [Literal(_head(names[path + (k,)], sub))])
            go(g.left, path + (0,))
            go(g.right, path + (1,))
        elif isinstance(g, FExists):
            emit(head, _dom({g.var}) + [Literal(_head(names[path + (0,)], g.sub))])
            go(g.sub, path + (0,))
        else:
            helper = f"{name}_aux"
            aux.add(helper)
            emit(head, _dom(fv) + [Literal(Atom(helper, head.args), True)])
            emit(Atom(helper, head.args),
                 _dom({g.var}) + _dom(fv) + [Literal(_head(names[path + (0,)], g.sub), True)])
            go(g.sub, path + (0,))

    go(f, ())
    program = Program(tuple(rules), answer, frozenset(aux))
    return program.validate()


# -- K-interpretations --------------------------------------------------------------

def _is_var(s: str) -> bool:
    return s not in ("0", "1") and re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", s) is not None


class KInterpretation:
    """Annotations of positive and negated literals.

    Each listed fact maps to (pos, neg) with one of the legal shapes
    (1,0), (0,1), (x,0), (0,x_bar), (x,x_bar).  Unlisted facts are (0,1).
    """

    def __init__(self, rows: dict):
        self.rows = {}
        seen = set()
        for (pred, args), (pos, neg) in rows.items():
            pos, neg = str(pos).strip(), str(neg).strip()
            key = (pred, tuple(args))
            ok = (pos, neg) in (("1", "0"), ("0", "1"))
            if _is_var(pos) and neg == "0":
                ok = not pos.endswith(BAR)
            elif pos == "0" and _is_var(neg):
                ok = neg.endswith(BAR) and len(neg) > len(BAR)
            elif _is_var(pos) and _is_var(neg):
                ok = neg == pos + BAR and not pos.endswith(BAR)
            if not ok:
                raise IllegalInterpretation(f"{pred}{key[1]}: ({pos}, {neg}) is not a legal annotation pair")
            for v in (pos, neg):
                base = v[: -len(BAR)] if v.endswith(BAR) else v
                if _is_var(v):
                    if (base, v == pos) in seen:
                        raise IllegalInterpretation(f"variable {v} annotates more than one literal")
                    seen.add((base, v == pos))
            self.rows[key] = (pos, neg)

    def pair(self, pred, args) -> tuple:
        return self.rows.get((pred, tuple(args)), ("0", "1"))

    def literal(self, pred, args, positive=True) -> Polynomial:
        s = self.pair(pred, args)[0 if positive else 1]
        if s in ("0", "1"):
            return Polynomial.const(int(s))
        return Polynomial.var(s)

    def predicates(self) -> dict:
        return {p: len(a) for p, a in self.rows}

    @classmethod
    def parse(cls, text: str) -> "KInterpretation":
        rows = {}
        for row in csv.reader(io.StringIO(text), skipinitialspace=True):
            row = [c.strip() for c in row]
            if not row or not row[0] or row[0].startswith(("#", "%")):
                continue
            if len(row) < 3:
                raise IllegalInterpretation(f"row {row} needs a predicate, arguments, pos and neg")
            rows[(row[0], tuple(row[1:-2]))] = (row[-2], row[-1])
        return cls(rows)


def instance_of_interpretation(pi: KInterpretation, domain, predicates: dict | None = None) -> Instance:
    """Instance in which true facts exist, false ones are absent and
    (x, x_bar) facts are undetermined; ``Dom`` holds the domain."""
    rels = {p: set() for p in (predicates or {})}
    rels.update({p: set() for p in pi.predicates()})
    undet, annots = set(), {}
    for (pred, args), (pos, neg) in pi.rows.items():
        if neg == "0":
            rels[pred].add(args)
        elif pos != "0":
            undet.add((pred, args))
        if _is_var(pos):
            annots[(pred, args)] = pos
    rels[DOM] = {(c,) for c in domain}
    return Instance(rels, annots, frozenset(undet))


def interpretation_domains(program: Program, instance: Instance, domain) -> DomainAssignment:
    """Every EDB attribute ranges over the whole domain."""
    arities = program.arities()
    return DomainAssignment.uniform({p: arities[p] for p in program.edb}, domain)


# -- dual polynomials ------------------------------------------------------------------

def kinter_eval(formula, pi: KInterpretation, domain, valuation: dict | None = None) -> Polynomial:
    """Direct evaluation of the formula in N[X, X_bar]."""
    domain = sorted(domain)

    def val(t, env):
        return env[t.name] if isinstance(t, FVar) else t.value

    def go(g, env):
        if isinstance(g, FAtom):
            return pi.literal(g.pred, tuple(val(a, env) for a in g.args), True)
        if isinstance(g, FNot):
            if not isinstance(g.sub, FAtom):
                return go(nnf(g), env)
            a = g.sub
            return pi.literal(a.pred, tuple(val(t, env) for t in a.args), False)
        if isinstance(g, FCmp):
            return Polynomial.const(1 if compare(val(g.left, env), g.op, val(g.right, env)) else 0)
        if isinstance(g, FAnd):
            return drop_dual_pairs(go(g.left, env) * go(g.right, env))
        if isinstance(g, FOr):
            return go(g.left, env) + go(g.right, env)
        if isinstance(g, FExists):
            out = Polynomial.zero()
            for c in domain:
                out = out + go(g.sub, {**env, g.var: c})
            return out
        out = Polynomial.one()
        for c in domain:
            out = drop_dual_pairs(out * go(g.sub, {**env, g.var: c}))
        return out

    return drop_dual_pairs(go(formula, dict(valuation or {})))


def extract_dual(graph: ProvGraph, root, pi: KInterpretation, program: Program) -> Polynomial:
    """Read the dual polynomial of ``root`` off a provenance graph of a
    translated program: Dom goals are 1, EDB goals take the annotation of
    their literal, rules multiply, tuples add (universal helpers multiply)."""
    if program.forall_aux is None:
        raise NotTranslatedProgram("program does not come from translate(); universal helpers unknown")
    pred, args = root
    start = graph.tuple_node(pred, args)
    if start is None:
        raise KeyError(f"no tuple node {pred}{tuple(args)}")
    idb, aux = program.idb, program.forall_aux
    succ = graph.successors
    memo = {}

    def goal_value(n):
        rid, j = n.name.rsplit(".", 1)
        item = program.rule(rid).body[int(j) - 1]
        if isinstance(item, Comparison):
            return Polynomial.const(1 if n.status == "T" else 0)
        p = item.atom.pred
        if p == DOM:
            return Polynomial.one()
        if p not in idb:
            return pi.literal(p, n.args, not item.negated)
        out = Polynomial.zero()
        for c in succ[n]:
            out = out + value(c)
        return out

    def value(n):
        if n in memo:
            return memo[n]
        if n.kind == GOAL:
            v = goal_value(n)
        elif n.kind == RULE:
            v = Polynomial.one()
            for c in succ[n]:
                v = drop_dual_pairs(v * value(c))
        elif n.name == DOM:
            v = Polynomial.one()
        elif n.name in aux:
            v = Polynomial.one()
            for c in succ[n]:
                v = drop_dual_pairs(v * value(c))
        else:
            v = Polynomial.zero()
            for c in succ[n]:
                v = v + value(c)
        memo[n] = v
        return v

    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 20000))
    try:
        return drop_dual_pairs(value(start))
    finally:
        sys.setrecursionlimit(limit)


def edb_predicates(program: Program) -> dict:
    arities = program.arities()
    return {p: arities[p] for p in program.edb if p != DOM}


def dual_provenance(formula, pi: KInterpretation, domain, answer: str = "Q_phi"):
    """Translate a sentence, build the graph over the instance of ``pi`` and
    read off its dual polynomial.  Returns (polynomial, program, graph)."""
    if free_vars(formula):
        raise ValueError(f"not a sentence: free variables {sorted(free_vars(formula))}")
    program = translate(formula, answer)
    instance = instance_of_interpretation(pi, domain, edb_predicates(program))
    dom = interpretation_domains(program, instance, domain)
    graph = build_full_graph(program, instance, dom)
    return extract_dual(graph, (program.answer, ()), pi, program), program, graph
