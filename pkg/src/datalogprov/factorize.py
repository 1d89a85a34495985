"""d-trees and the query rewriting that yields factorized provenance."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

from .datalog.instance import DomainAssignment, Instance
from .datalog.syntax import Atom, Literal, Program, Question, Rule, Var
from .errors import InvalidDTree, PathConditionViolated, VariableCoverageMismatch
from .graph import ProvGraph
from .rewriter import explain, unify_rule


@dataclass(frozen=True)
class DNode:
    var: str
    key: frozenset | None = None
    children: tuple = ()

    def to_dict(self) -> dict:
        d = {"var": self.var, "children": [c.to_dict() for c in self.children]}
        if self.key is not None:
            d["key"] = sorted(self.key)
        return d

    @classmethod
    def from_dict(cls, d) -> "DNode":
        key = d.get("key")
        return cls(d["var"], None if key is None else frozenset(key),
                   tuple(cls.from_dict(c) for c in d.get("children", ())))


@dataclass(frozen=True)
class DTree:
    roots: tuple
    head_vars: tuple = ()

    def nodes(self) -> list:
        out, stack = [], list(reversed(self.roots))
        while stack:
            n = stack.pop()
            out.append(n)
            stack.extend(reversed(n.children))
        return out

    def variables(self) -> list:
        return [n.var for n in self.nodes()]

    def parents(self) -> dict:
        out = {r.var: None for r in self.roots}
        for n in self.nodes():
            for c in n.children:
                out[c.var] = n.var
        return out

    def ancestors(self, var) -> list:
        par, out = self.parents(), []
        p = par.get(var)
        while p is not None:
            out.append(p)
            p = par[p]
        return out

    def depth(self, var) -> int:
        return len(self.ancestors(var))

    def to_json(self) -> str:
        return json.dumps({"headVars": list(self.head_vars), "roots": [r.to_dict() for r in self.roots]},
                          indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DTree":
        d = json.loads(text)
        if "roots" in d:
            roots = d["roots"]
        else:
            roots = [d]
        return cls(tuple(DNode.from_dict(r) for r in roots), tuple(d.get("headVars", ())))


@dataclass(frozen=True)
class PathConditionReport:
    valid: bool
    violations: tuple = field(default=())


def body_variables(query: Rule) -> list:
    head = set(query.head.variables())
    out = []
    for item in query.body:
        for v in item.variables():
            if v not in head and v not in out:
                out.append(v)
    return out


def _check_coverage(query: Rule, tree: DTree):
    tv = tree.variables()
    bv = body_variables(query)
    if len(tv) != len(set(tv)) or set(tv) != set(bv):
        raise VariableCoverageMismatch(
            f"d-tree variables {sorted(tv)} must be exactly the body variables {sorted(bv)}"
        )
    extra = set(tree.head_vars) - set(query.head.variables())
    if extra:
        raise VariableCoverageMismatch(f"headVars {sorted(extra)} are not head variables")


def check_path_condition(query: Rule, tree: DTree) -> PathConditionReport:
    """Every body item's tree variables must lie on one root-to-leaf path."""
    _check_coverage(query, tree)
    anc = {v: set(tree.ancestors(v)) for v in tree.variables()}
    violations = []
    for j, item in enumerate(query.body, 1):
        vs = [v for v in item.variables() if v in anc]
        for a, b in itertools.combinations(vs, 2):
            if a not in anc[b] and b not in anc[a]:
                violations.append((f"{j}:{item}", (a, b)))
    return PathConditionReport(not violations, tuple(violations))


def _attachment(query: Rule, tree: DTree) -> dict:
    """Body items per tree variable (the deepest one they mention); None = top rule."""
    out = {}
    for item in query.body:
        vs = [v for v in item.variables() if v in set(tree.variables())]
        target = max(sorted(vs), key=tree.depth) if vs else None
        out.setdefault(target, []).append(item)
    return out


def dependency_keys(query: Rule, tree: DTree) -> dict:
    """key(X) = (ancestors(X) + head variables) restricted to the variables
    used by the items attached inside X's subtree."""
    attach = _attachment(query, tree)
    head = set(tree.head_vars) | set(query.head.variables())
    keys = {}

    def subtree_vars(n):
        vs = set()
        for item in attach.get(n.var, ()):
            vs.update(item.variables())
        for c in n.children:
            vs |= subtree_vars(c)
        return vs

    for n in tree.nodes():
        keys[n.var] = frozenset((set(tree.ancestors(n.var)) | head) & subtree_vars(n))
    return keys


def with_keys(query: Rule, tree: DTree) -> DTree:
    """Fill in missing keys; reject supplied keys that differ from the dependencies."""
    keys = dependency_keys(query, tree)

    def fix(n):
        if n.key is not None and n.key != keys[n.var]:
            raise InvalidDTree(f"key({n.var}) = {sorted(n.key)} but the rewriting needs {sorted(keys[n.var])}")
        return DNode(n.var, keys[n.var], tuple(fix(c) for c in n.children))

    return DTree(tuple(fix(r) for r in tree.roots), tree.head_vars)


def _key_args(key) -> tuple:
    return tuple(Var(v) for v in sorted(key))


def rewrite_for_dtree(query: Rule, tree: DTree, merge: bool = True) -> Program:
    """One rule per tree node plus a top rule, then merge pass-through rules."""
    report = check_path_condition(query, tree)
    if not report.valid:
        raise PathConditionViolated(f"path condition violated: {list(report.violations)}")
    tree = with_keys(query, tree)
    attach = _attachment(query, tree)
    used_preds = {query.head.pred} | {b.atom.pred for b in query.body if isinstance(b, Literal)}
    names = {}
    for v in tree.variables():
        name = f"Q_{v}"
        k = 1
        while name in used_preds:
            name = f"Q_{v}_{k}"
            k += 1
        used_preds.add(name)
        names[v] = name

    def call(n):
        return Literal(Atom(names[n.var], _key_args(n.key)))

    rules = {}
    order = []
    for n in tree.nodes():
        body = [call(c) for c in n.children] + list(attach.get(n.var, ()))
        rules[names[n.var]] = Rule(f"{query.id}_{n.var}", Atom(names[n.var], _key_args(n.key)), tuple(body))
        order.append(names[n.var])
    top = Rule(query.id, query.head, tuple([call(r) for r in tree.roots] + list(attach.get(None, ()))))

    if merge:
        def post(n):
            for c in n.children:
                post(c)
            if len(n.children) == 1:
                c = n.children[0]
                if c.key == n.key | {n.var} and names[c.var] in rules:
                    _inline(rules, names[n.var], names[c.var])
                    order.remove(names[c.var])

        for r in tree.roots:
            post(r)
        generated = set(names.values())
        changed = True
        while changed:
            changed = False
            candidates = [top] + [rules[p] for p in order]
            for r in candidates:
                if len(r.body) != 1 or not isinstance(r.body[0], Literal) or r.body[0].negated:
                    continue
                lit = r.body[0]
                callee = lit.atom.pred
                if callee not in generated or callee not in rules:
                    continue
                if set(lit.atom.variables()) != set(r.head.variables()) \
                        or len(lit.atom.variables()) != lit.atom.arity:
                    continue
                uses = sum(1 for q in [top] + [rules[p] for p in order] for b in q.body
                           if isinstance(b, Literal) and b.atom.pred == callee)
                if uses != 1:
                    continue
                new = Rule(r.id, r.head, rules[callee].body)
                if r is top:
                    top = new
                else:
                    rules[r.head.pred] = new
                del rules[callee]
                order.remove(callee)
                changed = True
                break
    return Program(tuple([top] + [rules[p] for p in order]), query.head.pred).validate()


def _inline(rules: dict, parent: str, child: str):
    r, c = rules[parent], rules[child]
    body = []
    for b in r.body:
        if isinstance(b, Literal) and b.atom.pred == child:
            body.extend(c.body)
        else:
            body.append(b)
    rules[parent] = Rule(r.id, r.head, tuple(body))
    del rules[child]


def factorized_explain(query: Rule, instance: Instance, dom: DomainAssignment, question: Question,
                       tree: DTree) -> ProvGraph:
    """Explanation over the d-tree rewriting of ``query`` after binding the
    question's constants."""
    u = unify_rule(query, question.atom)
    if u is None:
        raise ValueError(f"question {question} does not unify with {query.head}")
    program = rewrite_for_dtree(u.rule, tree)
    return explain(program, instance, dom, question)


# -- enumeration ----------------------------------------------------------------------

def _forests(vars_):
    """All rooted labelled forests over ``vars_`` as parent maps."""
    vars_ = list(vars_)
    n = len(vars_)
    for parents in itertools.product([None] + vars_, repeat=n):
        par = dict(zip(vars_, parents))
        if any(par[v] == v for v in vars_):
            continue
        ok = True
        for v in vars_:
            seen, p = set(), par[v]
            while p is not None:
                if p in seen or p == v:
                    ok = False
                    break
                seen.add(p)
                p = par[p]
            if not ok:
                break
        if ok:
            yield par


def _tree_from_parents(par, head_vars) -> DTree:
    def build(v):
        kids = sorted(c for c, p in par.items() if p == v)
        return DNode(v, None, tuple(build(c) for c in kids))

    roots = sorted(v for v, p in par.items() if p is None)
    return DTree(tuple(build(r) for r in roots), tuple(head_vars))


def enumerate_dtrees(query: Rule, max_vars: int = 6) -> list:
    """Every d-tree of ``query`` that satisfies the path condition, keys filled in."""
    bv = body_variables(query)
    if len(bv) > max_vars:
        raise ValueError(f"enumeration is limited to {max_vars} body variables")
    head = tuple(query.head.variables())
    out = []
    for par in _forests(bv):
        t = _tree_from_parents(par, head)
        if check_path_condition(query, t).valid:
            out.append(with_keys(query, t))
    return out
