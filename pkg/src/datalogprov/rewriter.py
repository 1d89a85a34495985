"""Rewrite a program and a provenance question into a Datalog program whose
``edge`` relation is the explanation.

Stages: unify, annotate, firing rules, connectivity, edge rules.  Generated
predicates are ``FIRE_<pred>_<T|F|FT>``, ``FIRE_<rid>_<T|F>``,
``CONN_<rid>_<T|F>`` and ``DOM_<pred>_<i>`` (1-based attribute position).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .datalog.evaluate import run_program
from .datalog.instance import DomainAssignment, Instance
from .datalog.syntax import Atom, Comparison, Const, Literal, Program, Question, Rule, Skolem, Var
from .errors import NegationNotSupported, ProvError
from .graph import ProvGraph, check_pattern
from .labels import GOAL, REL, RULE

TRUE, FALSE = Const("true"), Const("false")
BOOL_NOT = "BOOL_NOT"
INV = {"T": "F", "F": "T", "FT": "FT"}


# -- unification -----------------------------------------------------------------

def _resolve(subst, t):
    while isinstance(t, Var) and t.name in subst:
        t = subst[t.name]
    return t


def mgu(a: Atom, b: Atom):
    """Most general unifier of two atoms with disjoint variables, or None."""
    if a.pred != b.pred or a.arity != b.arity:
        return None
    subst = {}
    for x, y in zip(a.args, b.args):
        x, y = _resolve(subst, x), _resolve(subst, y)
        if x == y:
            continue
        if isinstance(x, Var):
            subst[x.name] = y
        elif isinstance(y, Var):
            subst[y.name] = x
        else:
            return None
    return subst


def substitute(term, theta):
    if isinstance(term, Var):
        return theta.get(term.name, term)
    if isinstance(term, Skolem):
        return Skolem(term.kind, term.name, tuple(substitute(a, theta) for a in term.args), term.status)
    return term


def subst_atom(atom: Atom, theta) -> Atom:
    return Atom(atom.pred, tuple(substitute(t, theta) for t in atom.args))


def subst_item(item, theta):
    if isinstance(item, Literal):
        return Literal(subst_atom(item.atom, theta), item.negated)
    return Comparison(substitute(item.left, theta), item.op, substitute(item.right, theta))


def atom_key(atom: Atom) -> tuple:
    """Atom up to variable renaming."""
    names = {}
    args = tuple(
        ("c", t.value) if isinstance(t, Const) else ("v", names.setdefault(t.name, len(names)))
        for t in atom.args
    )
    return (atom.pred, args)


@dataclass(frozen=True)
class UnifiedRule:
    base: Rule
    binding: tuple          # ((var, Term), ...) for variables that changed
    rule: Rule              # base rule with the binding applied
    annotation: str = ""    # "", "T", "F" or "FT"

    @property
    def id(self) -> str:
        return self.base.id

    @property
    def ident(self) -> tuple:
        return (self.base.id, self.binding)

    @property
    def args(self) -> tuple:
        """Arguments of the rule's firing predicate."""
        theta = dict(self.binding)
        return tuple(theta.get(v, Var(v)) for v in self.base.variables())

    @property
    def statuses(self) -> tuple:
        return tuple(s for s in "TF" if s in self.annotation)

    def __str__(self) -> str:
        sup = ",".join(f"{v}={t}" for v, t in self.binding)
        ann = f" [{self.annotation}]" if self.annotation else ""
        body = ", ".join(str(b) for b in self.rule.body)
        return f"{self.id}^({sup}){ann}: {self.rule.head} :- {body}."


def unify_rule(rule: Rule, atom: Atom):
    """The copy of ``rule`` whose head is specialized to ``atom``, or None."""
    pattern = Atom(atom.pred, tuple(Var("?" + t.name) if isinstance(t, Var) else t for t in atom.args))
    theta = mgu(rule.head, pattern)
    if theta is None:
        return None
    reps, full, binding = {}, {}, []
    for v in rule.variables():
        t = _resolve(theta, Var(v))
        if isinstance(t, Var):
            t = reps.setdefault(t, Var(v))
        full[v] = t
        if t != Var(v):
            binding.append((v, t))
    unified = Rule(rule.id, subst_atom(rule.head, full), tuple(subst_item(b, full) for b in rule.body))
    return UnifiedRule(rule, tuple(binding), unified)


def unify_program(program: Program, question: Question) -> list:
    """Propagate the question's constants top-down through the rules."""
    out, seen_keys, seen_copies = [], set(), set()
    work = [question.atom]
    idb = program.idb
    while work:
        atom = work.pop(0)
        k = atom_key(atom)
        if k in seen_keys:
            continue
        seen_keys.add(k)
        for rule in program.rules_for(atom.pred):
            u = unify_rule(rule, atom)
            if u is None:
                continue
            if u.ident not in seen_copies:
                seen_copies.add(u.ident)
                out.append(u)
            for _, lit in u.rule.relational():
                if lit.atom.pred in idb:
                    work.append(lit.atom)
    return out


def _copies_for(atom, program, table):
    out = []
    for rule in program.rules_for(atom.pred):
        u = unify_rule(rule, atom)
        if u is not None:
            out.append(table.get(u.ident, u))
    return out


def annotate_program(unified: list, question: Question, program: Program | None = None) -> list:
    """Attach T/F/FT to every unified rule reachable from the question."""
    rules = {}
    for u in unified:
        rules.setdefault(u.base.head.pred, [])
        if u.base not in rules[u.base.head.pred]:
            rules[u.base.head.pred].append(u.base)
    if program is None:
        program = Program(tuple(r for rs in rules.values() for r in rs), question.atom.pred)
    table = {u.ident: u for u in unified}
    ann = {u.ident: set() for u in unified}
    idb = program.idb
    start = "T" if question.is_why else "F"
    work, done = [(question.atom, start)], set()
    while work:
        atom, state = work.pop(0)
        if (atom_key(atom), state) in done:
            continue
        done.add((atom_key(atom), state))
        for u in _copies_for(atom, program, table):
            if u.ident not in ann:
                table[u.ident] = u
                ann[u.ident] = set()
            ann[u.ident].update(state.replace("FT", "TF"))
            goal_state = "T" if state == "T" else "FT"
            for _, lit in u.rule.relational():
                if lit.atom.pred in idb:
                    work.append((lit.atom, INV[goal_state] if lit.negated else goal_state))
    out = []
    for ident, u in table.items():
        s = ann.get(ident)
        if not s:
            continue
        label = "FT" if s == {"T", "F"} else next(iter(s))
        out.append(UnifiedRule(u.base, u.binding, u.rule, label))
    return out


# -- firing rules ----------------------------------------------------------------

def fire_pred(name: str, state: str) -> str:
    return f"FIRE_{name}_{state}"


def conn_pred(rid: str, state: str) -> str:
    return f"CONN_{rid}_{state}"


def dom_pred(pred: str, i: int) -> str:
    return f"DOM_{pred}_{i + 1}"


def _fresh(prefix, used):
    i = 1
    while f"{prefix}{i}" in used:
        i += 1
    name = f"{prefix}{i}"
    used.add(name)
    return Var(name)


class _Emitter:
    def __init__(self):
        self.rules, self._seen = [], set()

    def emit(self, head: Atom, body):
        body = tuple(body)
        key = (head, body)
        if key not in self._seen:
            self._seen.add(key)
            self.rules.append(Rule(f"f{len(self.rules) + 1}", head, body))


@dataclass
class FiringBuilder:
    program: Program
    emitter: _Emitter = field(default_factory=_Emitter)
    _atoms: set = field(default_factory=set)
    _rules: set = field(default_factory=set)
    uses_bool_not: bool = False

    def atom(self, atom: Atom, state: str):
        key = (atom_key(atom), state)
        if key in self._atoms:
            return
        self._atoms.add(key)
        pred, args = atom.pred, atom.args
        guards = []
        seen = set()
        for i, t in enumerate(args):
            if isinstance(t, Var) and (i, t.name) not in seen:
                seen.add((i, t.name))
                guards.append(Literal(Atom(dom_pred(pred, i), (t,))))
        if state == "FT":
            self.atom(atom, "T")
            self.atom(atom, "F")
            self.emitter.emit(Atom(fire_pred(pred, "FT"), args + (TRUE,)), [Literal(Atom(fire_pred(pred, "T"), args))])
            self.emitter.emit(Atom(fire_pred(pred, "FT"), args + (FALSE,)), [Literal(Atom(fire_pred(pred, "F"), args))])
        elif pred not in self.program.idb:
            if state == "T":
                self.emitter.emit(Atom(fire_pred(pred, "T"), args), [Literal(atom)])
            else:
                self.emitter.emit(Atom(fire_pred(pred, "F"), args), guards + [Literal(atom, True)])
        elif state == "T":
            for rule in self.program.rules_for(pred):
                u = unify_rule(rule, atom)
                if u is None:
                    continue
                self.rule(u, "T")
                self.emitter.emit(Atom(fire_pred(pred, "T"), u.rule.head.args),
                                  [Literal(Atom(fire_pred(u.id, "T"), u.args))])
        else:
            self.atom(atom, "T")
            self.emitter.emit(Atom(fire_pred(pred, "F"), args),
                              guards + [Literal(Atom(fire_pred(pred, "T"), args), True)])

    def rule(self, u: UnifiedRule, state: str):
        key = (u.ident, state)
        if key in self._rules:
            return
        self._rules.add(key)
        if state == "T":
            body = []
            for item in u.rule.body:
                if isinstance(item, Comparison):
                    body.append(item)
                    continue
                st = "F" if item.negated else "T"
                self.atom(item.atom, st)
                body.append(Literal(Atom(fire_pred(item.atom.pred, st), item.atom.args)))
            self.emitter.emit(Atom(fire_pred(u.id, "T"), u.args), body)
            return
        head = u.rule.head
        self.atom(head, "F")
        used = set(u.base.variables()) | {t.name for t in u.args if isinstance(t, Var)}
        fixed = [Literal(Atom(fire_pred(head.pred, "F"), head.args))]
        options = []
        for item in u.rule.body:
            if isinstance(item, Comparison):
                options.append([([item], TRUE), ([item.negate()], FALSE)])
                continue
            self.atom(item.atom, "FT")
            v = _fresh("V", used)
            goals = [Literal(Atom(fire_pred(item.atom.pred, "FT"), item.atom.args + (v,)))]
            slot = v
            if item.negated:
                w = _fresh("W", used)
                goals.append(Literal(Atom(BOOL_NOT, (v, w))))
                slot = w
                self.uses_bool_not = True
            options.append([(goals, slot)])
        for combo in itertools.product(*options):
            body = list(fixed)
            for goals, _ in combo:
                body.extend(goals)
            slots = tuple(slot for _, slot in combo)
            self.emitter.emit(Atom(fire_pred(u.id, "F"), u.args + slots), body)


def create_firing_rules(annotated: list, dom: DomainAssignment, program: Program,
                        question: Question) -> Program:
    """Firing rules for every annotated rule and status, plus the question's own
    firing predicate."""
    b = FiringBuilder(program)
    b.atom(question.atom, "T" if question.is_why else "F")
    for u in annotated:
        for s in u.statuses:
            b.rule(u, s)
    return Program(tuple(b.emitter.rules), fire_pred(question.atom.pred, "T" if question.is_why else "F"))


def _slot_vars(u: UnifiedRule, used):
    return tuple(_fresh("V", used) for _ in u.rule.body)


def add_connectivity(firing: Program, annotated: list, program: Program, question: Question) -> Program:
    """Restrict firing results to derivations reachable from the question."""
    em = _Emitter()
    for r in firing.rules:
        em.emit(r.head, r.body)
    table = {u.ident: u for u in annotated}
    top_state = "T" if question.is_why else "F"
    counter = itertools.count(1)

    def firing_args(u, state, used):
        if state == "T":
            return u.args
        return u.args + _slot_vars(u, used)

    for rule in program.rules_for(question.atom.pred):
        u = unify_rule(rule, question.atom)
        if u is None or u.ident not in table:
            continue
        used = set(rule.variables())
        args = firing_args(u, top_state, used)
        em.emit(Atom(conn_pred(u.id, top_state), args), [Literal(Atom(fire_pred(u.id, top_state), args))])

    idb = program.idb
    for p in annotated:
        for sp in p.statuses:
            for k, lit in p.rule.relational():
                if lit.atom.pred not in idb:
                    continue
                sc = sp if not lit.negated else INV[sp]
                n = next(counter)
                ren = {v: Var(f"{v}_c{n}") for v in p.base.variables()}
                goal = subst_atom(lit.atom, ren)
                p_args = tuple(substitute(t, ren) for t in p.args)
                if sp == "F":
                    used = {t.name for t in p_args if isinstance(t, Var)}
                    slots = list(_slot_vars(p, used))
                    slots[k - 1] = FALSE
                    p_args = p_args + tuple(slots)
                for rule in program.rules_for(lit.atom.pred):
                    c = unify_rule(rule, goal)
                    if c is None:
                        continue
                    c = table.get(c.ident, c)
                    used = set(rule.variables()) | {t.name for t in p_args if isinstance(t, Var)}
                    c_args = firing_args(c, sc, used)
                    head_c = Atom(goal.pred, c.rule.head.args)
                    theta = mgu(goal, head_c)
                    if theta is None:
                        continue
                    full = {v: _resolve(theta, Var(v)) for v in theta}
                    ca = tuple(substitute(t, full) for t in c_args)
                    pa = tuple(substitute(t, full) for t in p_args)
                    em.emit(Atom(conn_pred(c.id, sc), ca),
                            [Literal(Atom(fire_pred(c.id, sc), ca)), Literal(Atom(conn_pred(p.id, sp), pa))])
    return Program(tuple(em.rules), firing.answer)


def _node(kind, name, args, status):
    return Skolem(kind, name, tuple(args), status)


def _rule_states(annotated):
    states = {}
    for u in annotated:
        states.setdefault(u.id, (u.base, set()))[1].update(u.statuses)
    return states


def add_edge_rules(connected: Program, annotated: list, question: Question | None = None) -> Program:
    """Skolemized edge rules over the connectivity predicates."""
    em = _Emitter()
    for r in connected.rules:
        em.emit(r.head, r.body)
    # a goal under a failed rule is annotated FT, but only its failed side is connected
    defined = {r.head.pred for r in connected.rules}
    if question is not None:
        st = "T" if question.is_why else "F"
        a = question.atom
        em.emit(Atom("node", (_node(REL, a.pred, a.args, st),)), [Literal(Atom(fire_pred(a.pred, st), a.args))])
    for rid, (base, states) in sorted(_rule_states(annotated).items()):
        vs = tuple(Var(v) for v in base.variables())
        head = base.head
        if "T" in states and conn_pred(rid, "T") in defined:
            conn = [Literal(Atom(conn_pred(rid, "T"), vs))]
            rnode = _node(RULE, rid, vs, "T")
            em.emit(Atom("edge", (_node(REL, head.pred, head.args, "T"), rnode)), conn)
            for j, item in enumerate(base.body, 1):
                gid = f"{rid}.{j}"
                if isinstance(item, Comparison):
                    em.emit(Atom("edge", (rnode, _node(GOAL, gid, (item.left, item.right), "T"))), conn)
                    continue
                g = _node(GOAL, gid, item.atom.args, "T")
                em.emit(Atom("edge", (rnode, g)), conn)
                ts = "F" if item.negated else "T"
                em.emit(Atom("edge", (g, _node(REL, item.atom.pred, item.atom.args, ts))), conn)
        if "F" in states and conn_pred(rid, "F") in defined:
            used = set(base.variables())
            slots = tuple(_fresh("V", used) for _ in base.body)
            rnode = _node(RULE, rid, vs, "F")
            em.emit(Atom("edge", (_node(REL, head.pred, head.args, "F"), rnode)),
                    [Literal(Atom(conn_pred(rid, "F"), vs + slots))])
            for j, item in enumerate(base.body, 1):
                gid = f"{rid}.{j}"
                failed = slots[: j - 1] + (FALSE,) + slots[j:]
                conn = [Literal(Atom(conn_pred(rid, "F"), vs + failed))]
                if isinstance(item, Comparison):
                    em.emit(Atom("edge", (rnode, _node(GOAL, gid, (item.left, item.right), "F"))), conn)
                    continue
                g = _node(GOAL, gid, item.atom.args, "F")
                em.emit(Atom("edge", (rnode, g)), conn)
                ts = "T" if item.negated else "F"
                em.emit(Atom("edge", (g, _node(REL, item.atom.pred, item.atom.args, ts))), conn)
    return Program(tuple(em.rules), _graph_answer(em.rules))


def _graph_answer(rules) -> str:
    return "edge" if any(r.head.pred == "edge" for r in rules) else "node"


def add_which_edge_rules(connected: Program, annotated: list, question: Question | None = None) -> Program:
    """Edges from head tuples straight to the tuples of positive goals."""
    for u in annotated:
        if "F" in u.annotation or any(isinstance(b, Literal) and b.negated for b in u.rule.body):
            raise NegationNotSupported("Which(X) edges are only defined for positive programs")
    em = _Emitter()
    for r in connected.rules:
        em.emit(r.head, r.body)
    if question is not None:
        a = question.atom
        em.emit(Atom("node", (_node(REL, a.pred, a.args, "T"),)), [Literal(Atom(fire_pred(a.pred, "T"), a.args))])
    for rid, (base, states) in sorted(_rule_states(annotated).items()):
        vs = tuple(Var(v) for v in base.variables())
        conn = [Literal(Atom(conn_pred(rid, "T"), vs))]
        src = _node(REL, base.head.pred, base.head.args, "T")
        for _, lit in base.relational():
            em.emit(Atom("edge", (src, _node(REL, lit.atom.pred, lit.atom.args, "T"))), conn)
    return Program(tuple(em.rules), _graph_answer(em.rules))


# -- driver ------------------------------------------------------------------------

def domain_relations(program: Program, dom: DomainAssignment) -> dict:
    """Facts for every DOM_<pred>_<i> predicate used by ``program``."""
    out = {}
    for r in program.rules:
        for b in r.body:
            if isinstance(b, Literal) and b.atom.pred.startswith("DOM_"):
                name = b.atom.pred
                pred, _, pos = name[4:].rpartition("_")
                out[name] = {(c,) for c in dom[(pred, int(pos) - 1)]}
    return out


@dataclass
class Pipeline:
    unified: list
    annotated: list
    firing: Program
    connected: Program
    final: Program

    def dump(self) -> str:
        parts = ["% unified"] + [str(u) for u in self.unified]
        parts += ["", "% annotated"] + [str(u) for u in self.annotated]
        for name, prog in (("firing", self.firing), ("connected", self.connected), ("edges", self.final)):
            parts += ["", f"% {name}"] + [str(r) for r in prog.rules]
        return "\n".join(parts) + "\n"


def build_pipeline(program: Program, question: Question, dom: DomainAssignment, kind: str = "Full") -> Pipeline:
    unified = unify_program(program, question)
    annotated = annotate_program(unified, question, program)
    firing = create_firing_rules(annotated, dom, program, question)
    connected = add_connectivity(firing, annotated, program, question)
    if kind.lower() == "which":
        final = add_which_edge_rules(connected, annotated, question)
    else:
        final = add_edge_rules(connected, annotated, question)
    return Pipeline(unified, annotated, firing, connected, final)


def explain(program: Program, instance: Instance, dom: DomainAssignment, question: Question,
            kind: str = "Full", pipeline: Pipeline | None = None) -> ProvGraph:
    """Explanation for ``question`` computed by evaluating the rewritten program."""
    if instance.undetermined:
        raise ProvError("explain needs an instance without undetermined facts; use the full-graph oracle")
    full = check_pattern(question, program, dom, instance)
    pipe = pipeline or build_pipeline(program, question, full, kind)
    final = pipe.final
    final.validate()
    extra = domain_relations(final, full)
    extra[BOOL_NOT] = {("true", "false"), ("false", "true")}
    for pred in final.edb:
        # generated predicates without rules denote empty relations
        if pred not in extra and pred not in instance.relations and pred.startswith(("FIRE_", "CONN_")):
            extra[pred] = set()
    db = run_program(final, instance.with_relations(extra))
    edges = set(db.facts.get("edge", {}))
    nodes = {t[0] for t in db.facts.get("node", {})}
    negated = set()
    for (_, d) in edges:
        if d.kind == GOAL:
            rid, j = d.name.rsplit(".", 1)
            item = program.rule(rid).body[int(j) - 1]
            if isinstance(item, Literal) and item.negated:
                negated.add(d.key)
    return ProvGraph.from_edges(edges, nodes, negated)
