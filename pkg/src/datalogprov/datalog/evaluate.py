"""Bottom-up evaluation in topological predicate order.

One engine serves both the two-valued and the three-valued semantics: stored
tuples carry a status (T or U) and a derivation's status is the meet of its
goal statuses with F < U < T.
"""
from __future__ import annotations

from ..errors import ArityMismatch, MissingRelation
from ..labels import Node
from .instance import Instance
from .syntax import Comparison, Const, Literal, Program, Rule, Skolem, Var

_RANK = {"F": 0, "U": 1, "T": 2}
_BY_RANK = ("F", "U", "T")


def _as_int(v):
    try:
        return int(v)
    except (TypeError, ValueError):
        return None


def compare(a, op: str, b) -> bool:
    """Builtin comparison on constants; integer order if both sides are integers."""
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    ia, ib = _as_int(a), _as_int(b)
    if ia is not None and ib is not None:
        a, b = ia, ib
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    raise ValueError(f"unknown comparison operator {op}")


class Database:
    """Relations with per-tuple status plus lazily built hash indexes."""

    def __init__(self):
        self.facts = {}
        self._indexes = {}

    def add(self, pred, tup, status):
        rel = self.facts.setdefault(pred, {})
        old = rel.get(tup)
        if old is None or _RANK[status] > _RANK[old]:
            rel[tup] = status

    def status(self, pred, tup) -> str:
        return self.facts.get(pred, {}).get(tup, "F")

    def index(self, pred, positions):
        key = (pred, positions)
        idx = self._indexes.get(key)
        if idx is None:
            idx = {}
            for tup, st in self.facts.get(pred, {}).items():
                idx.setdefault(tuple(tup[p] for p in positions), []).append((tup, st))
            self._indexes[key] = idx
        return idx


def _term_spec(term, slots):
    if isinstance(term, Var):
        return ("v", slots[term.name])
    if isinstance(term, Const):
        return ("c", term.value)
    if isinstance(term, Skolem):
        return ("s", term.kind, term.name, tuple(_term_spec(a, slots) for a in term.args), term.status)
    raise TypeError(term)


def _build(spec, env):
    tag = spec[0]
    if tag == "v":
        return env[spec[1]]
    if tag == "c":
        return spec[1]
    return Node(spec[1], spec[2], tuple(_build(a, env) for a in spec[3]), spec[4])


class CompiledRule:
    """Join plan for one rule: positive goals greedily ordered, filters placed early."""

    def __init__(self, rule: Rule, sizes=None):
        self.rule = rule
        self.variables = rule.variables()
        slots = {v: i for i, v in enumerate(self.variables)}
        self.slots = slots
        sizes = sizes or {}
        positives = [b for b in rule.body if isinstance(b, Literal) and not b.negated]
        filters = [b for b in rule.body if not (isinstance(b, Literal) and not b.negated)]
        bound, steps = set(), []

        def place_filters():
            for f in list(filters):
                if set(f.variables()) <= bound:
                    filters.remove(f)
                    steps.append(self._filter_step(f, slots))

        place_filters()
        while positives:
            def score(a):
                args = a.atom.args
                n_bound = sum(1 for t in args if isinstance(t, Const) or (isinstance(t, Var) and t.name in bound))
                return (-n_bound, sizes.get(a.atom.pred, 0))
            best = min(positives, key=score)
            positives.remove(best)
            steps.append(self._scan_step(best.atom, slots, bound))
            bound.update(best.atom.variables())
            place_filters()
        assert not filters, "unsafe rule reached the evaluator"
        self.steps = steps
        self.head = tuple(_term_spec(t, slots) for t in rule.head.args)

    @staticmethod
    def _scan_step(atom, slots, bound):
        key_pos, key_src, assign, checks = [], [], [], []
        fresh = {}
        for i, t in enumerate(atom.args):
            if isinstance(t, Const):
                key_pos.append(i)
                key_src.append(("c", t.value))
            elif t.name in bound:
                key_pos.append(i)
                key_src.append(("v", slots[t.name]))
            elif t.name in fresh:
                checks.append((i, fresh[t.name]))
            else:
                fresh[t.name] = i
                assign.append((slots[t.name], i))
        return ("scan", atom.pred, tuple(key_pos), tuple(key_src), tuple(assign), tuple(checks))

    @staticmethod
    def _filter_step(item, slots):
        if isinstance(item, Comparison):
            return ("cmp", _term_spec(item.left, slots), item.op, _term_spec(item.right, slots))
        return ("neg", item.atom.pred, tuple(_term_spec(t, slots) for t in item.atom.args))

    def derivations(self, db: Database):
        """Yield (env, status) for every derivation whose status is T or U."""
        env = [None] * len(self.variables)
        steps = self.steps
        n = len(steps)

        def run(k, status):
            if k == n:
                yield env, status
                return
            step = steps[k]
            tag = step[0]
            if tag == "scan":
                _, pred, key_pos, key_src, assign, checks = step
                key = tuple(env[s[1]] if s[0] == "v" else s[1] for s in key_src)
                for tup, st in db.index(pred, key_pos).get(key, ()):
                    if checks and any(tup[i] != tup[j] for i, j in checks):
                        continue
                    for slot, i in assign:
                        env[slot] = tup[i]
                    yield from run(k + 1, "U" if st == "U" else status)
            elif tag == "neg":
                tup = tuple(_build(s, env) for s in step[2])
                st = db.status(step[1], tup)
                if st == "T":
                    return
                yield from run(k + 1, "U" if st == "U" else status)
            else:
                if compare(_build(step[1], env), step[2], _build(step[3], env)):
                    yield from run(k + 1, status)

        yield from run(0, "T")

    def head_tuple(self, env) -> tuple:
        return tuple(_build(s, env) for s in self.head)


def check_instance(program: Program, instance: Instance) -> None:
    arities = program.arities()
    present = set(instance.relations) | {p for p, _ in instance.undetermined}
    for pred in sorted(program.edb):
        if pred not in present:
            raise MissingRelation(f"no relation for EDB predicate {pred}")
        ar = instance.arity(pred)
        if ar is not None and ar != arities[pred] and (instance.relations.get(pred) or any(q == pred for q, _ in instance.undetermined)):
            raise ArityMismatch(f"relation {pred} has arity {ar}, program uses {arities[pred]}")


def run_program(program: Program, instance: Instance) -> Database:
    check_instance(program, instance)
    db = Database()
    for pred, tuples in instance.relations.items():
        for t in tuples:
            db.add(pred, t, "T")
    for pred, t in instance.undetermined:
        db.add(pred, t, "U")
    for pred in program.topological_order():
        db.facts.setdefault(pred, {})
        for rule in program.rules_for(pred):
            sizes = {p: len(r) for p, r in db.facts.items()}
            compiled = CompiledRule(rule, sizes)
            for env, status in compiled.derivations(db):
                db.add(pred, compiled.head_tuple(env), status)
    return db


def evaluate(program: Program, instance: Instance) -> Instance:
    """P(I): the instance extended with all IDB relations."""
    if instance.undetermined:
        raise ValueError("instance has undetermined facts; use evaluate3")
    db = run_program(program, instance)
    rels = dict(instance.relations)
    for pred in program.idb:
        rels[pred] = frozenset(db.facts.get(pred, {}))
    return Instance(rels, instance.annotations, frozenset(), instance.attributes)


class ThreeValued(dict):
    """Map (pred, tuple) -> 'T' or 'U'; absent keys read as 'F'."""

    def __missing__(self, key):
        return "F"

    def status(self, pred, tup) -> str:
        return self[(pred, tuple(tup))]


def evaluate3(program: Program, instance: Instance) -> ThreeValued:
    db = run_program(program, instance)
    out = ThreeValued()
    for pred, rel in db.facts.items():
        for t, st in rel.items():
            out[(pred, t)] = st
    return out
