import itertools
import random
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from datalogprov.datalog import evaluate
from datalogprov.errors import IllegalInterpretation, NotTranslatedProgram, ProgramSyntaxError
from datalogprov.fo import (
    FAnd, FAtom, FCmp, FExists, FForall, FNot, FOr, FVar, KInterpretation, dual_provenance,
    edb_predicates, extract_dual, free_vars, instance_of_interpretation, kinter_eval, nnf,
    parse_formula, rename_apart, translate,
)
from datalogprov.datalog.evaluate import compare
from datalogprov.graph import build_full_graph, resolve_undetermined
from datalogprov.datalog import DomainAssignment, parse_program
from datalogprov.semiring import Polynomial
from progen import FO_PREDS, random_fo_case, random_formula

FIX = Path(__file__).parent / "fixtures" / "fo"
P = Polynomial.parse


# -- syntax ----------------------------------------------------------------------

def test_parse_formula_forms():
    f = parse_formula("forall x. exists y. R(x,y)")
    assert f == FForall("x", FExists("y", FAtom("R", (FVar("x"), FVar("y")))))
    assert parse_formula("∀x ∃y R(x,y)") == f
    assert free_vars(parse_formula("R(x,'a') & S(y)")) == {"x", "y"}


def test_parse_formula_errors():
    with pytest.raises(ProgramSyntaxError):
        parse_formula("forall . R(x)")
    with pytest.raises(ProgramSyntaxError):
        parse_formula("R(x) &")


def test_nnf_pushes_negation_to_literals():
    f = nnf(parse_formula("!(forall x. exists y. R(x,y) & x != y)"))
    assert str(f) == "exists x. forall y. !R(x,y) | x = y"


def _only_literal_negation(f):
    if isinstance(f, FNot):
        return isinstance(f.sub, FAtom)
    if isinstance(f, (FAnd, FOr)):
        return _only_literal_negation(f.left) and _only_literal_negation(f.right)
    if isinstance(f, (FExists, FForall)):
        return _only_literal_negation(f.sub)
    return True


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6))
def test_nnf_shape_and_meaning(seed):
    f, pi, consts = random_fo_case(seed)
    g = nnf(f)
    assert _only_literal_negation(g)
    assert kinter_eval(f, pi, consts) == kinter_eval(g, pi, consts)


def _binders(f, out):
    if isinstance(f, (FExists, FForall)):
        out.append(f.var)
        _binders(f.sub, out)
    elif isinstance(f, (FAnd, FOr)):
        _binders(f.left, out)
        _binders(f.right, out)
    elif isinstance(f, FNot):
        _binders(f.sub, out)
    return out


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6))
def test_rename_apart_binds_each_name_once(seed):
    f, pi, consts = random_fo_case(seed)
    g = rename_apart(f)
    names = _binders(g, [])
    assert len(names) == len(set(names))
    assert kinter_eval(f, pi, consts) == kinter_eval(g, pi, consts)


# -- translation -------------------------------------------------------------------

def test_translate_forall_exists():
    prog = translate(parse_formula("forall x. exists y. R(x,y)"))
    assert [str(r) for r in prog.rules] == [
        "r1: Q_phi() :- not Q_phi_aux().",
        "r2: Q_phi_aux() :- Dom(X), not Q_phi1(X).",
        "r3: Q_phi1(X) :- Dom(Y), Q_phi2(X,Y).",
        "r4: Q_phi2(X,Y) :- R(X,Y).",
    ]
    assert prog.forall_aux == {"Q_phi_aux"}


def test_translate_negated_literal_is_guarded():
    prog = translate(parse_formula("exists x. R(x,'a') & !S(x)"))
    assert "r4: Q_phi3(X) :- Dom(X), not S(X)." in [str(r) for r in prog.rules]


def _model_check(f, facts, domain, env=None):
    env = env or {}

    def val(t):
        return env[t.name] if isinstance(t, FVar) else t.value

    if isinstance(f, FAtom):
        return (f.pred, tuple(val(a) for a in f.args)) in facts
    if isinstance(f, FCmp):
        return compare(val(f.left), f.op, val(f.right))
    if isinstance(f, FNot):
        return not _model_check(f.sub, facts, domain, env)
    if isinstance(f, FAnd):
        return _model_check(f.left, facts, domain, env) and _model_check(f.right, facts, domain, env)
    if isinstance(f, FOr):
        return _model_check(f.left, facts, domain, env) or _model_check(f.right, facts, domain, env)
    test = all if isinstance(f, FForall) else any
    return test(_model_check(f.sub, facts, domain, {**env, f.var: c}) for c in domain)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6))
def test_translation_agrees_with_model_checker(seed):
    rng = random.Random(seed)
    consts = list("abc"[: rng.randint(1, 3)])
    f = random_formula(rng, consts)
    facts = {(p, t) for p, ar in FO_PREDS.items() for t in itertools.product(consts, repeat=ar)
             if rng.random() < 0.5}
    pi = KInterpretation({k: ("1", "0") for k in facts})
    prog = translate(f)
    inst = instance_of_interpretation(pi, consts, edb_predicates(prog))
    res = evaluate(prog, inst)
    assert (() in res.relations[prog.answer]) == _model_check(f, facts, consts)


# -- K-interpretations ---------------------------------------------------------------

def test_interpretation_shapes():
    KInterpretation({("R", ("a",)): ("x", "x_bar"), ("R", ("b",)): ("1", "0"), ("S", ("a",)): ("0", "y_bar")})
    for bad in (("x", "y_bar"), ("1", "1"), ("0", "0"), ("x_bar", "0"), ("0", "x")):
        with pytest.raises(IllegalInterpretation):
            KInterpretation({("R", ("a",)): bad})


def test_interpretation_variables_are_unique():
    with pytest.raises(IllegalInterpretation):
        KInterpretation({("R", ("a",)): ("x", "0"), ("R", ("b",)): ("x", "0")})


def test_interpretation_default_is_false():
    pi = KInterpretation({})
    assert pi.literal("R", ("a",), True) == 0
    assert pi.literal("R", ("a",), False) == 1


def test_interpretation_csv():
    pi = KInterpretation.parse((FIX / "forall_exists.csv").read_text())
    assert pi.pair("R", ("b", "a")) == ("y", "y_bar")
    assert pi.pair("R", ("a", "b")) == ("0", "1")


# -- dual polynomials ------------------------------------------------------------------

def test_forall_exists_dual():
    pi = KInterpretation.parse((FIX / "forall_exists.csv").read_text())
    poly, _, _ = dual_provenance(parse_formula("forall x. exists y. R(x,y)"), pi, ["a", "b"])
    assert poly == P("x*y")


def train_case():
    pi = KInterpretation.parse((FIX / "train.csv").read_text())
    f = parse_formula("exists z. T('n',z) & T(z,'s') & !T('n','s')")
    return f, pi, ["c", "n", "s", "w"]


def test_train_dual_with_undetermined_fact():
    poly, _, _ = dual_provenance(*train_case())
    assert poly == P("t*s*v_bar + u*r*v_bar")
    assert poly.substitute({"v_bar": 0}) == 0
    assert poly.substitute({"v": 0}) == poly


def test_extract_needs_translated_program():
    prog = parse_program("r1: Q() :- R(X).")
    inst = instance_of_interpretation(KInterpretation({}), ["a"], {"R": 1})
    g = build_full_graph(prog, inst, DomainAssignment.uniform({"R": 1}, ["a"]))
    with pytest.raises(NotTranslatedProgram):
        extract_dual(g, ("Q", ()), KInterpretation({}), prog)


def test_kinter_eval_direct():
    pi = KInterpretation.parse((FIX / "forall_exists.csv").read_text())
    assert kinter_eval(parse_formula("exists x. R(x,'a')"), pi, ["a", "b"]) == P("x + y")
    assert kinter_eval(parse_formula("!R('b','a')"), pi, ["a", "b"]) == P("y_bar")


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6))
def test_dual_extraction_equals_direct_evaluation(seed):
    f, pi, consts = random_fo_case(seed)
    assert dual_provenance(f, pi, consts)[0] == kinter_eval(f, pi, consts)


def _resolved_pi(pi, fact, keep):
    rows = dict(pi.rows)
    pos, neg = rows[fact]
    rows[fact] = (pos, "0") if keep else ("0", neg)
    return KInterpretation(rows)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_substitution_matches_resolution(seed):
    f, pi, consts = random_fo_case(seed)
    poly, prog, graph = dual_provenance(f, pi, consts)
    undet = [k for k, (p, n) in pi.rows.items() if p not in "01" and n not in "01"]
    for fact in undet:
        pos, neg = pi.rows[fact]
        in_graph = graph.tuple_node(*fact) is not None
        for keep in (True, False):
            g = resolve_undetermined(graph, {fact: keep}) if in_graph else graph
            again = extract_dual(g, (prog.answer, ()), _resolved_pi(pi, fact, keep), prog)
            assert again == poly.substitute({neg if keep else pos: 0})
