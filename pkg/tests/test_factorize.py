import random
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from datalogprov.datalog import (
    default_domains, evaluate, load_domains, load_instance, parse_program, parse_question,
)
from datalogprov.errors import InvalidDTree, PathConditionViolated, VariableCoverageMismatch
from datalogprov.factorize import (
    DNode, DTree, check_path_condition, dependency_keys, enumerate_dtrees, factorized_explain,
    rewrite_for_dtree, with_keys,
)
from datalogprov.rewriter import explain
from datalogprov.semiring import Kind, explanation_size, extract_polynomial, transform_graph
from progen import SUPP_CUST, annotate, random_instance, supp_cust_instance, uniform_domain

FIX = Path(__file__).parent / "fixtures" / "twohop"


def twohop():
    query = parse_program((FIX / "r4.dl").read_text()).rules[0]
    inst = load_instance(FIX)
    return query, inst, load_domains(inst, FIX / "domains.txt")


def tree(name):
    return DTree.from_json((FIX / name).read_text())


def bodies(program):
    return [str(r).split(": ", 1)[1] for r in program.rules]


def test_rewrite_twohop_t1():
    query, _, _ = twohop()
    assert bodies(rewrite_for_dtree(query, tree("t1.json"))) == [
        "Q2hop() :- Q_L1(Z), Q_L2(Z).",
        "Q_L1(Z) :- H(Y,L1,Z).",
        "Q_L2(Z) :- H(Z,L2,d).",
    ]


def test_rewrite_without_merge_keeps_every_variable():
    query, _, _ = twohop()
    prog = rewrite_for_dtree(query, tree("t1.json"), merge=False)
    assert {r.head.pred for r in prog.rules} == {"Q2hop", "Q_Z", "Q_L1", "Q_Y", "Q_L2"}


def test_factorized_polynomial():
    query, inst, dom = twohop()
    q = parse_question("WHY Q2hop()")
    expl = factorized_explain(query, inst, dom, q, tree("t1.json"))
    g = transform_graph(expl, Kind.NX, inst.annotations)
    assert g.factorized() == "(s1+s2+t1+t2)*(u1+u2)"
    flat = explain(parse_program(str(query)), inst, dom, q)
    flat_poly = extract_polynomial(flat, ("Q2hop", ()), inst.annotations)
    assert g.read() == flat_poly
    assert len(flat_poly.terms) == 8


def test_factorized_explanation_is_smaller():
    query, inst, dom = twohop()
    q = parse_question("WHY Q2hop()")
    fact = factorized_explain(query, inst, dom, q, tree("t1.json"))
    flat = explain(parse_program(str(query)), inst, dom, q)
    assert explanation_size(fact) == 16
    assert explanation_size(flat) == 25


def test_path_condition():
    query, _, _ = twohop()
    assert check_path_condition(query, tree("t1.json")).valid
    assert check_path_condition(query, tree("t2.json")).valid
    split = DTree((DNode("Y", None, (DNode("L1"),)), DNode("Z", None, (DNode("L2"),))))
    report = check_path_condition(query, split)
    assert not report.valid
    assert any(set(pair) == {"Y", "Z"} for _, pair in report.violations)
    with pytest.raises(PathConditionViolated):
        rewrite_for_dtree(query, split)


def test_coverage_mismatch():
    query, _, _ = twohop()
    with pytest.raises(VariableCoverageMismatch):
        check_path_condition(query, DTree((DNode("Z", None, (DNode("L1"),)),)))


def test_keys_are_computed_and_checked():
    query, _, _ = twohop()
    keys = dependency_keys(query, tree("t1.json"))
    assert keys == {"Z": frozenset(), "L1": {"Z"}, "Y": {"L1", "Z"}, "L2": {"Z"}}
    wrong = DTree((DNode("Z", frozenset(), (
        DNode("L1", frozenset({"Z", "Y"}), (DNode("Y"),)), DNode("L2"))),))
    with pytest.raises(InvalidDTree):
        rewrite_for_dtree(query, wrong)


def test_enumerate_twohop():
    query, _, _ = twohop()
    trees = enumerate_dtrees(query)
    assert len(trees) == 30
    assert all(check_path_condition(query, t).valid for t in trees)
    assert len({t.to_json() for t in trees}) == 30


def test_dtree_json_roundtrip():
    t = with_keys(twohop()[0], tree("t2.json"))
    assert DTree.from_json(t.to_json()) == t


def test_enumerate_limit():
    query = parse_program("r1: Q() :- A(X1,X2,X3,X4,X5,X6,X7).").rules[0]
    with pytest.raises(ValueError):
        enumerate_dtrees(query)


def random_query(rng):
    preds = {"E": 2, "S": 1}
    vs = "XYZW"[: rng.randint(1, 4)]
    body = []
    for _ in range(rng.randint(1, 3)):
        p = rng.choice(sorted(preds))
        body.append(f"{p}({','.join(rng.choice(vs) for _ in range(preds[p]))})")
    used = sorted({c for b in body for c in b if c in vs})
    head = rng.sample(used, rng.randint(0, min(2, len(used))))
    return parse_program(f"r1: Q({','.join(head)}) :- {', '.join(body)}.").rules[0]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_rewriting_preserves_answers(seed):
    rng = random.Random(seed)
    query = random_query(rng)
    consts = list("abc")
    inst = random_instance(rng, consts)
    want = evaluate(parse_program(str(query)), inst).relations["Q"]
    for t in enumerate_dtrees(query):
        for merge in (True, False):
            assert evaluate(rewrite_for_dtree(query, t, merge), inst).relations["Q"] == want


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_factorized_provenance_expands_to_flat(seed):
    rng = random.Random(seed)
    query = random_query(rng)
    consts = list("abc")
    inst = annotate(random_instance(rng, consts))
    dom = uniform_domain(consts)
    program = parse_program(str(query))
    args = ",".join(f"V{k}" for k in range(query.head.arity))
    q = parse_question(f"WHY Q({args})")
    flat = explain(program, inst, dom, q)
    roots = sorted(n for n in flat.nodes if n.name == "Q")
    trees = enumerate_dtrees(query)
    for t in rng.sample(trees, min(3, len(trees))):
        fact = factorized_explain(query, inst, dom, q, t)
        for r in roots:
            want = extract_polynomial(flat, r, inst.annotations)
            got = transform_graph(fact, Kind.NX, inst.annotations, (r.name, r.args)).read()
            assert got == want


def _supp_cust_sizes(n):
    query = parse_program(SUPP_CUST).rules[0]
    inst = supp_cust_instance(n)
    dom = default_domains(inst)
    q = parse_question("WHY suppCust(N)")
    t = DTree((DNode("S"), DNode("C")), ("N",))
    fact = factorized_explain(query, inst, dom, q, t)
    flat = explain(parse_program(SUPP_CUST), inst, dom, q)
    return explanation_size(fact), explanation_size(flat)


def test_supp_cust_growth():
    f20, e20 = _supp_cust_sizes(20)
    f40, e40 = _supp_cust_sizes(40)
    assert f40 < 2.2 * f20
    assert e40 > 3.5 * e20
