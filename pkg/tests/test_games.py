from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from datalogprov.datalog import load_domains, load_instance, parse_program, parse_question
from datalogprov.errors import MalformedGame, UndeterminedStatusPresent
from datalogprov.games import GameGraph, from_game, to_game
from datalogprov.graph import ProvGraph, build_full_graph, extract_explanation, match
from datalogprov.labels import FACT, GOAL, NOT_REL, REL, RULE, parse_node
from progen import random_case

FIX = Path(__file__).parent / "fixtures"


def read_edges(path):
    edges = set()
    for line in Path(path).read_text().splitlines():
        if line.strip():
            s, d = line.split(" -> ")
            edges.add((parse_node(s), parse_node(d)))
    return edges


def explanation(name, question):
    d = FIX / name
    prog = parse_program((d / "program.dl").read_text())
    inst = load_instance(d)
    dom = load_domains(inst, d / "domains.txt")
    q = parse_question(question)
    return extract_explanation(build_full_graph(prog, inst, dom), match(q, prog, inst, dom))


def test_threehop_graph_matches_drawing():
    expl = explanation("threehop", "WHY Q3hop(s,s)")
    assert expl.edges == read_edges(FIX / "threehop" / "why_Q3hop_s_s.edges")


def test_threehop_game_matches_drawing():
    pg = ProvGraph.from_edges(read_edges(FIX / "threehop" / "why_Q3hop_s_s.edges"))
    game = to_game(pg)
    drawn = read_edges(FIX / "threehop" / "game.edges")
    # the drawing leaves out the negated head node in front of the root
    root = (parse_node("NOT_REL:Q3hop(s,s):L"), parse_node("REL:Q3hop(s,s):W"))
    assert game.edges == drawn | {root}


def test_status_mapping():
    expl = explanation("train", "WHY Q(n,s)")
    game = to_game(expl)
    by = {(n.kind, n.name, n.args): n.status for n in game.nodes}
    assert by[(REL, "Q", ("n", "s"))] == "W"
    assert by[(NOT_REL, "Q", ("n", "s"))] == "L"
    assert by[(RULE, "r1", ("n", "s", "c"))] == "L"
    assert by[(GOAL, "r1.3", ("n", "s"))] == "W"
    # absent EDB fact: no FACT node, positive tuple lost
    assert by[(REL, "T", ("n", "s"))] == "L"
    assert (FACT, "T", ("n", "s")) not in by
    assert by[(FACT, "T", ("n", "c"))] == "L"


def test_negated_goal_points_at_positive_tuple():
    game = to_game(explanation("train", "WHY Q(n,s)"))
    goal = next(n for n in game.nodes if n.kind == GOAL and n.name == "r1.3")
    assert [c.kind for c in game.successors[goal]] == [REL]


def test_roundtrip_on_train_explanations():
    for q in ("WHY Q(n,s)", "WHYNOT Q(s,n)", "WHYNOT Q(X,n)"):
        expl = explanation("train", q)
        back = from_game(to_game(expl))
        assert back.nodes == expl.nodes and back.edges == expl.edges


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6))
def test_roundtrip_random(seed):
    program, instance, dom, question = random_case(seed)
    expl = extract_explanation(build_full_graph(program, instance, dom), match(question, program, instance, dom))
    game = to_game(expl)
    back = from_game(game)
    assert back.nodes == expl.nodes and back.edges == expl.edges
    again = to_game(back)
    assert again.nodes == game.nodes and again.edges == game.edges


def test_undetermined_rejected():
    prog = parse_program((FIX / "train" / "program.dl").read_text())
    inst = load_instance(FIX / "train_undetermined")
    dom = load_domains(inst, FIX / "train" / "domains.txt")
    q = parse_question("WHY Q(n,s)")
    expl = extract_explanation(build_full_graph(prog, inst, dom), match(q, prog, inst, dom))
    with pytest.raises(UndeterminedStatusPresent):
        to_game(expl)


def test_malformed_game_rejected():
    bad = GameGraph.from_json('{"edges": [["REL:T(a):W", "RULE:r1(a):L"]]}')
    with pytest.raises(MalformedGame):
        from_game(bad)


def test_game_json_roundtrip():
    game = to_game(explanation("threehop", "WHY Q3hop(s,s)"))
    back = GameGraph.from_json(game.to_json())
    assert back.nodes == game.nodes and back.edges == game.edges


def test_game_dot():
    dot = to_game(explanation("threehop", "WHY Q3hop(s,s)")).to_dot()
    assert dot.startswith("digraph") and dot.count("->") == 26
