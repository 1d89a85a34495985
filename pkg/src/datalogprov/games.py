"""Translations between explanations and provenance games."""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

from .errors import MalformedGame, UndeterminedStatusPresent
from .graph import ProvGraph, to_dot
from .labels import FACT, GOAL, NOT_REL, REL, RULE, Node, parse_node

RULE_TO_GAME = {"T": "L", "F": "W"}
GOAL_TO_GAME = {"T": "W", "F": "L"}
TUPLE_TO_GAME = {"T": "W", "F": "L"}
FLIP = {"W": "L", "L": "W"}


@dataclass(frozen=True)
class GameGraph:
    nodes: frozenset
    edges: frozenset

    @cached_property
    def successors(self) -> dict:
        out = {n: [] for n in self.nodes}
        for s, d in self.edges:
            out[s].append(d)
        return out

    @cached_property
    def predecessors(self) -> dict:
        out = {n: [] for n in self.nodes}
        for s, d in self.edges:
            out[d].append(s)
        return out

    def edge_lines(self) -> list:
        return sorted(f"{s} -> {d}" for s, d in self.edges)

    def to_edgelist(self) -> str:
        return "".join(line + "\n" for line in self.edge_lines())

    def to_dot(self) -> str:
        return to_dot(self.nodes, self.edges, "game")

    def to_json(self) -> str:
        data = {
            "nodes": sorted(str(n) for n in self.nodes),
            "edges": [[str(s), str(d)] for s, d in sorted(self.edges)],
        }
        return json.dumps(data, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "GameGraph":
        data = json.loads(text)
        edges = {(parse_node(s), parse_node(d)) for s, d in data.get("edges", ())}
        nodes = {parse_node(s) for s in data.get("nodes", ())}
        for s, d in edges:
            nodes.update((s, d))
        return cls(frozenset(nodes), frozenset(edges))


def to_game(expl: ProvGraph) -> GameGraph:
    """Expand every tuple node into a negated/positive pair (plus a fact node
    for existing EDB tuples) and switch statuses to won/lost."""
    for n in expl.nodes:
        if n.status == "U":
            raise UndeterminedStatusPresent(f"{n} is undetermined")
    nodes, edges = set(), set()
    pos, neg = {}, {}
    for n in expl.nodes:
        if n.kind == REL:
            p = Node(REL, n.name, n.args, TUPLE_TO_GAME[n.status])
            q = Node(NOT_REL, n.name, n.args, FLIP[p.status])
            pos[n], neg[n] = p, q
            nodes.update((p, q))
            edges.add((q, p))
            if n.status == "T" and not expl.successors[n]:
                f = Node(FACT, n.name, n.args, "L")
                nodes.add(f)
                edges.add((p, f))
        elif n.kind == RULE:
            pos[n] = Node(RULE, n.name, n.args, RULE_TO_GAME[n.status])
            nodes.add(pos[n])
        elif n.kind == GOAL:
            pos[n] = Node(GOAL, n.name, n.args, GOAL_TO_GAME[n.status])
            nodes.add(pos[n])
        else:
            raise ValueError(f"unexpected node kind in explanation: {n}")
    for s, d in expl.edges:
        if s.kind == GOAL and d.kind == REL:
            target = neg[d] if s.status == d.status else pos[d]
            edges.add((pos[s], target))
        else:
            edges.add((pos[s], pos[d]))
    return GameGraph(frozenset(nodes), frozenset(edges))


def from_game(game: GameGraph) -> ProvGraph:
    """Collapse tuple chains back into single tuple nodes."""
    succ, pred = game.successors, game.predecessors
    positives = {n.key[1:]: n for n in game.nodes if n.kind == REL}
    negatives = {n.key[1:]: n for n in game.nodes if n.kind == NOT_REL}
    if set(positives) != set(negatives):
        missing = sorted(set(positives) ^ set(negatives))
        raise MalformedGame(f"tuples without both polarities: {missing[:3]}")
    out = {}
    for key, p in positives.items():
        q = negatives[key]
        if p.status not in ("W", "L") or q.status != FLIP[p.status]:
            raise MalformedGame(f"{q} -> {p} must have opposite won/lost labels")
        if succ[q] != [p]:
            raise MalformedGame(f"{q} must have exactly one successor, its positive tuple")
        out[p] = out[q] = Node(REL, p.name, p.args, "T" if p.status == "W" else "F")
    for n in game.nodes:
        if n.kind == FACT:
            parents = pred[n]
            if succ[n] or n.status != "L" or len(parents) != 1 or parents[0].key != (REL, n.name, n.args) \
                    or parents[0].status != "W":
                raise MalformedGame(f"fact node {n} is not the end of a won tuple chain")
        elif n.kind == RULE:
            out[n] = Node(RULE, n.name, n.args, {"L": "T", "W": "F"}[n.status])
        elif n.kind == GOAL:
            out[n] = Node(GOAL, n.name, n.args, {"W": "T", "L": "F"}[n.status])
    edges = set()
    for s, d in game.edges:
        if d.kind == FACT or (s.kind == NOT_REL and d.kind == REL):
            continue
        if s.kind in (NOT_REL, FACT):
            raise MalformedGame(f"unexpected edge {s} -> {d}")
        edges.add((out[s], out[d]))
    nodes = {out[n] for n in game.nodes if n.kind != FACT}
    return ProvGraph.from_edges(edges, nodes)
