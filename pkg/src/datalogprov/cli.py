"""Command-line front end.

Exit status: 0 on success, 1 for bad input, 2 for internal failures.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .datalog import evaluate, load_domains, load_instance, parse_program, parse_question
from .errors import ProvError
from .factorize import DTree, check_path_condition, enumerate_dtrees, rewrite_for_dtree
from .fo import KInterpretation, dual_provenance, free_vars, parse_formula, translate
from .games import GameGraph, from_game, to_game
from .graph import ProvGraph, build_full_graph, complete_domains, extract_explanation, match
from .rewriter import build_pipeline, explain, unify_rule
from .semiring import Kind, transform_graph

SEMIRING_KINDS = {"nx": Kind.NX, "bx": Kind.BX, "trio": Kind.TRIO, "why": Kind.WHY, "posbool": Kind.POSBOOL}


def _read(path) -> str:
    return Path(path).read_text()


def _graph_out(graph, fmt: str) -> str:
    if fmt == "dot":
        return graph.to_dot()
    if fmt == "json":
        return graph.to_json()
    if fmt == "edgelist":
        return graph.to_edgelist()
    raise ProvError(f"format {fmt} is not available for graphs")


def _roots(graph: ProvGraph, matched):
    return [graph.tuple_node(p, t) for p, t in sorted(matched) if graph.tuple_node(p, t) is not None]


def _poly_lines(items) -> str:
    items = list(items)
    if len(items) == 1:
        return f"{items[0][1]}\n"
    return "".join(f"{label}: {value}\n" for label, value in items)


def cmd_explain(args) -> str:
    if args.kind == "dual":
        return _explain_dual(args)
    for opt in ("program", "data", "question"):
        if getattr(args, opt) is None:
            raise ProvError(f"--{opt} is required for kind {args.kind}")
    program = parse_program(_read(args.program))
    instance = load_instance(args.data)
    dom = load_domains(instance, args.domains)
    question = parse_question(args.question)
    fmt = args.format

    if args.dtree:
        if len(program.rules) != 1:
            raise ProvError("--dtree needs a single-rule conjunctive program")
        tree = DTree.from_json(_read(args.dtree))
        u = unify_rule(program.rules[0], question.atom)
        if u is None:
            raise ProvError(f"question {question} does not unify with the query head")
        program = rewrite_for_dtree(u.rule, tree)

    kind = "Which" if args.kind == "which" else "Full"
    if args.dump_stages:
        pipe = build_pipeline(program, question, complete_domains(program, dom), kind)
        sys.stderr.write(pipe.dump())
    if args.oracle:
        expl = extract_explanation(build_full_graph(program, instance, dom), match(question, program, instance, dom))
    else:
        expl = explain(program, instance, dom, question, kind)

    if args.kind == "full":
        return _graph_out(expl, fmt or "edgelist")
    if args.kind == "game":
        return _graph_out(to_game(expl), fmt or "edgelist")
    sr_kind = Kind.WHICH if args.kind == "which" else SEMIRING_KINDS[args.kind]
    fmt = fmt or "poly"
    if args.kind == "which" and fmt in ("edgelist", "json"):
        return _graph_out(expl, fmt)
    matched = match(question, program, instance, dom)
    roots = _roots(expl, matched)
    ops = [(str(r.label), transform_graph(expl, sr_kind, instance.annotations, r)) for r in roots]
    if fmt == "dot":
        return "".join(g.to_dot() for _, g in ops)
    if fmt != "poly":
        raise ProvError(f"format {fmt} is not available for kind {args.kind}")
    if args.dtree and sr_kind is Kind.NX:
        return _poly_lines((label, g.factorized()) for label, g in ops)
    return _poly_lines((label, g.read(sr_kind)) for label, g in ops)


def _load_interp(args):
    if not (args.formula and args.interp and args.domain is not None):
        raise ProvError("dual provenance needs --formula, --interp and --domain")
    formula = parse_formula(args.formula)
    pi = KInterpretation.parse(_read(args.interp))
    domain = [c.strip() for c in args.domain.split(",") if c.strip()]
    return formula, pi, domain


def _dual(formula, pi, domain):
    if free_vars(formula):
        raise ProvError("dual provenance expects a sentence; quote constants like \"a\"")
    return dual_provenance(formula, pi, domain)


def _explain_dual(args) -> str:
    formula, pi, domain = _load_interp(args)
    poly, program, graph = _dual(formula, pi, domain)
    if (args.format or "poly") == "poly":
        return f"{poly}\n"
    return _graph_out(graph.reachable([graph.tuple_node(program.answer, ())]), args.format)


def cmd_eval(args) -> str:
    program = parse_program(_read(args.program))
    result = evaluate(program, load_instance(args.data))
    lines = []
    for pred in sorted(program.idb):
        for t in sorted(result.relations[pred]):
            lines.append(f"{pred}({','.join(t)})" if args.format == "atoms" else ",".join((pred,) + t))
    return "".join(line + "\n" for line in lines)


def cmd_fo_translate(args) -> str:
    return str(translate(parse_formula(args.formula))) + "\n"


def cmd_fo_extract(args) -> str:
    formula, pi, domain = _load_interp(args)
    return f"{_dual(formula, pi, domain)[0]}\n"


def cmd_factorize(args) -> str:
    program = parse_program(_read(args.program))
    if len(program.rules) != 1:
        raise ProvError("factorization needs a single-rule conjunctive program")
    tree = DTree.from_json(_read(args.dtree))
    query = program.rules[0]
    if args.question:
        u = unify_rule(query, parse_question(args.question).atom)
        if u is None:
            raise ProvError(f"question {args.question} does not unify with the query head")
        query = u.rule
    return str(rewrite_for_dtree(query, tree, merge=not args.no_merge)) + "\n"


def cmd_dtree_check(args) -> str:
    program = parse_program(_read(args.program))
    query = program.rules[0]
    if args.enumerate:
        trees = [json.loads(t.to_json()) for t in enumerate_dtrees(query)]
        return json.dumps(trees, indent=2) + "\n"
    if not args.dtree:
        raise ProvError("--dtree or --enumerate is required")
    report = check_path_condition(query, DTree.from_json(_read(args.dtree)))
    lines = ["valid" if report.valid else "invalid"]
    lines += [f"  {atom}: {a} and {b} are on different branches" for atom, (a, b) in report.violations]
    return "\n".join(lines) + "\n"


def cmd_game_convert(args) -> str:
    text = _read(args.input)
    if args.reverse:
        return _graph_out(from_game(GameGraph.from_json(text)), args.format)
    return _graph_out(to_game(ProvGraph.from_json(text)), args.format)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="datalogprov", description="Why and why-not provenance for Datalog.")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("explain", help="explain a provenance question")
    e.add_argument("--program")
    e.add_argument("--data", help="directory of <pred>.csv files")
    e.add_argument("--domains", help="domain groups file")
    e.add_argument("--question")
    e.add_argument("--kind", default="full", choices=["full", "game", "nx", "bx", "trio", "why", "posbool", "which", "dual"])
    e.add_argument("--format", choices=["dot", "edgelist", "json", "poly"])
    e.add_argument("--dtree", help="d-tree JSON for factorized provenance")
    e.add_argument("--dump-stages", action="store_true", help="print each rewriting stage to stderr")
    e.add_argument("--oracle", action="store_true", help="use the brute-force full graph instead of rewriting")
    e.add_argument("--formula")
    e.add_argument("--interp")
    e.add_argument("--domain")
    e.set_defaults(func=cmd_explain)

    v = sub.add_parser("eval", help="evaluate a program")
    v.add_argument("--program", required=True)
    v.add_argument("--data", required=True)
    v.add_argument("--format", default="atoms", choices=["atoms", "csv"])
    v.set_defaults(func=cmd_eval)

    t = sub.add_parser("fo-translate", help="translate a formula to Datalog")
    t.add_argument("--formula", required=True)
    t.set_defaults(func=cmd_fo_translate)

    x = sub.add_parser("fo-extract", help="dual polynomial of a sentence")
    x.add_argument("--formula", required=True)
    x.add_argument("--interp", required=True)
    x.add_argument("--domain", required=True)
    x.set_defaults(func=cmd_fo_extract)

    f = sub.add_parser("factorize", help="rewrite a query for a d-tree")
    f.add_argument("--program", required=True)
    f.add_argument("--dtree", required=True)
    f.add_argument("--question", help="bind head constants before rewriting")
    f.add_argument("--no-merge", action="store_true")
    f.set_defaults(func=cmd_factorize)

    d = sub.add_parser("dtree-check", help="check or enumerate d-trees")
    d.add_argument("--program", required=True)
    d.add_argument("--dtree")
    d.add_argument("--enumerate", action="store_true")
    d.set_defaults(func=cmd_dtree_check)

    g = sub.add_parser("game-convert", help="explanation JSON to game, or back with --reverse")
    g.add_argument("--input", required=True)
    g.add_argument("--reverse", action="store_true")
    g.add_argument("--format", default="json", choices=["dot", "edgelist", "json"])
    g.set_defaults(func=cmd_game_convert)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = args.func(args)
    except (ProvError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(out)
    return 0
