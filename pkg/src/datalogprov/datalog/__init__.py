"""Non-recursive Datalog with negation: syntax, parser, evaluator."""
from .evaluate import ThreeValued, compare, evaluate, evaluate3
from .instance import DomainAssignment, Instance, active_domain, default_domains
from .io import load_domains, load_instance, read_groups
from .parser import parse_atom, parse_program, parse_question, parse_rule
from .syntax import Atom, Comparison, Const, Literal, Program, Question, Rule, Skolem, Var

__all__ = [
    "Atom", "Comparison", "Const", "DomainAssignment", "Instance", "Literal", "Program",
    "Question", "Rule", "Skolem", "ThreeValued", "Var", "active_domain", "compare",
    "default_domains", "evaluate", "evaluate3", "load_domains", "load_instance",
    "parse_atom", "parse_program", "parse_question", "parse_rule", "read_groups",
]
