"""Text syntax for programs and provenance questions.

    r1: Q(X,Y) :- T(X,Z), T(Z,Y), not T(X,Y).

Rule labels are optional; unlabeled rules get ``r<i>`` for their source
position.  Comments start with ``%``.
"""
from __future__ import annotations

import re

from ..errors import ProgramSyntaxError
from .syntax import Atom, Comparison, Const, Literal, Program, Question, Rule, Var, default_answer

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|%[^\n]*)
  | (?P<string>"(?:[^"\\]|\\.)*"|'(?:[^'\\]|\\.)*')
  | (?P<int>-?[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>:-|<=|>=|!=|≠|≤|≥|[(),.:=<>])
    """,
    re.VERBOSE,
)

_OP_ALIASES = {"≠": "!=", "≤": "<=", "≥": ">="}


class _Tok:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind, self.text, self.line, self.col = kind, text, line, col


def _tokenize(text: str) -> list:
    toks, pos, line, line_start = [], 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ProgramSyntaxError("unexpected character", line, pos - line_start + 1, text[pos])
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        for i, ch in enumerate(m.group()):
            if ch == "\n":
                line += 1
                line_start = pos + i + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


def _unquote(s: str) -> str:
    return re.sub(r"\\(.)", r"\1", s[1:-1])


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def cur(self):
        return self.toks[self.i]

    def peek(self, k=1):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def fail(self, msg):
        t = self.cur
        raise ProgramSyntaxError(msg, t.line, t.col, t.text or "<eof>")

    def expect(self, text):
        if self.cur.text != text or self.cur.kind == "string":
            self.fail(f"expected {text!r}")
        self.i += 1

    def term(self):
        t = self.cur
        if t.kind == "ident":
            self.i += 1
            if t.text[0].isupper():
                return Var(t.text)
            if t.text[0] == "_":
                self.i -= 1
                self.fail("identifiers may not start with '_'")
            return Const(t.text)
        if t.kind == "string":
            self.i += 1
            return Const(_unquote(t.text))
        if t.kind == "int":
            self.i += 1
            return Const(t.text)
        self.fail("expected a term")

    def atom(self):
        t = self.cur
        if t.kind != "ident":
            self.fail("expected a predicate name")
        self.i += 1
        self.expect("(")
        args = []
        if self.cur.text != ")":
            args.append(self.term())
            while self.cur.text == ",":
                self.i += 1
                args.append(self.term())
        self.expect(")")
        return Atom(t.text, tuple(args))

    def body_item(self):
        t = self.cur
        if t.kind == "ident" and t.text == "not" and self.peek().kind == "ident":
            self.i += 1
            return Literal(self.atom(), True)
        if t.kind == "ident" and self.peek().text == "(":
            return Literal(self.atom(), False)
        left = self.term()
        op = self.cur
        if op.kind != "punct" or _OP_ALIASES.get(op.text, op.text) not in ("=", "!=", "<", "<=", ">", ">="):
            self.fail("expected a comparison operator")
        self.i += 1
        right = self.term()
        return Comparison(left, _OP_ALIASES.get(op.text, op.text), right)

    def rule(self, position):
        rid = f"r{position}"
        if self.cur.kind == "ident" and self.peek().text == ":":
            rid = self.cur.text
            self.i += 2
        head = self.atom()
        self.expect(":-")
        body = [self.body_item()]
        while self.cur.text == ",":
            self.i += 1
            body.append(self.body_item())
        self.expect(".")
        return Rule(rid, head, tuple(body))

    def program(self, answer=None):
        rules = []
        while self.cur.kind != "eof":
            rules.append(self.rule(len(rules) + 1))
        if not rules:
            self.fail("empty program")
        return Program(tuple(rules), answer or default_answer(rules)).validate()


def parse_program(text: str, answer: str | None = None) -> Program:
    """Parse and validate a program (safety, arity, non-recursion)."""
    return _Parser(text).program(answer)


def parse_rule(text: str, rid: str = "r1") -> Rule:
    p = _Parser(text)
    rule = p.rule(1)
    if rule.id == "r1":
        rule = Rule(rid, rule.head, rule.body)
    if p.cur.kind != "eof":
        p.fail("trailing input after rule")
    return rule


def parse_atom(text: str) -> Atom:
    p = _Parser(text)
    a = p.atom()
    if p.cur.kind != "eof":
        p.fail("trailing input after atom")
    return a


def parse_question(text: str) -> Question:
    """``WHY Q(n,s)`` or ``WHYNOT Q(n,X)``."""
    p = _Parser(text)
    t = p.cur
    kind = t.text.upper() if t.kind == "ident" else ""
    if kind not in ("WHY", "WHYNOT"):
        p.fail("expected WHY or WHYNOT")
    p.i += 1
    if p.cur.kind == "eof":
        p.fail("missing question pattern")
    a = p.atom()
    if p.cur.kind != "eof":
        p.fail("trailing input after question")
    return Question(kind, a)
