"""Node labels shared by provenance graphs, game graphs and Skolem terms."""
from __future__ import annotations

from dataclasses import dataclass

REL = "REL"
RULE = "RULE"
GOAL = "GOAL"
NOT_REL = "NOT_REL"
FACT = "FACT"

KINDS = (REL, RULE, GOAL, NOT_REL, FACT)


@dataclass(frozen=True, order=True)
class Node:
    """A labelled node with its status.

    ``name`` is a predicate for tuple-like kinds, a rule id for RULE and
    ``<rid>.<j>`` for GOAL.  ``status`` is T/F/U in explanations and W/L in
    game graphs.
    """

    kind: str
    name: str
    args: tuple
    status: str

    @property
    def key(self) -> tuple:
        """Identity of the node without its status."""
        return (self.kind, self.name, self.args)

    @property
    def label(self) -> str:
        return f"{self.kind}:{self.name}({','.join(self.args)})"

    def with_status(self, status: str) -> "Node":
        return Node(self.kind, self.name, self.args, status)

    def __str__(self) -> str:
        return f"{self.label}:{self.status}"


def parse_node(text: str) -> Node:
    """Inverse of ``str(node)``."""
    kind, rest = text.split(":", 1)
    if kind not in KINDS:
        raise ValueError(f"unknown node kind in {text!r}")
    head, status = rest.rsplit(":", 1)
    open_ = head.index("(")
    if not head.endswith(")"):
        raise ValueError(f"malformed node label {text!r}")
    inner = head[open_ + 1:-1]
    args = tuple(inner.split(",")) if inner else ()
    return Node(kind, head[:open_], args, status)
