"""Database instances, active domains and domain assignments."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ArityMismatch


@dataclass(frozen=True)
class Instance:
    """EDB facts.

    ``relations`` maps predicates to sets of tuples of strings.  Undetermined
    facts are kept apart from ``relations``.  ``attributes`` optionally names
    the columns of a relation.
    """

    relations: dict
    annotations: dict = field(default_factory=dict)
    undetermined: frozenset = frozenset()
    attributes: dict = field(default_factory=dict)

    def __post_init__(self):
        rels = {p: frozenset(tuple(t) for t in ts) for p, ts in self.relations.items()}
        object.__setattr__(self, "relations", rels)
        object.__setattr__(self, "undetermined", frozenset((p, tuple(t)) for p, t in self.undetermined))
        for p, ts in rels.items():
            arities = {len(t) for t in ts} | {len(t) for q, t in self.undetermined if q == p}
            if len(arities) > 1:
                raise ArityMismatch(f"relation {p} mixes arities {sorted(arities)}")
        for p, t in self.undetermined:
            if t in rels.get(p, ()):
                raise ValueError(f"undetermined fact {p}{t} is also asserted")

    def arity(self, pred):
        for t in self.relations.get(pred, ()):
            return len(t)
        for q, t in self.undetermined:
            if q == pred:
                return len(t)
        names = self.attributes.get(pred)
        return len(names) if names else None

    def attribute_name(self, pred, i) -> str:
        """``R.A`` identifier for the i-th (0-based) column."""
        names = self.attributes.get(pred)
        if names and i < len(names):
            return f"{pred}.{names[i]}"
        return f"{pred}.{i + 1}"

    def facts(self):
        for p in sorted(self.relations):
            for t in sorted(self.relations[p]):
                yield p, t

    def with_relations(self, extra: dict) -> "Instance":
        rels = dict(self.relations)
        rels.update(extra)
        return Instance(rels, self.annotations, self.undetermined, self.attributes)

    def resolve(self, choices: dict) -> "Instance":
        """Replace undetermined facts by the chosen truth values (True/'T' keeps the fact)."""
        rels = {p: set(ts) for p, ts in self.relations.items()}
        undet = set(self.undetermined)
        for (p, t), v in choices.items():
            t = tuple(t)
            undet.discard((p, t))
            if v in (True, "T"):
                rels.setdefault(p, set()).add(t)
        return Instance(rels, self.annotations, frozenset(undet), self.attributes)


def active_domain(instance: Instance):
    """Per-attribute active domains (keyed by (pred, position)) and adom(I)."""
    per_attr = {}
    facts = [(p, t) for p, ts in instance.relations.items() for t in ts]
    facts += list(instance.undetermined)
    for p in instance.relations:
        ar = instance.arity(p) or 0
        for i in range(ar):
            per_attr.setdefault((p, i), set())
    for p, t in facts:
        for i, c in enumerate(t):
            per_attr.setdefault((p, i), set()).add(c)
    glob = set()
    for s in per_attr.values():
        glob |= s
    return {k: frozenset(v) for k, v in per_attr.items()}, frozenset(glob)


class DomainAssignment:
    """Map from attributes (pred, 0-based position) to finite constant sets.

    Attributes that were never assigned map to the empty set.
    """

    def __init__(self, mapping=None):
        self._map = {k: frozenset(v) for k, v in (mapping or {}).items()}

    def __getitem__(self, attr) -> frozenset:
        return self._map.get(attr, frozenset())

    def __contains__(self, attr):
        return attr in self._map

    def items(self):
        return self._map.items()

    def extended(self, extra: dict) -> "DomainAssignment":
        m = dict(self._map)
        m.update({k: frozenset(v) for k, v in extra.items()})
        return DomainAssignment(m)

    def constants(self) -> frozenset:
        out = set()
        for v in self._map.values():
            out |= v
        return frozenset(out)

    def __eq__(self, other):
        return isinstance(other, DomainAssignment) and self._map == other._map

    def __repr__(self):
        return f"DomainAssignment({self._map!r})"

    @classmethod
    def uniform(cls, arities: dict, constants) -> "DomainAssignment":
        """Every attribute of every predicate gets the same constant set."""
        return cls({(p, i): frozenset(constants) for p, n in arities.items() for i in range(n)})


def resolve_attribute(instance: Instance, ident: str):
    """Turn ``R.A`` (column name or 1-based position) into (pred, position)."""
    pred, _, col = ident.strip().rpartition(".")
    if not pred:
        raise ValueError(f"attribute {ident!r} must look like R.A")
    names = instance.attributes.get(pred)
    if names and col in names:
        return pred, names.index(col)
    if col.isdigit():
        return pred, int(col) - 1
    raise ValueError(f"unknown attribute {ident!r}")


def default_domains(instance: Instance, groups=None) -> DomainAssignment:
    """dom = adom per attribute; attributes in a group share the union of their adoms."""
    per_attr, _ = active_domain(instance)
    mapping = dict(per_attr)
    for group in groups or ():
        attrs = [resolve_attribute(instance, g) if isinstance(g, str) else tuple(g) for g in group]
        union = frozenset().union(*(per_attr.get(a, frozenset()) for a in attrs))
        for a in attrs:
            mapping[a] = union
    return DomainAssignment(mapping)
