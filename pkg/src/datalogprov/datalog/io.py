"""Flat-file loading: one ``<pred>.csv`` per relation plus a domain-groups file.

Row conventions: an optional ``# a,b,c`` first line names the columns, a
leading ``?`` on the first cell marks the fact undetermined, and a trailing
``@annot=<var>`` cell attaches a provenance variable.
"""
from __future__ import annotations

import csv
from pathlib import Path

from ..errors import ArityMismatch, ProgramSyntaxError
from .instance import DomainAssignment, Instance, default_domains


def _read_relation(path: Path):
    pred = path.stem
    tuples, undet, annots, names = set(), set(), {}, None
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh, skipinitialspace=True), 1):
            if not row or all(not c.strip() for c in row):
                continue
            if row[0].startswith("#"):
                if names is None and not tuples and not undet:
                    names = tuple(c.strip().lstrip("#").strip() for c in row)
                continue
            row = [c.strip() for c in row]
            annot = None
            if row[-1].startswith("@annot="):
                annot = row[-1][len("@annot="):]
                row = row[:-1]
            marked = row[0].startswith("?")
            if marked:
                row[0] = row[0][1:].strip()
            tup = tuple(row)
            if names is not None and len(tup) != len(names):
                raise ArityMismatch(f"{path}:{lineno}: expected {len(names)} columns")
            (undet if marked else tuples).add(tup)
            if annot:
                annots[(pred, tup)] = annot
    return pred, tuples, undet, annots, names


def load_instance(directory) -> Instance:
    directory = Path(directory)
    rels, undet, annots, attrs = {}, set(), {}, {}
    for path in sorted(directory.glob("*.csv")):
        pred, tuples, u, a, names = _read_relation(path)
        rels[pred] = tuples
        undet |= {(pred, t) for t in u}
        annots.update(a)
        if names:
            attrs[pred] = names
    return Instance(rels, annots, frozenset(undet), attrs)


def read_groups(path) -> list:
    groups = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("%", 1)[0].strip()
        if not line:
            continue
        attrs = [a.strip() for a in line.split(",") if a.strip()]
        for a in attrs:
            if "." not in a:
                raise ProgramSyntaxError("attribute must look like R.A", lineno, 1, a)
        groups.append(attrs)
    return groups


def load_domains(instance: Instance, groups_path=None) -> DomainAssignment:
    groups = read_groups(groups_path) if groups_path else None
    return default_domains(instance, groups)
