"""Direct CUDF-semantics checks of a configuration.

Nothing here looks at an :class:`~cudfmilp.encoder.IlpModel`; these checks are
the ground truth the encoding is tested against.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .cudf import Atom, Pair, Request, Universe, expand_atom, match


@dataclass(frozen=True)
class Violation:
    kind: str
    subject: str
    detail: str

    def __str__(self):
        return f"{self.kind}: {self.subject}: {self.detail}"


@dataclass(frozen=True)
class Report:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def _fmt_clause(clause: tuple[Atom, ...]) -> str:
    return " | ".join(str(a) for a in clause)


def check_consistency(u: Universe, c: Iterable[Pair]) -> Report:
    installed = frozenset(c)
    out = []
    for pair in sorted(installed):
        if pair not in u:
            out.append(Violation("unknown", f"{pair[0]}_{pair[1]}", "not in the universe"))
    for name, version in sorted(installed):
        unit = u.get(name, version)
        if unit is None:
            continue
        label = f"{name}_{version}"
        for clause in unit.depends:
            if not any(expand_atom(u, a) & installed for a in clause):
                out.append(Violation("depends", label, f"unsatisfied clause '{_fmt_clause(clause)}'"))
        for atom in unit.conflicts:
            hit = (expand_atom(u, atom) & installed) - {unit.pair}
            for other in sorted(hit):
                out.append(
                    Violation("conflicts", label, f"conflicts with installed {other[0]}_{other[1]} via '{atom}'")
                )
    return Report(tuple(out))


def check_request(u: Universe, init: Iterable[Pair], r: Request, c: Iterable[Pair]) -> Report:
    init = frozenset(init)
    installed = frozenset(c)
    out = []
    for atom in r.install:
        if not expand_atom(u, atom) & installed:
            out.append(Violation("install", str(atom), "no installed unit satisfies it"))
    for atom in r.remove:
        for p in sorted(expand_atom(u, atom) & installed):
            out.append(Violation("remove", str(atom), f"{p[0]}_{p[1]} is still installed"))
    for atom in r.upgrade:
        q = atom.name
        now = sorted(v for n, v in installed if n == q)
        before = [v for n, v in init if n == q]
        if len(now) != 1:
            out.append(Violation("upgrade", str(atom), f"{len(now)} installed versions, expected exactly 1"))
            continue
        v = now[0]
        if before and v < max(before):
            out.append(Violation("upgrade", str(atom), f"version {v} is older than {max(before)}"))
        if not match(atom.constraint, v):
            out.append(Violation("upgrade", str(atom), f"version {v} does not satisfy the constraint"))
    return Report(tuple(out))


def diff_configurations(init: Iterable[Pair], final: Iterable[Pair], u: Universe | None = None) -> tuple[int, int]:
    """Return (removed functionalities, changed units) between two configurations."""
    init = frozenset(init)
    final = frozenset(final)
    names_before = {n for n, _ in init}
    names_after = {n for n, _ in final}
    removed = len(names_before - names_after)
    changed = len(init - final) + len(final - init)
    return removed, changed
