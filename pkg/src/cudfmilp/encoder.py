"""Translation of an upgradeability problem into a 0-1 integer linear program.

One binary variable per (name, version) unit. For the removed-functionality
criterion an extra "feature" variable per package name is tied to the
disjunction of that name's versions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple

from ._util import without_gc
from .cudf import Atom, PackageUnit, Pair, Request, Universe, expand_atom, match

MODES = ("aggregate", "criterion1", "criterion2")
SENSES = (">=", "<=", "=")


class VarId(NamedTuple):
    kind: str  # "unit" or "feature"
    name: str
    version: int = 0

    @classmethod
    def unit(cls, name: str, version: int) -> VarId:
        return cls("unit", name, version)

    @classmethod
    def feature(cls, name: str) -> VarId:
        return cls("feature", name)

    @property
    def is_unit(self) -> bool:
        return self.kind == "unit"

    def __str__(self):
        return f"{self.name}_{self.version}" if self.is_unit else self.name


Term = tuple[int, VarId]


@dataclass(frozen=True)
class LinearConstraint:
    terms: tuple[Term, ...]
    sense: str
    rhs: int
    # rule that produced the constraint; informational only
    kind: str = field(default="", compare=False)

    def lhs(self, values: Mapping[VarId, int]) -> int:
        return sum(c * values[v] for c, v in self.terms)

    def holds(self, values: Mapping[VarId, int]) -> bool:
        lhs = self.lhs(values)
        if self.sense == ">=":
            return lhs >= self.rhs
        if self.sense == "<=":
            return lhs <= self.rhs
        return lhs == self.rhs

    def __str__(self):
        return format_constraint(self)


@dataclass(frozen=True)
class Objective:
    terms: tuple[Term, ...] = ()

    def value(self, values: Mapping[VarId, int]) -> int:
        return sum(c * values[v] for c, v in self.terms)


@dataclass(frozen=True)
class IlpModel:
    variables: tuple[VarId, ...]
    constraints: tuple[LinearConstraint, ...]
    objective: Objective = Objective()

    @property
    def infeasible(self) -> bool:
        """True when a constraint without terms can never hold."""
        return any(not c.terms and not c.holds({}) for c in self.constraints)

    def index(self) -> dict[VarId, int]:
        return {v: i for i, v in enumerate(self.variables)}

    def satisfies(self, values: Mapping[VarId, int]) -> bool:
        return all(c.holds(values) for c in self.constraints)

    def evaluate(self, values: Mapping[VarId, int]) -> int:
        return self.objective.value(values)

    def decode(self, values: Mapping[VarId, int]) -> frozenset[Pair]:
        return frozenset((v.name, v.version) for v in self.variables if v.is_unit and values[v])

    def assignment_for(self, config: Iterable[Pair]) -> dict[VarId, int]:
        """Induced assignment: units as in ``config``, features as the max of their versions."""
        installed = set(config)
        values = {}
        names = {n for n, _ in installed}
        for v in self.variables:
            if v.is_unit:
                values[v] = int((v.name, v.version) in installed)
            else:
                values[v] = int(v.name in names)
        return values

    def with_objective(self, objective: Objective) -> IlpModel:
        return IlpModel(self.variables, self.constraints, objective)

    def with_constraints(self, extra: Iterable[LinearConstraint]) -> IlpModel:
        return IlpModel(self.variables, self.constraints + tuple(extra), self.objective)


def decode(values: Mapping[VarId, int]) -> frozenset[Pair]:
    """Installed units of an assignment."""
    return frozenset((v.name, v.version) for v, x in values.items() if x and v.is_unit)


def make_constraint(terms: Iterable[Term], sense: str, rhs: int, kind: str = "") -> LinearConstraint:
    """Merge repeated variables (first occurrence keeps its place) and drop zero terms."""
    terms = tuple(terms)
    if len({v for _, v in terms}) == len(terms):
        if all(c for c, _ in terms):
            return LinearConstraint(terms, sense, rhs, kind)
    merged: dict[VarId, int] = {}
    for c, v in terms:
        merged[v] = merged.get(v, 0) + c
    return LinearConstraint(tuple((c, v) for v, c in merged.items() if c), sense, rhs, kind)


def format_constraint(c: LinearConstraint, namer=str) -> str:
    parts = []
    for i, (coef, v) in enumerate(c.terms):
        mag = "" if abs(coef) == 1 else f"{abs(coef)} "
        if coef < 0:
            parts.append(f"- {mag}{namer(v)}")
        else:
            parts.append(f"{'' if i == 0 else '+ '}{mag}{namer(v)}")
    lhs = " ".join(parts) if parts else "0"
    return f"{lhs} {c.sense} {c.rhs}"


def _uvar(pair: Pair) -> VarId:
    return VarId("unit", *pair)


# -- constraints -----------------------------------------------------------


def encode_depends(u: Universe, unit: PackageUnit) -> list[LinearConstraint]:
    me = unit.pair
    x = _uvar(me)
    forced: list[Pair] = []
    out = []
    for clause in unit.depends:
        expansion: set[Pair] = set()
        for atom in clause:
            expansion |= expand_atom(u, atom)
        if me in expansion:
            continue  # satisfied by the unit itself
        if not expansion:
            out.append(make_constraint([(-1, x)], ">=", 0, "depends-empty"))
        elif len(expansion) == 1:
            (only,) = expansion
            if only not in forced:
                forced.append(only)
        else:
            terms = [(-1, x)] + [(1, _uvar(p)) for p in sorted(expansion)]
            out.append(make_constraint(terms, ">=", 0, "depends-or"))
    if forced:
        terms = [(-len(forced), x)] + [(1, _uvar(p)) for p in forced]
        out.insert(0, make_constraint(terms, ">=", 0, "depends-and"))
    return out


def encode_conflicts(u: Universe, unit: PackageUnit) -> list[LinearConstraint]:
    others: set[Pair] = set()
    for atom in unit.conflicts:
        others |= expand_atom(u, atom)
    others.discard(unit.pair)
    if not others:
        return []
    n = len(others)
    terms = [(n, _uvar(unit.pair))] + [(1, _uvar(p)) for p in sorted(others)]
    return [make_constraint(terms, "<=", n, "conflicts")]


def _unsat(kind: str) -> LinearConstraint:
    return LinearConstraint((), ">=", 1, kind)


def encode_request(u: Universe, init: Iterable[Pair], r: Request) -> list[LinearConstraint]:
    init = set(init)
    out = []
    for atom in r.install:
        s = sorted(expand_atom(u, atom))
        if not s:
            out.append(_unsat("install-unsatisfiable"))
        elif len(s) == 1 and atom.constraint.relation == "=":
            out.append(make_constraint([(1, _uvar(s[0]))], "=", 1, "install"))
        else:
            out.append(make_constraint([(1, _uvar(p)) for p in s], ">=", 1, "install"))
    for atom in r.remove:
        s = sorted(expand_atom(u, atom))
        if s:
            out.append(make_constraint([(1, _uvar(p)) for p in s], "=", 0, "remove"))
    for atom in r.upgrade:
        out.extend(_encode_upgrade(u, init, atom))
    return out


def _encode_upgrade(u: Universe, init: set[Pair], atom: Atom) -> list[LinearConstraint]:
    q = atom.name
    versions = u.by_name.get(q)
    if not versions:
        return [_unsat("upgrade-unknown")]
    m = max((v for n, v in init if n == q), default=0)
    below = [v for v in versions if v < m]
    # versions at or above m that the atom's constraint excludes are forbidden too
    below += [v for v in versions if v >= m and not match(atom.constraint, v)]
    above = [v for v in versions if v >= m and match(atom.constraint, v)]
    out = []
    if below:
        out.append(make_constraint([(1, VarId.unit(q, v)) for v in sorted(below)], "=", 0, "upgrade-below"))
    if above:
        out.append(make_constraint([(1, VarId.unit(q, v)) for v in above], "=", 1, "upgrade-one"))
    else:
        out.append(_unsat("upgrade-unsatisfiable"))
    return out


def encode_feature_links(u: Universe) -> list[LinearConstraint]:
    out = []
    for name, versions in u.by_name.items():
        f = VarId.feature(name)
        units = [VarId.unit(name, v) for v in versions]
        out.append(make_constraint([(-1, f)] + [(1, x) for x in units], ">=", 0, "feature-lower"))
        out.append(
            make_constraint([(len(units), f)] + [(-1, x) for x in units], ">=", 0, "feature-upper")
        )
    return out


# -- objective -------------------------------------------------------------


def installed_names(u: Universe, init: Iterable[Pair]) -> list[str]:
    """Names with at least one installed version (the functionalities to keep)."""
    return sorted({n for n, _ in init if n in u.by_name})


def aggregation_weight(u: Universe, paper_exact: bool = False) -> int:
    """Weight on the removed-functionality criterion.

    ``len(u)`` alone lets a unit change of criterion 2 tie with one removed
    functionality, so the default adds one to keep the order strict.
    """
    return len(u) if paper_exact else len(u) + 1


def criterion1_terms(u: Universe, init: Iterable[Pair]) -> list[Term]:
    return [(-1, VarId.feature(n)) for n in installed_names(u, init)]


def criterion2_terms(u: Universe, init: Iterable[Pair]) -> list[Term]:
    init = set(init)
    return [(-1 if unit.pair in init else 1, _uvar(unit.pair)) for unit in u]


def build_objective(
    u: Universe, init: Iterable[Pair], mode: str = "aggregate", paper_exact: bool = False
) -> Objective:
    init = frozenset(init)
    if mode == "criterion1":
        return Objective(tuple(criterion1_terms(u, init)))
    if mode == "criterion2":
        return Objective(tuple(criterion2_terms(u, init)))
    if mode != "aggregate":
        raise ValueError(f"unknown mode {mode!r}")
    w = aggregation_weight(u, paper_exact)
    terms = [(w * c, v) for c, v in criterion1_terms(u, init)]
    terms += criterion2_terms(u, init)
    return Objective(tuple(terms))


def criteria_values(u: Universe, init: Iterable[Pair], config: Iterable[Pair]) -> tuple[int, int]:
    """Raw (criterion 1, criterion 2) objective values of a final configuration."""
    init = frozenset(init)
    config = frozenset(config)
    names = {n for n, _ in config}
    z1 = -sum(1 for n in installed_names(u, init) if n in names)
    z2 = sum(-1 if p in init else 1 for p in config)
    return z1, z2


@without_gc
def build_model(
    u: Universe,
    init: Iterable[Pair],
    r: Request,
    mode: str = "aggregate",
    paper_exact: bool = False,
) -> IlpModel:
    """Build the full 0-1 program for a problem instance."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    init = frozenset(init)
    variables = [_uvar(unit.pair) for unit in u]
    constraints: list[LinearConstraint] = []
    for unit in u:
        constraints += encode_depends(u, unit)
        constraints += encode_conflicts(u, unit)
    constraints += encode_request(u, init, r)
    if mode != "criterion2":
        variables += [VarId.feature(n) for n in u.by_name]
        constraints += encode_feature_links(u)
    return IlpModel(tuple(variables), tuple(constraints), build_objective(u, init, mode, paper_exact))
