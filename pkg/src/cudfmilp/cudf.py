"""CUDF documents: data model, parser and writers.

Only the subset of CUDF needed for upgradeability problems is understood:
``package``, ``version``, ``depends``, ``conflicts``, ``provides``,
``installed`` and the ``install``/``remove``/``upgrade`` request keys.
Other keys are ignored.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from ._util import without_gc

ANY = "any"
RELATIONS = ("=", "!=", ">=", "<=", ">", "<")

Pair = tuple[str, int]
# A configuration is the set of installed (name, version) pairs.
Configuration = frozenset


class CudfParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True, order=True)
class VersionConstraint:
    relation: str = ANY
    version: int | None = None

    def __post_init__(self):
        if self.relation == ANY:
            if self.version is not None:
                raise ValueError("unconstrained relation cannot carry a version")
        elif self.relation in RELATIONS:
            if self.version is None or self.version < 1:
                raise ValueError(f"relation {self.relation!r} needs a positive version")
        else:
            raise ValueError(f"unknown relation {self.relation!r}")

    def __str__(self):
        if self.relation == ANY:
            return ""
        return f"{self.relation} {self.version}"


ANY_VERSION = VersionConstraint()


def match(constraint: VersionConstraint, v: int) -> bool:
    """Return True if version ``v`` satisfies ``constraint``."""
    rel, k = constraint.relation, constraint.version
    if rel == ANY:
        return True
    if rel == "=":
        return v == k
    if rel == "!=":
        return v != k
    if rel == ">=":
        return v >= k
    if rel == "<=":
        return v <= k
    if rel == ">":
        return v > k
    return v < k


@dataclass(frozen=True, order=True)
class Atom:
    name: str
    constraint: VersionConstraint = ANY_VERSION

    def __post_init__(self):
        if not self.name or _BAD_NAME.search(self.name):
            raise ValueError(f"invalid package name {self.name!r}")

    def __str__(self):
        c = str(self.constraint)
        return f"{self.name} {c}" if c else self.name


_BAD_NAME = re.compile(r"[\s,|]")


@dataclass(frozen=True)
class PackageUnit:
    name: str
    version: int
    # CNF: conjunction of clauses, each clause a disjunction of atoms.
    depends: tuple[tuple[Atom, ...], ...] = ()
    conflicts: tuple[Atom, ...] = ()
    # (feature, provided version or None for an unversioned provide)
    provides: tuple[tuple[str, int | None], ...] = ()
    installed: bool = False

    @property
    def pair(self) -> Pair:
        return (self.name, self.version)

    def __str__(self):
        return f"{self.name}_{self.version}"


@dataclass(frozen=True)
class Request:
    install: tuple[Atom, ...] = ()
    remove: tuple[Atom, ...] = ()
    upgrade: tuple[Atom, ...] = ()

    def is_empty(self) -> bool:
        return not (self.install or self.remove or self.upgrade)


@dataclass(frozen=True)
class Provider:
    name: str
    version: int
    feature_version: int | None


class Universe:
    """Indexed, immutable collection of package units."""

    def __init__(self, units: Iterable[PackageUnit] = ()):
        self.units: tuple[PackageUnit, ...] = tuple(units)
        self._index: dict[Pair, PackageUnit] = {}
        versions: dict[str, list[int]] = {}
        providers: dict[str, list[Provider]] = {}
        for u in self.units:
            if u.pair in self._index:
                raise ValueError(f"duplicate package {u.name} version {u.version}")
            self._index[u.pair] = u
            versions.setdefault(u.name, []).append(u.version)
            providers.setdefault(u.name, []).append(Provider(u.name, u.version, u.version))
            for feature, fv in u.provides:
                providers.setdefault(feature, []).append(Provider(u.name, u.version, fv))
        self.by_name: dict[str, tuple[int, ...]] = {
            name: tuple(sorted(vs)) for name, vs in sorted(versions.items())
        }
        self.providers: dict[str, tuple[Provider, ...]] = {
            f: tuple(ps) for f, ps in providers.items()
        }

    def __len__(self):
        return len(self.units)

    def __iter__(self) -> Iterator[PackageUnit]:
        return iter(self.units)

    def __contains__(self, pair) -> bool:
        return pair in self._index

    def get(self, name: str, version: int) -> PackageUnit | None:
        return self._index.get((name, version))

    def initial_configuration(self) -> frozenset[Pair]:
        return frozenset(u.pair for u in self.units if u.installed)


def expand_atom(u: Universe, a: Atom) -> set[Pair]:
    """All units that carry or provide ``a.name`` in a version satisfying ``a``.

    An unversioned provide only satisfies an unconstrained atom.
    """
    c = a.constraint
    out = set()
    for p in u.providers.get(a.name, ()):
        if p.feature_version is None:
            if c.relation == ANY:
                out.add((p.name, p.version))
        elif match(c, p.feature_version):
            out.add((p.name, p.version))
    return out


# -- parsing ---------------------------------------------------------------

_ATOM_RE = re.compile(
    r"^\s*(?P<name>[^\s,|<>=!]+)\s*(?:(?P<rel>!=|>=|<=|=|>|<)\s*(?P<ver>\S+))?\s*$"
)


def parse_atom(text: str, line: int | None = None) -> Atom:
    m = _ATOM_RE.match(text)
    if not m:
        if re.search(r"[<>=!]", text):
            raise CudfParseError(f"unparseable relation in {text.strip()!r}", line)
        raise CudfParseError(f"malformed atom {text.strip()!r}", line)
    rel = m.group("rel")
    if rel is None:
        return Atom(m.group("name"))
    return Atom(m.group("name"), VersionConstraint(rel, _parse_version(m.group("ver"), line)))


def _parse_version(text: str, line: int | None) -> int:
    try:
        v = int(text)
    except ValueError:
        raise CudfParseError(f"non-integer version {text!r}", line) from None
    if v < 1:
        raise CudfParseError(f"version must be positive, got {v}", line)
    return v


def _split(value: str, sep: str) -> list[str]:
    value = value.strip()
    return [] if not value else value.split(sep)


def parse_atom_list(value: str, line: int | None = None) -> tuple[Atom, ...]:
    return tuple(parse_atom(part, line) for part in _split(value, ","))


def parse_depends(value: str, line: int | None = None) -> tuple[tuple[Atom, ...], ...]:
    clauses = []
    for clause in _split(value, ","):
        clauses.append(tuple(parse_atom(part, line) for part in clause.split("|")))
    return tuple(clauses)


def parse_provides(value: str, line: int | None = None) -> tuple[tuple[str, int | None], ...]:
    out = []
    for a in parse_atom_list(value, line):
        rel = a.constraint.relation
        if rel == ANY:
            out.append((a.name, None))
        elif rel == "=":
            out.append((a.name, a.constraint.version))
        else:
            raise CudfParseError(f"provides only allows '=', got {rel!r}", line)
    return tuple(out)


def _stanzas(text: str) -> Iterator[list[tuple[int, str, str]]]:
    """Yield stanzas as lists of (line number, key, value)."""
    stanza: list[tuple[int, str, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if raw.startswith("#"):
            continue
        if not raw.strip():
            if stanza:
                yield stanza
                stanza = []
            continue
        if raw[0] in " \t" and stanza:
            # continuation line
            n, k, v = stanza[-1]
            stanza[-1] = (n, k, v + " " + raw.strip())
            continue
        key, sep, value = raw.partition(":")
        if not sep:
            raise CudfParseError(f"expected 'key: value', got {raw.strip()!r}", lineno)
        stanza.append((lineno, key.strip(), value.strip()))
    if stanza:
        yield stanza


def _parse_package(stanza: list[tuple[int, str, str]]) -> PackageUnit:
    first = stanza[0][0]
    fields: dict[str, tuple[int, str]] = {}
    for lineno, key, value in stanza:
        fields[key] = (lineno, value)
    name_line, name = fields["package"]
    if not name:
        raise CudfParseError("package stanza without a name", name_line)
    try:
        Atom(name)
    except ValueError:
        raise CudfParseError(f"invalid package name {name!r}", name_line) from None
    if "version" not in fields:
        raise CudfParseError(f"package {name!r} has no version", first)
    ver_line, ver = fields["version"]
    version = _parse_version(ver, ver_line)

    installed = False
    if "installed" in fields:
        ln, val = fields["installed"]
        if val not in ("true", "false"):
            raise CudfParseError(f"installed must be true or false, got {val!r}", ln)
        installed = val == "true"

    def get(key, parser):
        if key not in fields:
            return ()
        ln, val = fields[key]
        return parser(val, ln)

    return PackageUnit(
        name=name,
        version=version,
        depends=get("depends", parse_depends),
        conflicts=get("conflicts", parse_atom_list),
        provides=get("provides", parse_provides),
        installed=installed,
    )


def _parse_request(stanza: list[tuple[int, str, str]]) -> Request:
    lists: dict[str, tuple[Atom, ...]] = {}
    for lineno, key, value in stanza[1:]:
        if key in ("install", "remove", "upgrade"):
            lists[key] = lists.get(key, ()) + parse_atom_list(value, lineno)
    return Request(**lists)


@without_gc
def parse_document(text: str) -> tuple[Universe, Request]:
    """Parse a CUDF document into its universe and request."""
    units: list[PackageUnit] = []
    seen: dict[Pair, int] = {}
    request = Request()
    for i, stanza in enumerate(_stanzas(text)):
        lineno, key, _ = stanza[0]
        if key == "preamble":
            if i != 0:
                raise CudfParseError("preamble must be the first stanza", lineno)
            continue
        if key == "package":
            unit = _parse_package(stanza)
            if unit.pair in seen:
                raise CudfParseError(
                    f"duplicate package {unit.name} version {unit.version} "
                    f"(first defined at line {seen[unit.pair]})",
                    lineno,
                )
            seen[unit.pair] = lineno
            units.append(unit)
        elif key == "request":
            request = _parse_request(stanza)
        else:
            raise CudfParseError(f"unexpected stanza starting with {key!r}", lineno)
    return Universe(units), request


def parse_configuration(text: str) -> frozenset[Pair] | None:
    """Read a solution file. Returns None for a ``FAIL`` answer."""
    if text.strip() == "FAIL":
        return None
    universe, _ = parse_document(text)
    return frozenset(u.pair for u in universe if u.installed)


# -- writing ---------------------------------------------------------------


def write_configuration(c: Iterable[Pair] | None, failed: bool = False) -> str:
    """Serialize a configuration, or ``FAIL`` when ``failed`` (or ``c`` is None)."""
    if failed or c is None:
        return "FAIL\n"
    return "\n".join(
        f"package: {name}\nversion: {version}\ninstalled: true\n" for name, version in sorted(c)
    )


def _format_provides(provides) -> str:
    return ", ".join(f if v is None else f"{f} = {v}" for f, v in provides)


def write_unit(u: PackageUnit) -> str:
    lines = [f"package: {u.name}", f"version: {u.version}"]
    if u.depends:
        lines.append(
            "depends: " + ", ".join(" | ".join(str(a) for a in clause) for clause in u.depends)
        )
    if u.conflicts:
        lines.append("conflicts: " + ", ".join(str(a) for a in u.conflicts))
    if u.provides:
        lines.append("provides: " + _format_provides(u.provides))
    if u.installed:
        lines.append("installed: true")
    return "\n".join(lines) + "\n"


def write_request(r: Request) -> str:
    lines = ["request: "]
    for key in ("install", "remove", "upgrade"):
        atoms = getattr(r, key)
        if atoms:
            lines.append(f"{key}: " + ", ".join(str(a) for a in atoms))
    return "\n".join(lines) + "\n"


def write_document(u: Universe, r: Request | None = None) -> str:
    parts = [write_unit(unit) for unit in u]
    if r is not None:
        parts.append(write_request(r))
    return "\n".join(parts)
