"""Export models to CPLEX-LP and OPB files and read external solver answers."""

from __future__ import annotations

import math
import re
import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

from .encoder import IlpModel, LinearConstraint, Objective, VarId
from .solver import INFEASIBLE, OPTIMAL, TIMED_OUT, SolveOutcome, SolveStats

DIALECTS = ("lp-solution", "opb-solution")
_MAX_LINE = 255
_SAFE = re.compile(r"[A-Za-z0-9]")


class ExternalSolverError(RuntimeError):
    """The external solver exited without producing an answer."""


class SolverProtocolError(ExternalSolverError):
    """The external solver's answer could not be understood or is inconsistent."""


# -- names -------------------------------------------------------------------


def _escape(name: str) -> str:
    out = []
    for i, ch in enumerate(name):
        if _SAFE.match(ch) and not (i == 0 and ch.isdigit()):
            out.append(ch)
        else:
            out.extend(f"%{b:02X}" for b in ch.encode("utf-8"))
    return "".join(out)


def _unescape(token: str) -> str:
    raw = bytearray()
    i = 0
    while i < len(token):
        if token[i] == "%":
            raw.append(int(token[i + 1 : i + 3], 16))
            i += 3
        else:
            raw.extend(token[i].encode())
            i += 1
    return raw.decode("utf-8")


def lp_name(v: VarId) -> str:
    """Deterministic, injective LP identifier: ``<name>_<version>`` or ``F_<name>``."""
    if v.is_unit:
        return f"{_escape(v.name)}_{v.version}"
    return f"F_{_escape(v.name)}"


def parse_lp_name(token: str) -> VarId:
    if token.startswith("F_"):
        return VarId.feature(_unescape(token[2:]))
    name, sep, version = token.rpartition("_")
    if not sep or not version.isdigit():
        raise SolverProtocolError(f"not a variable name: {token!r}")
    return VarId.unit(_unescape(name), int(version))


# -- LP ------------------------------------------------------------------------


def _lp_terms(terms) -> list[str]:
    out = []
    for coef, v in terms:
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        out.append(f"{sign} {lp_name(v)}" if mag == 1 else f"{sign} {mag} {lp_name(v)}")
    return out


def _wrap(head: str, pieces: list[str]) -> list[str]:
    lines, cur = [], head
    for p in pieces:
        if cur.strip() and len(cur) + 1 + len(p) > _MAX_LINE:
            lines.append(cur)
            cur = " " + p
        else:
            cur = f"{cur} {p}" if cur else p
    lines.append(cur)
    return lines


def emit_lp(model: IlpModel) -> str:
    lines = ["\\ 0-1 upgradeability model", "Minimize"]
    lines += _wrap(" obj:", _lp_terms(model.objective.terms))
    lines.append("Subject To")
    for c in model.constraints:
        terms = _lp_terms(c.terms) or ["0"]
        lines += _wrap("", terms + [c.sense, str(c.rhs)])
    lines.append("Binary")
    lines += [f" {lp_name(v)}" for v in model.variables]
    lines.append("End")
    return "\n".join(lines) + "\n"


_SECTIONS = {
    "minimize": "obj", "minimum": "obj", "min": "obj",
    "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
    "binary": "bin", "binaries": "bin", "bin": "bin",
    "end": "end",
}


def _parse_expr(tokens: list[str], i: int, stop) -> tuple[list[tuple[int, VarId]], int, int]:
    """Parse ``[+|-] [coef] name ...`` until ``stop(token)``. Returns terms, constant, next index."""
    terms, const = [], 0
    while i < len(tokens) and not stop(tokens[i]):
        sign = 1
        while tokens[i] in "+-":
            if tokens[i] == "-":
                sign = -sign
            i += 1
        coef = 1
        if re.fullmatch(r"\d+", tokens[i]):
            coef = int(tokens[i])
            i += 1
            if i >= len(tokens) or stop(tokens[i]) or tokens[i] in "+-":
                const += sign * coef
                continue
        terms.append((sign * coef, parse_lp_name(tokens[i])))
        i += 1
    return terms, const, i


def parse_lp(text: str) -> IlpModel:
    """Read back the LP dialect written by :func:`emit_lp`."""
    sections: dict[str, list[str]] = {"obj": [], "st": [], "bin": []}
    current = None
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = _SECTIONS.get(line.lower())
        if key == "end":
            break
        if key:
            current = key
            continue
        if current is None:
            raise SolverProtocolError(f"LP content outside a section: {line!r}")
        sections[current].extend(line.split())

    obj_tokens = sections["obj"]
    if obj_tokens and obj_tokens[0].endswith(":"):
        obj_tokens = obj_tokens[1:]
    obj_terms, _, _ = _parse_expr(obj_tokens, 0, lambda t: False)

    constraints = []
    toks = sections["st"]
    i = 0
    is_sense = lambda t: t in (">=", "<=", "=", "=<", "=>")
    while i < len(toks):
        if toks[i].endswith(":"):
            i += 1
        terms, const, i = _parse_expr(toks, i, is_sense)
        sense = {"=<": "<=", "=>": ">="}.get(toks[i], toks[i])
        rhs = int(toks[i + 1]) - const
        i += 2
        constraints.append(LinearConstraint(tuple(terms), sense, rhs))

    variables = tuple(parse_lp_name(t) for t in sections["bin"])
    return IlpModel(variables, tuple(constraints), Objective(tuple(obj_terms)))


# -- OPB -----------------------------------------------------------------------


def _opb_terms(terms, index) -> str:
    return " ".join(f"{c:+d} x{index[v] + 1}" for c, v in terms)


def emit_opb(model: IlpModel) -> str:
    """OPB text with positional names ``x1..xN``; see :func:`opb_name_map`."""
    index = model.index()
    rows = []
    for c in model.constraints:
        terms, sense, rhs = c.terms, c.sense, c.rhs
        if sense == "<=":
            terms, sense, rhs = tuple((-a, v) for a, v in terms), ">=", -rhs
        lhs = _opb_terms(terms, index)
        rows.append(f"{lhs} {sense} {rhs} ;" if lhs else f"{sense} {rhs} ;")
    header = f"* #variable= {len(model.variables)} #constraint= {len(rows)}"
    obj = _opb_terms(model.objective.terms, index)
    lines = [header, f"min: {obj} ;" if obj else "min: ;"] + rows
    return "\n".join(lines) + "\n"


def opb_name_map(model: IlpModel) -> str:
    return "".join(f"x{i + 1} {lp_name(v)}\n" for i, v in enumerate(model.variables))


# -- answers -------------------------------------------------------------------


def parse_opb_answer(text: str, model: IlpModel) -> tuple[str | None, dict[VarId, int]]:
    """Return (claimed status, values) from a competition-style OPB answer."""
    status = None
    values: dict[VarId, int] = {}
    n = len(model.variables)
    for raw in text.splitlines():
        line = raw.strip()
        if line.upper() in ("UNSAT", "UNSATISFIABLE", "INFEASIBLE"):
            status = INFEASIBLE
        elif line.startswith("s "):
            word = line[2:].strip().upper()
            if word == "OPTIMUM FOUND":
                status = OPTIMAL
            elif word == "UNSATISFIABLE":
                status = INFEASIBLE
            elif word == "SATISFIABLE":
                status = "feasible"
            elif word == "UNKNOWN":
                status = "unknown"
            else:
                raise SolverProtocolError(f"unknown status line {line!r}")
        elif line.startswith("v "):
            for lit in line[2:].split():
                neg = lit.startswith("-")
                name = lit.lstrip("-")
                m = re.fullmatch(r"x(\d+)", name)
                if not m or not 1 <= int(m.group(1)) <= n:
                    raise SolverProtocolError(f"bad literal {lit!r}")
                values[model.variables[int(m.group(1)) - 1]] = 0 if neg else 1
    return status, values


def parse_lp_answer(text: str, model: IlpModel) -> tuple[str | None, dict[VarId, int]]:
    """Generic ``name value`` solution listing (CBC-style); unknown tokens are skipped."""
    known = {lp_name(v): v for v in model.variables}
    status = None
    values: dict[VarId, int] = {}
    for raw in text.splitlines():
        low = raw.lower()
        if "infeasible" in low or low.strip() == "unsat":
            status = INFEASIBLE
            continue
        if "optimal" in low and status is None:
            status = OPTIMAL
        tokens = raw.split()
        for j, tok in enumerate(tokens[:-1]):
            if tok in known:
                try:
                    values[known[tok]] = int(round(float(tokens[j + 1])))
                except ValueError:
                    raise SolverProtocolError(f"bad value in {raw.strip()!r}") from None
                break
    if values and status is None:
        status = "feasible"
    return status, values


# -- running -------------------------------------------------------------------


@dataclass(frozen=True)
class ExternalSolverSpec:
    """``command`` uses ``{input}`` (required, once), ``{timeout}`` and ``{output}``.

    Without ``{output}`` the answer is read from standard output.
    """

    command: str
    dialect: str = "opb-solution"

    def __post_init__(self):
        if self.command.count("{input}") != 1:
            raise ValueError("command template needs exactly one {input} placeholder")
        if self.dialect not in DIALECTS:
            raise ValueError(f"unknown answer dialect {self.dialect!r}")

    @classmethod
    def parse(cls, text: str) -> ExternalSolverSpec:
        """Parse ``opb:<command>`` or ``lp:<command>``."""
        kind, sep, command = text.partition(":")
        if not sep or kind not in ("opb", "lp"):
            raise ValueError(f"expected 'opb:<command>' or 'lp:<command>', got {text!r}")
        return cls(command.strip(), f"{kind}-solution")


def run_external(spec: ExternalSolverSpec, model: IlpModel, timeout: float = 300.0) -> SolveOutcome:
    start = time.monotonic()

    def outcome(status, assignment=None, objective=None):
        return SolveOutcome(status, assignment, objective, SolveStats(elapsed=time.monotonic() - start))

    with tempfile.TemporaryDirectory(prefix="cudfmilp-") as tmp:
        tmpdir = Path(tmp)
        if spec.dialect == "opb-solution":
            infile = tmpdir / "model.opb"
            infile.write_text(emit_opb(model))
            (tmpdir / "model.map").write_text(opb_name_map(model))
        else:
            infile = tmpdir / "model.lp"
            infile.write_text(emit_lp(model))
        outfile = tmpdir / "answer.txt"
        cmd = spec.command.format(
            input=shlex.quote(str(infile)),
            output=shlex.quote(str(outfile)),
            timeout=max(1, math.ceil(timeout)),
        )
        try:
            proc = subprocess.run(
                shlex.split(cmd), capture_output=True, text=True, timeout=timeout
            )
        except subprocess.TimeoutExpired:
            return outcome(TIMED_OUT)
        answer = outfile.read_text() if "{output}" in spec.command and outfile.exists() else proc.stdout

    parser = parse_opb_answer if spec.dialect == "opb-solution" else parse_lp_answer
    status, values = parser(answer, model)
    if status is None and not values:
        if proc.returncode != 0:
            raise ExternalSolverError(
                f"solver exited with status {proc.returncode}: {proc.stderr.strip()[:200]}"
            )
        raise SolverProtocolError("no status or assignment in solver answer")
    if status == INFEASIBLE:
        return outcome(INFEASIBLE)
    if not values:
        return outcome(TIMED_OUT)
    assignment = {v: values.get(v, 0) for v in model.variables}
    # never trust the solver's own objective or feasibility claim
    if not model.satisfies(assignment):
        raise SolverProtocolError("solver answer violates the model")
    value = model.evaluate(assignment)
    return outcome(OPTIMAL if status == OPTIMAL else TIMED_OUT, assignment, value)
