"""Random instances and a benchmark harness reporting per-solver run statistics."""

from __future__ import annotations

import math
import random
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

from .cudf import ANY_VERSION, Atom, PackageUnit, Pair, Request, Universe, VersionConstraint, expand_atom
from .encoder import IlpModel
from .solver import INFEASIBLE, TIMED_OUT, SolveOutcome

Solver = Callable[[IlpModel, float], SolveOutcome]

ERROR = "error"


# -- instance generation -------------------------------------------------------


def gen_random(
    base: tuple[Universe, Iterable[Pair]], n_install: int, n_upgrade: int, seed: int
) -> Request:
    """Sample unversioned install atoms among uninstalled names and upgrade atoms among installed ones."""
    u, init = base
    installed = {n for n, _ in init}
    uninstalled_names = [n for n in u.by_name if n not in installed]
    installed_names = [n for n in u.by_name if n in installed]
    if n_install > len(uninstalled_names):
        raise ValueError(f"asked for {n_install} installs but only {len(uninstalled_names)} names are uninstalled")
    if n_upgrade > len(installed_names):
        raise ValueError(f"asked for {n_upgrade} upgrades but only {len(installed_names)} names are installed")
    rng = random.Random(seed)
    install = rng.sample(uninstalled_names, n_install)
    upgrade = rng.sample(installed_names, n_upgrade)
    return Request(install=tuple(Atom(n) for n in install), upgrade=tuple(Atom(n) for n in upgrade))


def _pick_constraint(rng: random.Random, versions: Sequence[int]) -> VersionConstraint:
    r = rng.random()
    if r < 0.7 or len(versions) == 1:
        return ANY_VERSION
    v = rng.choice(versions)
    if r < 0.85:
        return VersionConstraint(">=", v)
    if r < 0.95:
        return VersionConstraint("<=", v)
    return VersionConstraint("=", v)


def synth_universe(
    n_units: int,
    seed: int = 0,
    n_installed: int = 0,
    max_versions: int = 3,
    feature_ratio: float = 0.02,
    cross_conflict_rate: float = 0.01,
) -> Universe:
    """Generate a random repository shaped like a distribution.

    Package ``i`` only depends on packages with a smaller index, biased towards
    small indices, so low-numbered packages act as widely used libraries.
    Every multi-version package conflicts with its own name. The initial
    installation is grown from random roots and is consistent by construction.
    """
    rng = random.Random(seed)
    versions: list[list[int]] = []
    total = 0
    while total < n_units:
        k = min(rng.choices((1, 2, 3), weights=(5, 3, 2))[0], max_versions, n_units - total)
        start = rng.randint(1, 3)
        versions.append(list(range(start, start + k)))
        total += k
    n_names = len(versions)
    names = [f"pkg{i:05d}" for i in range(n_names)]

    n_features = max(1, int(n_names * feature_ratio)) if n_names > 1 else 0
    feature_names = [f"virt{j:04d}" for j in range(n_features)]
    provides: dict[Pair, list[tuple[str, int | None]]] = {}
    for f in feature_names:
        for _ in range(rng.randint(1, 3)):
            i = rng.randrange(n_names)
            pair = (names[i], rng.choice(versions[i]))
            provides.setdefault(pair, []).append((f, None))

    units = []
    for i, name in enumerate(names):
        for v in versions[i]:
            depends = []
            if i > 0:
                for _ in range(rng.choices((0, 1, 2, 3, 4), weights=(3, 3, 2, 1, 1))[0]):
                    if rng.random() < 0.8:
                        j = int(i * rng.random() ** 2)
                        depends.append((Atom(names[j], _pick_constraint(rng, versions[j])),))
                    else:
                        opts = {int(i * rng.random() ** 2) for _ in range(rng.randint(2, 3))}
                        clause = tuple(Atom(names[j]) for j in sorted(opts))
                        if feature_names and rng.random() < 0.3:
                            clause += (Atom(rng.choice(feature_names)),)
                        depends.append(clause)
            conflicts = []
            if len(versions[i]) > 1:
                conflicts.append(Atom(name))
            if rng.random() < cross_conflict_rate:
                j = rng.randrange(n_names)
                if j != i:
                    conflicts.append(Atom(names[j], _pick_constraint(rng, versions[j])))
            units.append(
                PackageUnit(
                    name, v, tuple(depends), tuple(conflicts), tuple(provides.get((name, v), ()))
                )
            )
    u = Universe(units)
    if n_installed:
        chosen = _grow_installation(u, rng, n_installed)
        u = Universe(
            PackageUnit(x.name, x.version, x.depends, x.conflicts, x.provides, x.pair in chosen)
            for x in u
        )
    return u


def _grow_installation(u: Universe, rng: random.Random, target: int) -> set[Pair]:
    installed: set[Pair] = set()
    names = list(u.by_name)
    rng.shuffle(names)
    for root in names:
        if len(installed) >= target:
            break
        if any(n == root for n, _ in installed):
            continue
        added = _close(u, (root, u.by_name[root][-1]), installed)
        if added is not None:
            installed |= added
    return installed


def _close(u: Universe, root: Pair, installed: set[Pair]) -> set[Pair] | None:
    """Dependency closure of ``root`` compatible with ``installed``, or None."""
    added: set[Pair] = set()
    todo = [root]
    while todo:
        pair = todo.pop()
        if pair in installed or pair in added:
            continue
        current = installed | added
        unit = u.get(*pair)
        if any(n == pair[0] for n, _ in current):
            return None  # another version already chosen
        blocked = set()
        for a in unit.conflicts:
            blocked |= expand_atom(u, a)
        blocked.discard(pair)
        if blocked & current:
            return None
        for other in current:
            o = u.get(*other)
            if any(pair in expand_atom(u, a) for a in o.conflicts) and other != pair:
                return None
        added.add(pair)
        for clause in unit.depends:
            options = set()
            for a in clause:
                options |= expand_atom(u, a)
            if options & (current | added):
                continue
            if not options:
                return None
            todo.append(max(options, key=lambda p: (p[1], p[0])))
    return added


def random_small_instance(seed: int, max_vars: int = 16) -> tuple[Universe, Request]:
    """Tiny random problem whose aggregate model has at most ``max_vars`` variables.

    Installed flags are random, so the initial configuration may itself be
    inconsistent; requests may mention virtual or unknown names.
    """
    rng = random.Random(seed)
    while True:
        n_names = rng.randint(1, 5)
        names = [chr(ord("a") + i) for i in range(n_names)]
        versions = {n: sorted(rng.sample(range(1, 5), rng.randint(1, 3))) for n in names}
        n_units = sum(len(v) for v in versions.values())
        if n_units + n_names <= max_vars:
            break
    features = ["f", "g"]
    pool = names + features + ["zz"]

    def atom():
        n = rng.choice(pool)
        if n in versions and rng.random() < 0.4:
            return Atom(n, VersionConstraint(rng.choice(("=", "!=", ">=", "<=", ">", "<")), rng.randint(1, 4)))
        return Atom(n)

    units = []
    for n in names:
        for v in versions[n]:
            depends = tuple(
                tuple(atom() for _ in range(rng.choice((1, 1, 2))))
                for _ in range(rng.choice((0, 0, 1, 1, 2)))
            )
            conflicts = tuple(atom() for _ in range(rng.choice((0, 0, 1))))
            if len(versions[n]) > 1 and rng.random() < 0.5:
                conflicts += (Atom(n),)
            provides = tuple(
                (f, rng.choice((None, rng.randint(1, 3)))) for f in features if rng.random() < 0.25
            )
            units.append(PackageUnit(n, v, depends, conflicts, provides, rng.random() < 0.4))
    request = Request(
        install=tuple(atom() for _ in range(rng.choice((0, 1, 1, 2)))),
        remove=tuple(atom() for _ in range(rng.choice((0, 0, 0, 1)))),
        upgrade=tuple(Atom(rng.choice(names + ["zz"])) for _ in range(rng.choice((0, 0, 1)))),
    )
    return Universe(units), request


# -- benchmark harness ---------------------------------------------------------


@dataclass(frozen=True)
class RunRecord:
    instance: str
    solver: str
    status: str
    elapsed: float
    objective: int | None = None
    criteria: tuple[int, int] | None = None

    def line(self) -> str:
        obj = "-" if self.objective is None else str(self.objective)
        return f"{self.instance}\t{self.solver}\t{self.status}\t{round(self.elapsed * 1000)}\t{obj}"


@dataclass(frozen=True)
class SolverStats:
    solver: str
    runs: int
    nb_timeout: int
    nb_failed: int
    min_time: float
    max_time: float
    geometric_mean: float
    stddev: float
    total: float


def compute_stats(solver: str, records: Sequence[RunRecord]) -> SolverStats:
    """Summarize one solver's runs. Times of timed-out runs are already capped at the timeout."""
    times = [r.elapsed for r in records]
    if not times:
        return SolverStats(solver, 0, 0, 0, 0.0, 0.0, 0.0, 0.0, 0.0)
    if min(times) <= 0:
        gmean = 0.0
    else:
        gmean = math.exp(math.fsum(math.log(t) for t in times) / len(times))
    return SolverStats(
        solver=solver,
        runs=len(times),
        nb_timeout=sum(r.status == TIMED_OUT for r in records),
        nb_failed=sum(r.status in (INFEASIBLE, ERROR) for r in records),
        min_time=min(times),
        max_time=max(times),
        geometric_mean=gmean,
        stddev=statistics.pstdev(times),
        total=math.fsum(times),
    )


def _run_one(instance_id: str, model: IlpModel, solver_id: str, solver: Solver, timeout: float) -> RunRecord:
    t0 = time.perf_counter()
    try:
        out = solver(model, timeout)
    except Exception:  # a crashing solver is a failed run, not a crashed benchmark
        return RunRecord(instance_id, solver_id, ERROR, min(time.perf_counter() - t0, timeout))
    elapsed = time.perf_counter() - t0
    if out.status == TIMED_OUT:
        elapsed = timeout
    return RunRecord(instance_id, solver_id, out.status, elapsed, out.objective, out.criteria)


def run_bench(
    instances: Sequence[tuple[str, IlpModel]],
    solvers: Mapping[str, Solver],
    timeout: float = 300.0,
    jobs: int = 1,
) -> tuple[list[RunRecord], list[SolverStats]]:
    """Run every solver on every instance; only the solve call itself is timed."""
    if timeout <= 0:
        raise ValueError("timeout must be positive")
    tasks = [(iid, model, sid, fn, timeout) for iid, model in instances for sid, fn in solvers.items()]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_one, *zip(*tasks))) if tasks else []
    else:
        records = [_run_one(*t) for t in tasks]
    stats = [compute_stats(sid, [r for r in records if r.solver == sid]) for sid in solvers]
    return records, stats


def _num(x: float) -> str:
    s = f"{x:.2f}".rstrip("0").rstrip(".")
    return s or "0"


ROWS = (
    ("nb time out", lambda s: str(s.nb_timeout)),
    ("nb failed", lambda s: str(s.nb_failed)),
    ("min time (s)", lambda s: _num(s.min_time)),
    ("max time (s)", lambda s: _num(s.max_time)),
    ("geometric mean time", lambda s: _num(s.geometric_mean)),
    ("standard deviation", lambda s: _num(s.stddev)),
    ("total time (s)", lambda s: _num(s.total)),
)


def format_table(title: str, stats: Sequence[SolverStats]) -> str:
    n = max((s.runs for s in stats), default=0)
    head = f"{title} ({n} problems)"
    first = max(len(head), *(len(label) for label, _ in ROWS))
    widths = [max(8, len(s.solver)) for s in stats]
    lines = [head.ljust(first) + "".join(f" | {s.solver:>{w}}" for s, w in zip(stats, widths))]
    lines.append("-" * len(lines[0]))
    for label, get in ROWS:
        lines.append(label.ljust(first) + "".join(f" | {get(s):>{w}}" for s, w in zip(stats, widths)))
    return "\n".join(lines) + "\n"


def format_records(records: Iterable[RunRecord]) -> str:
    return "".join(r.line() + "\n" for r in records)
