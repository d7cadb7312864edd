"""Exact 0-1 optimization of an :class:`IlpModel`.

The built-in solver is a depth-first branch-and-bound over a static variable
order with pseudo-Boolean unit propagation. Every constraint is stored as
``sum(w_j * l_j) >= B`` over literals with positive weights, and its slack
(best achievable left side minus ``B``) is maintained incrementally so
propagation only touches constraints whose literals just became false.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from ._util import gc_paused
from .cudf import Pair, Request, Universe
from .encoder import (
    IlpModel,
    LinearConstraint,
    Objective,
    VarId,
    build_model,
    build_objective,
    criterion1_terms,
    make_constraint,
)

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
TIMED_OUT = "timed-out"

BRUTEFORCE_MAX_VARS = 24


@dataclass
class SolveStats:
    nodes: int = 0
    propagations: int = 0
    elapsed: float = 0.0


@dataclass
class SolveOutcome:
    status: str
    assignment: dict[VarId, int] | None = None
    objective: int | None = None
    stats: SolveStats = field(default_factory=SolveStats)
    # (criterion 1, criterion 2) values, filled by the lexicographic driver
    criteria: tuple[int, int] | None = None

    @property
    def best(self) -> tuple[dict[VarId, int], int] | None:
        if self.assignment is None:
            return None
        return self.assignment, self.objective


# -- normalization -----------------------------------------------------------


def _normalize(c: LinearConstraint, index: Mapping[VarId, int]) -> list[tuple[dict[int, int], int]]:
    """Rewrite as one or two ``sum(a_i x_i) >= b`` rows over variable indices."""
    row: dict[int, int] = {}
    for coef, v in c.terms:
        i = index[v]
        row[i] = row.get(i, 0) + coef
    row = {i: a for i, a in row.items() if a}
    neg = {i: -a for i, a in row.items()}
    if c.sense == ">=":
        return [(row, c.rhs)]
    if c.sense == "<=":
        return [(neg, -c.rhs)]
    return [(row, c.rhs), (neg, -c.rhs)]


class _Engine:
    """Propagation state for one model. Literal ``2*v`` means x_v = 1, ``2*v+1`` means x_v = 0."""

    def __init__(self, model: IlpModel):
        index = model.index()
        n = self.n = len(model.variables)
        self.occ: list[list[tuple[int, int]]] = [[] for _ in range(2 * n)]
        self.lits: list[list[int]] = []
        self.weights: list[list[int]] = []
        self.slack: list[int] = []
        self.maxw: list[int] = []
        self.root_conflict = False

        for c in model.constraints:
            for row, b in _normalize(c, index):
                lits, ws = [], []
                for i, a in row.items():
                    if a > 0:
                        lits.append(2 * i)
                        ws.append(a)
                    else:
                        lits.append(2 * i + 1)
                        ws.append(-a)
                        b -= a
                if b <= 0:
                    continue
                total = sum(ws)
                if total < b:
                    self.root_conflict = True
                    continue
                ci = len(self.lits)
                self.lits.append(lits)
                self.weights.append(ws)
                self.slack.append(total - b)
                self.maxw.append(max(ws))
                for lit, w in zip(lits, ws):
                    self.occ[lit].append((ci, w))

        cost = [0] * n
        for coef, v in model.objective.terms:
            cost[index[v]] += coef
        self.cost = cost
        self.lb = sum(min(c, 0) for c in cost)

        self.value = [-1] * n
        # constraints that already force literals before any assignment
        self.pending = [ci for ci in range(len(self.slack)) if self.slack[ci] < self.maxw[ci]]
        self.trail: list[int] = []
        self.qhead = 0
        self.propagations = 0

    def assign(self, v: int, val: int) -> None:
        self.value[v] = val
        self.trail.append(v)
        c = self.cost[v]
        self.lb += c * val - (c if c < 0 else 0)
        slack = self.slack
        for ci, w in self.occ[2 * v + val]:
            slack[ci] -= w

    def undo(self, mark: int) -> None:
        trail, value, slack, cost = self.trail, self.value, self.slack, self.cost
        while len(trail) > mark:
            v = trail.pop()
            val = value[v]
            for ci, w in self.occ[2 * v + val]:
                slack[ci] += w
            c = cost[v]
            self.lb -= c * val - (c if c < 0 else 0)
            value[v] = -1
        self.qhead = min(self.qhead, mark)

    def propagate(self) -> bool:
        """Run to fixpoint. Returns False on conflict."""
        trail, value, slack, maxw = self.trail, self.value, self.slack, self.maxw
        lits_of, weights_of = self.lits, self.weights
        if self.pending:
            for ci in self.pending:
                s = slack[ci]
                for lit, w in zip(lits_of[ci], weights_of[ci]):
                    if w > s and value[lit >> 1] == -1:
                        self.propagations += 1
                        self.assign(lit >> 1, 1 - (lit & 1))
            self.pending = []
        while self.qhead < len(trail):
            v = trail[self.qhead]
            self.qhead += 1
            for ci, _ in self.occ[2 * v + value[v]]:
                s = slack[ci]
                if s < 0:
                    return False
                if s >= maxw[ci]:
                    continue
                for lit, w in zip(lits_of[ci], weights_of[ci]):
                    if w > s and value[lit >> 1] == -1:
                        self.propagations += 1
                        self.assign(lit >> 1, 1 - (lit & 1))
        return True


def _branch_order(engine: _Engine) -> list[int]:
    n = engine.n
    occurrences = [len(engine.occ[2 * i]) + len(engine.occ[2 * i + 1]) for i in range(n)]
    return sorted(range(n), key=lambda i: (-abs(engine.cost[i]), -occurrences[i], i))


def solve(model: IlpModel, timeout: float = 300.0) -> SolveOutcome:
    """Minimize the model's objective by depth-first branch-and-bound."""
    with gc_paused():
        return _solve(model, timeout)


def _solve(model: IlpModel, timeout: float) -> SolveOutcome:
    if timeout <= 0:
        raise ValueError("timeout must be positive")
    start = time.monotonic()
    deadline = start + timeout
    stats = SolveStats()

    def finish(status, assignment=None, objective=None):
        stats.elapsed = time.monotonic() - start
        stats.propagations = engine.propagations if engine else 0
        return SolveOutcome(status, assignment, objective, stats)

    engine = None
    if model.infeasible:
        return finish(INFEASIBLE)
    engine = _Engine(model)
    if engine.root_conflict:
        return finish(INFEASIBLE)

    order = _branch_order(engine)
    cost, value = engine.cost, engine.value
    abscost = [abs(cost[i]) for i in order]
    n = engine.n

    incumbent: int | None = None
    best_values: list[int] | None = None
    ptr = 0
    # decision frames: [var, trail mark, ptr at decision, value tried, flipped]
    decisions: list[list] = []
    timed_out = False

    while True:
        stats.nodes += 1
        if time.monotonic() > deadline:
            timed_out = True
            break

        ok = engine.propagate()
        # objective bound: a value costing at least the remaining gap cannot improve
        while ok and incumbent is not None:
            gap = incumbent - engine.lb
            if gap <= 0:
                ok = False
                break
            forced = False
            for k in range(ptr, n):
                if abscost[k] < gap:
                    break
                v = order[k]
                if value[v] == -1:
                    engine.propagations += 1
                    engine.assign(v, 1 if cost[v] < 0 else 0)
                    forced = True
            if not forced:
                break
            ok = engine.propagate()

        if ok:
            while ptr < n and value[order[ptr]] != -1:
                ptr += 1
            if ptr == n:
                incumbent = engine.lb
                best_values = list(value)
                log.debug(
                    "incumbent %d after %d nodes, %.2fs",
                    incumbent, stats.nodes, time.monotonic() - start,
                )
                ok = False
            else:
                v = order[ptr]
                val = 1 if cost[v] < 0 else 0
                decisions.append([v, len(engine.trail), ptr, val, False])
                engine.assign(v, val)
                continue

        # backtrack to the deepest decision with an untried value
        while decisions:
            frame = decisions[-1]
            v, mark, saved_ptr, val, flipped = frame
            engine.undo(mark)
            ptr = saved_ptr
            if flipped:
                decisions.pop()
                continue
            frame[4] = True
            engine.assign(v, 1 - val)
            break
        else:
            break

    if best_values is None:
        return finish(TIMED_OUT if timed_out else INFEASIBLE)
    assignment = {var: best_values[i] for i, var in enumerate(model.variables)}
    if not model.satisfies(assignment):
        raise AssertionError("solver produced an assignment violating the model")
    objective = model.evaluate(assignment)
    return finish(TIMED_OUT if timed_out else OPTIMAL, assignment, objective)


def propagate(model: IlpModel, partial: Mapping[VarId, int]) -> dict[VarId, int] | None:
    """Unit-propagate ``partial`` to fixpoint; None signals a conflict."""
    if model.infeasible:
        return None
    engine = _Engine(model)
    if engine.root_conflict:
        return None
    index = model.index()
    for var, val in partial.items():
        i = index[var]
        if engine.value[i] == -1:
            engine.assign(i, int(val))
        elif engine.value[i] != val:
            return None
        if not engine.propagate():
            return None
    if not engine.propagate():
        return None
    return {var: engine.value[i] for i, var in enumerate(model.variables) if engine.value[i] != -1}


# -- exhaustive oracle ---------------------------------------------------------


def solve_bruteforce(model: IlpModel) -> SolveOutcome:
    """Enumerate every assignment; ties go to the lexicographically smallest one."""
    n = len(model.variables)
    if n > BRUTEFORCE_MAX_VARS:
        raise ValueError(f"brute force is limited to {BRUTEFORCE_MAX_VARS} variables, got {n}")
    start = time.monotonic()
    index = model.index()
    m = len(model.constraints)
    A = np.zeros((m, n), dtype=np.int64)
    rhs = np.array([c.rhs for c in model.constraints], dtype=np.int64)
    senses = [c.sense for c in model.constraints]
    for r, c in enumerate(model.constraints):
        for coef, v in c.terms:
            A[r, index[v]] += coef
    cost = np.zeros(n, dtype=np.int64)
    for coef, v in model.objective.terms:
        cost[index[v]] += coef
    ge = np.array([s == ">=" for s in senses], dtype=bool)
    le = np.array([s == "<=" for s in senses], dtype=bool)
    eq = np.array([s == "=" for s in senses], dtype=bool)

    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    best_k, best_val = None, None
    chunk = 1 << 16
    total = 1 << n
    for lo in range(0, total, chunk):
        ks = np.arange(lo, min(lo + chunk, total), dtype=np.int64)
        X = (ks[:, None] >> shifts[None, :]) & 1
        lhs = X @ A.T
        ok = np.ones(len(ks), dtype=bool)
        if m:
            ok &= np.all(~ge | (lhs >= rhs), axis=1)
            ok &= np.all(~le | (lhs <= rhs), axis=1)
            ok &= np.all(~eq | (lhs == rhs), axis=1)
        if not ok.any():
            continue
        vals = X @ cost
        vals = np.where(ok, vals, np.iinfo(np.int64).max)
        j = int(np.argmin(vals))
        if best_val is None or vals[j] < best_val:
            best_k, best_val = int(ks[j]), int(vals[j])
    stats = SolveStats(nodes=total, elapsed=time.monotonic() - start)
    if best_k is None:
        return SolveOutcome(INFEASIBLE, stats=stats)
    assignment = {v: (best_k >> (n - 1 - i)) & 1 for i, v in enumerate(model.variables)}
    return SolveOutcome(OPTIMAL, assignment, model.evaluate(assignment), stats)


# -- lexicographic driver -------------------------------------------------------


def lexicographic_solve(
    u: Universe, init: Iterable[Pair], r: Request, timeout: float = 300.0, solver=solve
) -> SolveOutcome:
    """Optimize criterion 1, pin its optimum, then optimize criterion 2."""
    init = frozenset(init)
    first = build_model(u, init, r, mode="criterion1")
    stage1 = solver(first, timeout)
    if stage1.status != OPTIMAL:
        return stage1
    z1 = stage1.objective
    pin = make_constraint(criterion1_terms(u, init), "=", z1, "criterion1-pin")
    second = first.with_constraints([pin]).with_objective(build_objective(u, init, "criterion2"))
    stage2 = solver(second, timeout)
    stage2.stats.nodes += stage1.stats.nodes
    stage2.stats.propagations += stage1.stats.propagations
    stage2.stats.elapsed += stage1.stats.elapsed
    if stage2.assignment is not None:
        stage2.criteria = (z1, stage2.objective)
    return stage2
